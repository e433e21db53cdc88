#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bbkit {

/// An input named in a report footer.
struct input_digest {
  std::string name;
  std::string sha256;
};

/// Digest of a file, named by its file name only so footers do not depend
/// on where the inputs live.
input_digest digest_input(const std::filesystem::path& path);

std::string_view library_version();

/// Tab-separated table: header row, data rows, then one trailing comment
/// line with the tool version and input digests.
class tsv_writer {
public:
  tsv_writer(std::ostream& out, std::vector<std::string> columns);

  tsv_writer& operator<<(std::string_view cell);
  tsv_writer& operator<<(const std::string& cell) { return *this << std::string_view(cell); }
  tsv_writer& operator<<(const char* cell) { return *this << std::string_view(cell); }
  tsv_writer& operator<<(std::uint64_t v);
  tsv_writer& operator<<(std::int64_t v);
  tsv_writer& operator<<(int v) { return *this << static_cast<std::int64_t>(v); }
  tsv_writer& operator<<(double v);
  tsv_writer& operator<<(std::optional<double> v);
  /// Ends the current row; throws if it has the wrong number of cells.
  void end_row();
  /// Extra comment line before the footer.
  void comment(std::string_view text);
  void finish(const std::vector<input_digest>& inputs);

private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t cells_ = 0;
};

/// Fixed six-decimal rendering used by every report, "NA" for nullopt.
std::string format_number(double v);
std::string format_number(std::optional<double> v);

struct tsv_table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments; // without the leading '#'

  /// Index of a named column; throws data_error if absent.
  std::size_t column(std::string_view name) const;
};

/// Throws data_error on a malformed table (wrong cell counts).
tsv_table read_tsv(std::istream& in);
tsv_table read_tsv(const std::filesystem::path& path);

} // namespace bbkit
