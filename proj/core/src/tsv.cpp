#include "bbkit/tsv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "bbkit/digest.hpp"
#include "bbkit/errors.hpp"
#include "bbkit/records_io.hpp"

#ifndef BBKIT_VERSION
#define BBKIT_VERSION "0.0.0"
#endif

namespace bbkit {

std::string_view library_version() { return BBKIT_VERSION; }

input_digest digest_input(const std::filesystem::path& path) {
  return {path.filename().string(), sha256_file(path)};
}

std::string format_number(double v) {
  if (!std::isfinite(v))
    return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_number(std::optional<double> v) { return v ? format_number(*v) : "NA"; }

tsv_writer::tsv_writer(std::ostream& out, std::vector<std::string> columns)
  : out_(out), columns_(columns.size()) {
  for (std::size_t i = 0; i < columns.size(); ++i)
    out_ << (i ? "\t" : "") << columns[i];
  out_ << '\n';
}

tsv_writer& tsv_writer::operator<<(std::string_view cell) {
  if (cell.find_first_of("\t\n") != std::string_view::npos)
    throw error("TSV cell contains a tab or newline");
  out_ << (cells_++ ? "\t" : "") << cell;
  return *this;
}

tsv_writer& tsv_writer::operator<<(std::uint64_t v) { return *this << std::to_string(v); }
tsv_writer& tsv_writer::operator<<(std::int64_t v) { return *this << std::to_string(v); }
tsv_writer& tsv_writer::operator<<(double v) { return *this << format_number(v); }
tsv_writer& tsv_writer::operator<<(std::optional<double> v) { return *this << format_number(v); }

void tsv_writer::end_row() {
  if (cells_ != columns_)
    throw error("TSV row has " + std::to_string(cells_) + " cells, expected " + std::to_string(columns_));
  out_ << '\n';
  cells_ = 0;
}

void tsv_writer::comment(std::string_view text) { out_ << "# " << text << '\n'; }

void tsv_writer::finish(const std::vector<input_digest>& inputs) {
  out_ << "# bbkit " << library_version() << " inputs:";
  if (inputs.empty())
    out_ << " none";
  for (const auto& in : inputs)
    out_ << ' ' << in.name << "=sha256:" << in.sha256;
  out_ << '\n';
}

std::size_t tsv_table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name)
      return i;
  throw data_error("missing column '" + std::string(name) + "'");
}

tsv_table read_tsv(std::istream& in) {
  tsv_table t;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line.front() == '#') {
      auto text = std::string_view(line).substr(1);
      if (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
      t.comments.emplace_back(text);
      continue;
    }
    std::vector<std::string> cells;
    for (auto f : split_fields(line, '\t'))
      cells.emplace_back(f);
    if (header) {
      t.columns = std::move(cells);
      header = false;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw data_error("line " + std::to_string(line_no) + ": expected " + std::to_string(t.columns.size())
                       + " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (header)
    throw data_error("table has no header row");
  return t;
}

tsv_table read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw data_error("cannot read " + path.string());
  return read_tsv(in);
}

} // namespace bbkit
