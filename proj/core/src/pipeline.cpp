#include "bbkit/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "bbkit/analysis.hpp"
#include "bbkit/attack_sim.hpp"
#include "bbkit/digest.hpp"
#include "bbkit/errors.hpp"
#include "bbkit/prefix_dataset.hpp"
#include "bbkit/records_io.hpp"
#include "bbkit/report_io.hpp"
#include "bbkit/reports.hpp"
#include "bbkit/scenario.hpp"
#include "bbkit/traceroute.hpp"
#include "bbkit/tsv.hpp"

namespace fs = std::filesystem;

namespace bbkit {

// ---- configuration ----

void pipeline_config::validate() const {
  if (output_dir.empty())
    throw validation_error("config: output_dir is required");
  match.validate();
  if (blowback_threshold < 2)
    throw validation_error("config: blowback_threshold must be at least 2");
  if (scenario && !rounds.empty())
    throw validation_error("config: give either [synth] or [[round]] inputs, not both");
  if (!scenario && rounds.empty())
    throw validation_error("config: no inputs; add [synth] or [[round]] tables");
  auto need = [](const fs::path& p) {
    if (!fs::exists(p))
      throw validation_error("input file not found: " + p.string());
  };
  if (scenario)
    need(*scenario);
  std::set<int> ids;
  for (const auto& r : rounds) {
    if (r.id < 0 || !ids.insert(r.id).second)
      throw validation_error("config: round ids must be distinct and non-negative");
    if (r.ledgers.empty() || r.traces.empty())
      throw validation_error("config: round " + std::to_string(r.id) + " needs ledgers and traces");
    for (const auto& p : r.ledgers)
      need(p);
    for (const auto& p : r.traces)
      need(p);
  }
  if (!rounds.empty() && !ids.contains(0))
    throw validation_error("config: round 0 (the full scan) is required");
  if (asn_dataset.has_value() != geo_dataset.has_value())
    throw validation_error("config: asn and geo datasets go together");
  for (const auto* p : {&asn_dataset, &geo_dataset, &traceroutes})
    if (*p)
      need(**p);
  if (jobs == 0)
    throw validation_error("config: jobs must be positive");
}

namespace {

[[noreturn]] void bad_key(std::string_view where, std::string_view what) {
  throw validation_error("config: " + std::string(where) + ": " + std::string(what));
}

void only_keys(const toml::table& t, std::initializer_list<std::string_view> keys, std::string_view where) {
  for (const auto& [k, _] : t)
    if (std::find(keys.begin(), keys.end(), k.str()) == keys.end())
      bad_key(where, "unknown key '" + std::string(k.str()) + "'");
}

template <class T>
std::optional<T> get(const toml::table& t, std::string_view key, std::string_view where) {
  const auto* n = t.get(key);
  if (!n)
    return std::nullopt;
  if (auto v = n->value<T>())
    return v;
  bad_key(where, "wrong type for '" + std::string(key) + "'");
}

std::vector<fs::path> paths(const toml::table& t, std::string_view key, const fs::path& base, std::string_view where) {
  std::vector<fs::path> out;
  const auto* n = t.get(key);
  if (!n)
    return out;
  auto add = [&](const toml::node& e) {
    auto s = e.value<std::string>();
    if (!s)
      bad_key(where, "'" + std::string(key) + "' must hold strings");
    out.push_back(base / *s);
  };
  if (const auto* arr = n->as_array())
    for (const auto& e : *arr)
      add(e);
  else
    add(*n);
  return out;
}

} // namespace

pipeline_config parse_pipeline_config(std::string_view text, const fs::path& base) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: line " << e.source().begin.line << ": " << e.description();
    throw validation_error(msg.str());
  }
  only_keys(root, {"pipeline", "match", "synth", "datasets", "round"}, "top level");
  pipeline_config c;
  if (const auto* p = root["pipeline"].as_table()) {
    const std::string_view w = "[pipeline]";
    only_keys(*p, {"output_dir", "blowback_threshold", "log_level", "attack_round", "timing_top", "jobs"}, w);
    if (auto v = get<std::string>(*p, "output_dir", w)) c.output_dir = base / *v;
    if (auto v = get<std::int64_t>(*p, "blowback_threshold", w)) c.blowback_threshold = static_cast<std::uint64_t>(std::max<std::int64_t>(*v, 0));
    if (auto v = get<std::string>(*p, "log_level", w)) c.log_level = *v;
    if (auto v = get<std::int64_t>(*p, "attack_round", w)) c.attack_round = static_cast<int>(*v);
    if (auto v = get<std::int64_t>(*p, "timing_top", w)) c.timing_top = static_cast<std::size_t>(std::max<std::int64_t>(*v, 0));
    if (auto v = get<std::int64_t>(*p, "jobs", w)) c.jobs = static_cast<std::size_t>(std::max<std::int64_t>(*v, 0));
  }
  if (const auto* m = root["match"].as_table()) {
    const std::string_view w = "[match]";
    only_keys(*m, {"expiry_s", "ack_mode", "ledger_capacity", "disorder_tolerance_ms", "ephemeral_port"}, w);
    if (auto v = get<double>(*m, "expiry_s", w)) c.match.expiry_window = static_cast<time_us>(*v * 1e6);
    if (auto v = get<std::string>(*m, "ack_mode", w)) c.match.ack_mode = parse_ack_mode(*v);
    if (auto v = get<std::int64_t>(*m, "ledger_capacity", w)) c.match.ledger_capacity = static_cast<std::size_t>(std::max<std::int64_t>(*v, 0));
    if (auto v = get<double>(*m, "disorder_tolerance_ms", w)) c.match.disorder_tolerance = static_cast<time_us>(*v * 1e3);
    if (auto v = get<std::int64_t>(*m, "ephemeral_port", w)) c.match.ephemeral_port = static_cast<std::uint16_t>(*v);
  }
  if (const auto* s = root["synth"].as_table()) {
    const std::string_view w = "[synth]";
    only_keys(*s, {"scenario", "rescans", "noise_pps", "seed"}, w);
    if (auto v = get<std::string>(*s, "scenario", w)) c.scenario = base / *v;
    else bad_key(w, "scenario is required");
    if (auto v = get<std::int64_t>(*s, "rescans", w)) c.synth_rescans = static_cast<int>(*v);
    if (auto v = get<double>(*s, "noise_pps", w)) c.synth_noise_pps = *v;
    if (auto v = get<std::int64_t>(*s, "seed", w)) c.synth_seed = static_cast<std::uint64_t>(*v);
  }
  if (const auto* d = root["datasets"].as_table()) {
    const std::string_view w = "[datasets]";
    only_keys(*d, {"asn", "geo", "traceroutes"}, w);
    if (auto v = get<std::string>(*d, "asn", w)) c.asn_dataset = base / *v;
    if (auto v = get<std::string>(*d, "geo", w)) c.geo_dataset = base / *v;
    if (auto v = get<std::string>(*d, "traceroutes", w)) c.traceroutes = base / *v;
  }
  if (const auto* rounds = root["round"].as_array()) {
    for (const auto& node : *rounds) {
      const auto* t = node.as_table();
      if (!t)
        bad_key("[[round]]", "expected a table");
      only_keys(*t, {"id", "ledgers", "traces"}, "[[round]]");
      round_inputs r;
      if (auto v = get<std::int64_t>(*t, "id", "[[round]]")) r.id = static_cast<int>(*v);
      else bad_key("[[round]]", "id is required");
      r.ledgers = paths(*t, "ledgers", base, "[[round]]");
      r.traces = paths(*t, "traces", base, "[[round]]");
      c.rounds.push_back(std::move(r));
    }
  }
  return c;
}

pipeline_config load_pipeline_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw validation_error("config file not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_pipeline_config(text.str(), path.parent_path());
}

// ---- run ----

namespace {

struct round_state {
  int id = 0;
  std::vector<probe_record> ledger;
  responses_file responses;
  std::vector<input_digest> inputs;
};

class pipeline_run {
public:
  pipeline_run(const pipeline_config& config, const log_sink& log) : config_(config), log_(log) {}

  pipeline_result run() {
    prepare_inputs();
    match_rounds();
    classify();
    analyze();
    return write_manifest();
  }

private:
  void say(const std::string& msg) const {
    if (log_)
      log_(msg);
  }

  fs::path out(const std::string& rel) {
    const auto p = config_.output_dir / rel;
    fs::create_directories(p.parent_path());
    written_.insert(rel);
    return p;
  }

  std::ofstream open(const std::string& rel) {
    std::ofstream f(out(rel), std::ios::binary);
    if (!f)
      throw data_error("cannot write " + (config_.output_dir / rel).string());
    return f;
  }

  void prepare_inputs() {
    rounds_in_ = config_.rounds;
    if (!config_.scenario)
      return;
    say("synth: generating campaign from " + config_.scenario->string());
    auto sc = load_scenario(*config_.scenario);
    if (config_.synth_rescans) sc.campaign.rescans = *config_.synth_rescans;
    if (config_.synth_noise_pps) sc.campaign.noise_pps = *config_.synth_noise_pps;
    if (config_.synth_seed) sc.campaign.seed = *config_.synth_seed;
    const auto campaign = generate_campaign(sc.specs, sc.campaign);
    for (const auto& r : campaign.rounds) {
      const auto base = "inputs/round" + std::to_string(r.round_id);
      write_probe_ledger(out(base + ".ledger.csv"), r.ledger);
      write_packet_records(out(base + ".packets.csv"), r.packets);
      rounds_in_.push_back({r.round_id, {config_.output_dir / (base + ".ledger.csv")},
                            {config_.output_dir / (base + ".packets.csv")}});
    }
  }

  void match_rounds() {
    std::sort(rounds_in_.begin(), rounds_in_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& in : rounds_in_) {
      round_state st;
      st.id = in.id;
      for (const auto& p : in.ledgers) {
        auto parsed = read_probe_ledger(p);
        if (parsed.rejected)
          say("round " + std::to_string(in.id) + ": " + std::to_string(parsed.rejected) + " ledger lines rejected in "
              + p.filename().string());
        st.ledger.insert(st.ledger.end(), parsed.records.begin(), parsed.records.end());
        st.inputs.push_back(digest_input(p));
      }
      std::vector<packet_record> packets;
      for (const auto& p : in.traces) {
        auto parsed = parse_packet_trace(p);
        if (parsed.rejected)
          say("round " + std::to_string(in.id) + ": " + std::to_string(parsed.rejected) + " packets rejected in "
              + p.filename().string());
        packets.insert(packets.end(), std::make_move_iterator(parsed.records.begin()),
                       std::make_move_iterator(parsed.records.end()));
        st.inputs.push_back(digest_input(p));
      }
      sort_by_time(st.ledger);
      sort_by_time(packets);
      auto report = match_stream(st.ledger, packets, config_.match);
      st.responses.round_id = in.id;
      st.responses.ledgers = describe_ledger(st.ledger);
      st.responses.responses = std::move(report.responses);
      st.responses.counters = report.counters;
      say("match: round " + std::to_string(in.id) + ": " + std::to_string(report.counters.matched_packets)
          + " matched, " + std::to_string(report.counters.unmatched_packets) + " unmatched");
      write_responses(out("responses/round" + std::to_string(in.id) + ".responses.csv"), st.responses);
      all_inputs_.insert(all_inputs_.end(), st.inputs.begin(), st.inputs.end());
      rounds_.push_back(std::move(st));
    }
  }

  void classify() {
    std::vector<std::vector<generator_profile>> per_round;
    for (const auto& st : rounds_) {
      auto profiles = build_profiles(st.responses.responses, st.id, config_.blowback_threshold);
      add_silent_targets(profiles, st.ledger, st.id);
      per_round.push_back(std::move(profiles));
      for (const auto& [protocol, f] : st.responses.ledgers)
        file_.probes[{st.id, protocol}] = f.totals;
    }
    file_.profiles = merge_rounds(per_round);
    auto f = open("profiles.tsv");
    write_profiles(f, file_, all_inputs_);
    say("classify: " + std::to_string(file_.profiles.size()) + " generator profiles");
  }

  std::vector<int> rescan_ids() const {
    std::vector<int> ids;
    for (const auto& st : rounds_)
      if (st.id != 0)
        ids.push_back(st.id);
    return ids;
  }

  std::vector<int> all_ids() const {
    std::vector<int> ids;
    for (const auto& st : rounds_)
      ids.push_back(st.id);
    return ids;
  }

  void analyze() {
    const auto threshold = config_.blowback_threshold;
    const auto all = all_ids();
    const auto rescans = rescan_ids();
    {
      auto f = open("table1_full_scan.tsv");
      write_full_scan_table(f, file_, 0, threshold, all_inputs_);
    }
    {
      auto f = open("table2_amplification.tsv");
      write_amplification_table(f, file_, rescans, threshold, all_inputs_);
    }
    if (config_.asn_dataset) {
      const auto asn = prefix_dataset::load(*config_.asn_dataset);
      const auto geo = prefix_dataset::load(*config_.geo_dataset);
      auto inputs = all_inputs_;
      inputs.push_back(digest_input(*config_.asn_dataset));
      inputs.push_back(digest_input(*config_.geo_dataset));
      auto f = open("table3_origins.tsv");
      write_origins_table(f, file_, asn.dataset, geo.dataset, all, threshold, inputs);
    }
    {
      auto f = open("table4_packet_types.tsv");
      write_packet_types_table(f, file_, 0, all_inputs_);
    }
    {
      auto f = open("fig1_stability.tsv");
      write_stability_data(f, file_, rescans, threshold, all_inputs_);
    }
    {
      auto f = open("fig2_concentration.tsv");
      write_concentration_data(f, file_, all, 0, threshold, all_inputs_);
    }
    if (config_.traceroutes) {
      const auto parsed = read_traceroute_paths(*config_.traceroutes);
      if (parsed.rejected)
        say("loops: " + std::to_string(parsed.rejected) + " paths rejected");
      const auto persistent = persistent_multipacket(file_, all);
      auto inputs = all_inputs_;
      inputs.push_back(digest_input(*config_.traceroutes));
      auto f = open("fig4_loops.tsv");
      write_loop_data(f, parsed.records, &persistent, 3, inputs);
    }
    {
      const round_state* st = &rounds_.front();
      for (const auto& r : rounds_)
        if (r.id == config_.attack_round)
          st = &r;
      const auto timeline = simulate_attack(attack_inputs(st->responses));
      say("attack-sim: round " + std::to_string(st->id) + ", " + std::to_string(timeline.duration_s()) + " s");
      auto f = open("fig5_attack.tsv");
      write_attack_timeline(f, timeline, st->inputs);
    }
    {
      const auto& st = rounds_.front();
      auto f = open("fig6_timing.tsv");
      write_timing_data(f, st.responses.responses, config_.timing_top, {}, us_per_second, st.inputs);
    }
  }

  pipeline_result write_manifest() {
    pipeline_result result;
    for (const auto& rel : written_) {
      const auto p = config_.output_dir / rel;
      result.outputs.push_back({rel, static_cast<std::uint64_t>(fs::file_size(p)), sha256_file(p)});
    }
    result.manifest = config_.output_dir / manifest_name;
    std::ofstream f(result.manifest, std::ios::binary);
    if (!f)
      throw data_error("cannot write " + result.manifest.string());
    tsv_writer w(f, {"path", "bytes", "sha256"});
    for (const auto& e : result.outputs) {
      w << e.path << e.bytes << e.sha256;
      w.end_row();
    }
    w.finish(all_inputs_);
    return result;
  }

  const pipeline_config& config_;
  const log_sink& log_;
  std::vector<round_inputs> rounds_in_;
  std::vector<round_state> rounds_;
  std::vector<input_digest> all_inputs_;
  std::set<std::string> written_;
  profiles_file file_;
};

} // namespace

pipeline_result run_pipeline(const pipeline_config& config, const log_sink& log) {
  config.validate();
  fs::create_directories(config.output_dir);
  const auto marker = config.output_dir / partial_marker;
  {
    std::ofstream m(marker);
    m << "in progress\n";
  }
  try {
    auto result = pipeline_run(config, log).run();
    fs::remove(marker);
    return result;
  } catch (const std::exception& e) {
    std::ofstream m(marker);
    m << "failed: " << e.what() << '\n';
    throw;
  }
}

} // namespace bbkit
