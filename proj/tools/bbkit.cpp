// bbkit: blowback measurement toolkit command line.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bbkit/analysis.hpp"
#include "bbkit/attack_sim.hpp"
#include "bbkit/classifier.hpp"
#include "bbkit/errors.hpp"
#include "bbkit/matcher.hpp"
#include "bbkit/pcap.hpp"
#include "bbkit/pipeline.hpp"
#include "bbkit/prefix_dataset.hpp"
#include "bbkit/probe_emitter.hpp"
#include "bbkit/probe_engine.hpp"
#include "bbkit/records_io.hpp"
#include "bbkit/report_io.hpp"
#include "bbkit/reports.hpp"
#include "bbkit/scenario.hpp"
#include "bbkit/synth.hpp"
#include "bbkit/traceroute.hpp"
#include "bbkit/tsv.hpp"
#include "bbkit/wire.hpp"

namespace fs = std::filesystem;
using namespace bbkit;

namespace {

std::optional<std::size_t> g_jobs;
std::string g_log_level; // from --log-level; wins over BBKIT_LOG and the config

// Errors that end the program are printed whatever the log level.
void fatal(const std::string& message) { std::cerr << "bbkit: error: " << message << '\n'; }

void setup_logging(const std::string& override_level) {
  auto logger = spdlog::stderr_color_mt("bbkit");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  std::string level = override_level;
  if (level.empty())
    if (const char* env = std::getenv("BBKIT_LOG"))
      level = env;
  spdlog::set_level(level.empty() ? spdlog::level::info : spdlog::level::from_str(level));
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw data_error("cannot write " + p.string());
  return out;
}

std::vector<input_digest> digests_of(const std::vector<std::string>& files) {
  std::vector<input_digest> out;
  for (const auto& f : files)
    out.push_back(digest_input(f));
  return out;
}

void need_files(const std::vector<std::string>& files) {
  for (const auto& f : files)
    if (!fs::exists(f))
      throw validation_error("input file not found: " + f);
}

std::vector<ipv4> read_targets(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    throw validation_error("input file not found: " + path.string());
  std::vector<ipv4> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos)
      continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(parse_ipv4(std::string_view(line).substr(b, e - b + 1)));
  }
  return out;
}

std::vector<int> default_rescans(const profiles_file& file) {
  std::vector<int> out;
  for (int r : rounds_in(file))
    if (r != 0)
      out.push_back(r);
  return out;
}

// ---- probe ----

struct probe_cmd {
  std::string protocol, targets, kind = "full", out, zone{default_zone}, emit_pcap, scanner = "192.0.2.1";
  std::uint64_t sweep = 0, seed = 0;
  std::optional<std::int64_t> rate;
  std::int64_t start_us = 0;
  std::uint32_t probe_size = 0;
  bool emit_raw = false;
  std::vector<std::string> allow;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("probe", "Generate a probe ledger (optionally emit probes in a lab)");
    c->add_option("--protocol", protocol, "DNS, ICMP, NTP, TCP25, TCP80 or TCP443")->required();
    auto* t = c->add_option("--targets", targets, "File with one IPv4 address per line, or 'full' for the whole space");
    auto* s = c->add_option("--sweep", sweep, "Sweep this many addresses of the IPv4 space instead");
    t->excludes(s);
    c->add_option("--kind", kind, "full or rescan")->check(CLI::IsMember({"full", "rescan"}));
    c->add_option("--rate", rate, "Probes per second (default by protocol and kind)");
    c->add_option("--seed", seed, "Seed for order and tokens");
    c->add_option("--start-us", start_us, "Send time of the first probe");
    c->add_option("--zone", zone, "Zone under which DNS query names are generated");
    c->add_option("--probe-size", probe_size, "Override the probe size in bytes");
    c->add_option("--out", out, "Ledger file")->required();
    c->add_option("--emit-pcap", emit_pcap, "Also write the probe datagrams to a pcap file");
    c->add_flag("--emit-raw,--emit", emit_raw, "Send the probes on a raw socket (lab prefixes only)");
    c->add_option("--allow,--allow-prefix", allow, "Prefixes raw emission may reach; each must be a private or lab range");
    c->add_option("--scanner", scanner, "Source address of emitted probes");
    return c;
  }

  void run() {
    scan_plan plan;
    std::string upper = protocol;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    const auto parsed = try_parse_protocol(upper);
    if (!parsed)
      throw validation_error("unknown protocol '" + protocol + "'");
    plan.protocol = *parsed;
    plan.kind = kind == "full" ? scan_kind::full : scan_kind::rescan;
    if (targets == "full")
      plan.targets = target_source::sweep();
    else if (!targets.empty())
      plan.targets = target_source::list(read_targets(targets));
    else if (sweep > 0)
      plan.targets = target_source::sweep(sweep);
    else
      throw validation_error("give --targets or --sweep");
    plan.rate_pps = rate;
    plan.seed = seed;
    plan.start_time = start_us;
    plan.zone = zone;
    if (probe_size > 0)
      plan.probe_size = probe_size;
    plan.validate();
    std::vector<cidr> allowed;
    for (const auto& a : allow)
      allowed.push_back(parse_cidr(a));
    if (emit_raw)
      check_allowed_prefixes(allowed); // refuse before writing anything
    const auto ledger = generate_ledger(plan);
    write_probe_ledger(fs::path(out), ledger);
    spdlog::info("probe: {} probes written to {}", ledger.size(), out);

    const auto scanner_ip = parse_ipv4(scanner);
    if (!emit_pcap.empty()) {
      pcap_probe_sink sink(emit_pcap);
      for (const auto& p : ledger)
        sink.send(p, wire::encode_probe(p, scanner_ip));
      spdlog::info("probe: datagrams written to {}", emit_pcap);
    }
    if (emit_raw) {
      probe_emitter emitter(allowed, scanner_ip, std::make_unique<raw_socket_sink>());
      emitter.emit_all(ledger, true);
      spdlog::info("probe: {} probes sent", emitter.sent());
    }
  }
};

// ---- match ----

struct match_cmd {
  std::vector<std::string> ledgers, traces;
  std::string out, ack = "either";
  int round = 0;
  double window_s = 600, tolerance_ms = 1000;
  std::size_t capacity = 10'000'000;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("match", "Attribute received packets to probes");
    c->add_option("--ledger,--probes", ledgers, "Probe ledger files")->required();
    c->add_option("--trace,--packets", traces, "Packet traces (native records or pcap)")->required();
    c->add_option("--out", out, "Responses file")->required();
    c->add_option("--round", round, "Round id recorded in the output (0 = full scan)");
    c->add_option("--window-s,--window-secs", window_s, "Ledger expiry window in seconds");
    c->add_option("--ack-mode", ack, "either, seq+1 or exact");
    c->add_option("--capacity", capacity, "Maximum live ledger entries");
    c->add_option("--tolerance-ms", tolerance_ms, "Tolerated timestamp regression");
    return c;
  }

  void run() {
    need_files(ledgers);
    need_files(traces);
    match_config cfg;
    cfg.expiry_window = static_cast<time_us>(window_s * 1e6);
    cfg.ack_mode = parse_ack_mode(ack);
    cfg.ledger_capacity = capacity;
    cfg.disorder_tolerance = static_cast<time_us>(tolerance_ms * 1e3);
    cfg.validate();

    std::vector<probe_record> ledger;
    for (const auto& f : ledgers) {
      auto r = read_probe_ledger(f);
      if (r.rejected)
        spdlog::warn("match: {} ledger lines rejected in {}", r.rejected, f);
      ledger.insert(ledger.end(), r.records.begin(), r.records.end());
    }
    std::vector<packet_record> packets;
    for (const auto& f : traces) {
      auto r = parse_packet_trace(f);
      if (r.rejected)
        spdlog::warn("match: {} packets rejected in {}", r.rejected, f);
      for (const auto& d : r.diagnostics)
        spdlog::debug("  {}", d);
      packets.insert(packets.end(), std::make_move_iterator(r.records.begin()),
                     std::make_move_iterator(r.records.end()));
    }
    sort_by_time(ledger);
    sort_by_time(packets);
    auto report = match_stream(ledger, packets, cfg);
    responses_file file;
    file.round_id = round;
    file.ledgers = describe_ledger(ledger);
    file.responses = std::move(report.responses);
    file.counters = report.counters;
    write_responses(fs::path(out), file);
    const auto& c = report.counters;
    std::cout << "matched\t" << c.matched_packets << "\nunmatched\t" << c.unmatched_packets << "\nmatched_fraction\t"
              << format_number(c.matched_fraction()) << "\nevicted\t" << c.evicted << '\n';
    for (auto r : all_rules)
      std::cout << to_string(r) << '\t' << c.per(r) << '\n';
  }
};

// ---- classify ----

struct classify_cmd {
  std::vector<std::string> responses, ledgers;
  std::string out;
  std::uint64_t threshold = default_blowback_threshold;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("classify", "Build generator profiles from responses files");
    c->add_option("--responses", responses, "One responses file per round")->required();
    c->add_option("--ledger,--probes", ledgers, "Ledgers in the same order, to list silent targets");
    c->add_option("--threshold", threshold, "Packets that make a response blowback");
    c->add_option("--out", out, "Profiles table")->required();
    return c;
  }

  void run() {
    need_files(responses);
    need_files(ledgers);
    if (!ledgers.empty() && ledgers.size() != responses.size())
      throw validation_error("give one --ledger per --responses file");
    if (threshold < 2)
      throw validation_error("threshold must be at least 2");
    profiles_file file;
    std::vector<std::vector<generator_profile>> rounds;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto r = read_responses(responses[i]);
      auto profiles = build_profiles(r.responses, r.round_id, threshold);
      if (!ledgers.empty()) {
        auto parsed = read_probe_ledger(ledgers[i]);
        add_silent_targets(profiles, parsed.records, r.round_id);
      }
      for (const auto& [protocol, f] : r.ledgers)
        file.probes[{r.round_id, protocol}] = f.totals;
      rounds.push_back(std::move(profiles));
    }
    file.profiles = merge_rounds(rounds);
    auto all = responses;
    all.insert(all.end(), ledgers.begin(), ledgers.end());
    auto f = open_out(out);
    write_profiles(f, file, digests_of(all));
    spdlog::info("classify: {} profiles", file.profiles.size());
  }
};

// ---- analyses over a profiles table ----

struct profiles_input {
  std::string profiles, out;
  std::uint64_t threshold = default_blowback_threshold;

  void add(CLI::App* c) {
    c->add_option("--profiles", profiles, "Profiles table from classify")->required()->check(CLI::ExistingFile);
    c->add_option("--threshold", threshold, "Packets that make a response blowback");
    c->add_option("--out", out, "Output table")->required();
  }
  profiles_file load() const { return read_profiles(profiles); }
  std::vector<input_digest> inputs() const { return {digest_input(profiles)}; }
};

struct summarize_cmd {
  profiles_input in;
  int table = 1;
  int round = 0;
  std::vector<int> rounds;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("summarize", "Full-scan summary, rescan amplification or packet types");
    in.add(c);
    c->add_option("--table", table, "1: full-scan summary, 2: rescan amplification, 4: packet types")
      ->check(CLI::IsMember({1, 2, 4}));
    c->add_option("--round", round, "Round for tables 1 and 4");
    c->add_option("--rounds", rounds, "Rescans averaged in table 2 (default: all but 0)");
    return c;
  }

  void run() {
    const auto file = in.load();
    auto f = open_out(in.out);
    if (table == 1)
      write_full_scan_table(f, file, round, in.threshold, in.inputs());
    else if (table == 2)
      write_amplification_table(f, file, rounds.empty() ? default_rescans(file) : rounds, in.threshold, in.inputs());
    else
      write_packet_types_table(f, file, round, in.inputs());
  }
};

struct stability_cmd {
  profiles_input in;
  std::vector<int> rounds;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("stability", "Prevalence of full-scan blowback generators across rescans");
    in.add(c);
    c->add_option("--rounds", rounds, "Rescan rounds (default: all but 0)");
    return c;
  }

  void run() {
    const auto file = in.load();
    const auto ids = rounds.empty() ? default_rescans(file) : rounds;
    if (ids.empty())
      throw data_error("no rescan rounds in " + in.profiles);
    auto f = open_out(in.out);
    write_stability_data(f, file, ids, in.threshold, in.inputs());
  }
};

struct concentration_cmd {
  profiles_input in;
  std::vector<int> rounds;
  int rank_round = 0;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("concentration", "Cumulative activity of blowback generators");
    in.add(c);
    c->add_option("--rounds", rounds, "Rounds to include (default: all)");
    c->add_option("--rank-round", rank_round, "Round whose activity sets the ranking");
    return c;
  }

  void run() {
    const auto file = in.load();
    auto f = open_out(in.out);
    write_concentration_data(f, file, rounds.empty() ? rounds_in(file) : rounds, rank_round, in.threshold,
                             in.inputs());
  }
};

struct origins_cmd {
  profiles_input in;
  std::string asn, geo;
  std::vector<int> rounds;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("origins", "ASN and country of blowback traffic");
    in.add(c);
    c->add_option("--asn", asn, "CIDR,ASN dataset")->required()->check(CLI::ExistingFile);
    c->add_option("--geo", geo, "CIDR,country dataset")->required()->check(CLI::ExistingFile);
    c->add_option("--rounds", rounds, "Rounds to include (default: all)");
    return c;
  }

  void run() {
    const auto file = in.load();
    const auto a = prefix_dataset::load(asn);
    const auto g = prefix_dataset::load(geo);
    if (a.rejected + g.rejected)
      spdlog::warn("origins: {} dataset lines rejected", a.rejected + g.rejected);
    auto inputs = in.inputs();
    inputs.push_back(digest_input(asn));
    inputs.push_back(digest_input(geo));
    auto f = open_out(in.out);
    write_origins_table(f, file, a.dataset, g.dataset, rounds.empty() ? rounds_in(file) : rounds, in.threshold,
                        inputs);
  }
};

// ---- loops, timing, attack-sim ----

struct loops_cmd {
  std::string paths, profiles, out;
  int threshold = 3;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("loops", "Routing loop prevalence in traceroute paths");
    c->add_option("--paths", paths, "Traceroute paths")->required()->check(CLI::ExistingFile);
    c->add_option("--profiles", profiles, "Also report paths toward persistent multipacket generators")
      ->check(CLI::ExistingFile);
    c->add_option("--threshold", threshold, "Occurrences of one router that make a loop");
    c->add_option("--out", out, "Output table")->required();
    return c;
  }

  void run() {
    const auto parsed = read_traceroute_paths(paths);
    if (parsed.rejected)
      spdlog::warn("loops: {} paths rejected", parsed.rejected);
    std::vector<input_digest> inputs{digest_input(paths)};
    std::optional<std::set<ipv4>> subset;
    if (!profiles.empty()) {
      const auto file = read_profiles(profiles);
      subset = persistent_multipacket(file, rounds_in(file));
      inputs.push_back(digest_input(profiles));
    }
    auto f = open_out(out);
    write_loop_data(f, parsed.records, subset ? &*subset : nullptr, threshold, inputs);
  }
};

struct timing_cmd {
  std::string responses, out;
  std::vector<std::string> targets;
  std::size_t top = 8;
  double bin_ms = 1000;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("timing", "Per-bin arrival histograms of individual responses");
    c->add_option("--responses", responses, "Responses file")->required()->check(CLI::ExistingFile);
    c->add_option("--target", targets, "Generators to plot (default: the largest responses)");
    c->add_option("--top", top, "How many of the largest responses");
    c->add_option("--bin-ms", bin_ms, "Bin width in milliseconds");
    c->add_option("--out", out, "Output table")->required();
    return c;
  }

  void run() {
    if (!(bin_ms > 0))
      throw validation_error("bin width must be positive");
    const auto file = read_responses(responses);
    std::vector<ipv4> only;
    for (const auto& t : targets)
      only.push_back(parse_ipv4(t));
    auto f = open_out(out);
    write_timing_data(f, file.responses, top, only, static_cast<time_us>(bin_ms * 1000), {digest_input(responses)});
  }
};

struct attack_cmd {
  std::vector<std::string> responses;
  std::string out;
  int repeat = 1;
  std::int64_t period = 0;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("attack-sim", "Victim-side bandwidth if every probe were sent at once");
    c->add_option("--responses", responses, "Rescan responses files, one or more protocols")->required();
    c->add_option("--out", out, "Timeline table (second, pps, Bps)")->required();
    c->add_option("--repeat", repeat, "Experimental: replay the probes this many times");
    c->add_option("--period", period, "Experimental: seconds between replays");
    return c;
  }

  void run() {
    need_files(responses);
    std::vector<attack_input> inputs;
    for (const auto& r : responses)
      for (auto& in : attack_inputs(read_responses(r)))
        inputs.push_back(std::move(in));
    attack_options opts;
    opts.repeat = repeat;
    opts.period_s = period;
    if (repeat > 1)
      spdlog::warn("attack-sim: --repeat is experimental; sustained attacks were not measured");
    const auto t = simulate_attack(inputs, opts);
    if (t.skewed_packets)
      spdlog::warn("attack-sim: {} packets arrived before their probe and were put in second 0", t.skewed_packets);
    auto f = open_out(out);
    write_attack_timeline(f, t, digests_of(responses));
  }
};

// ---- synth ----

struct synth_cmd {
  std::string scenario_file, preset, out_dir;
  std::optional<int> rounds;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  bool pcap = false;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "Generate a synthetic campaign with ground truth");
    auto* s = c->add_option("--scenario", scenario_file, "Scenario file (TOML)")->check(CLI::ExistingFile);
    auto* p = c->add_option("--preset", preset, "Named preset, e.g. anecdote-103-40-65-97");
    s->excludes(p);
    c->add_option("--rounds", rounds, "Number of rescans after the full scan");
    c->add_option("--noise-pps", noise, "Background packets per second");
    c->add_option("--seed", seed, "Seed");
    c->add_option("--out-dir", out_dir, "Output directory")->required();
    c->add_flag("--pcap", pcap, "Also write each trace as pcap");
    return c;
  }

  void run() {
    scenario sc;
    if (!scenario_file.empty())
      sc = load_scenario(scenario_file);
    else if (!preset.empty())
      sc.specs = preset_specs(preset);
    else
      throw validation_error("give --scenario or --preset");
    if (rounds) sc.campaign.rescans = *rounds;
    if (noise) sc.campaign.noise_pps = *noise;
    if (seed) sc.campaign.seed = *seed;
    const auto campaign = generate_campaign(sc.specs, sc.campaign);
    fs::create_directories(out_dir);
    profiles_file truth;
    std::vector<std::vector<generator_profile>> per_round;
    for (const auto& r : campaign.rounds) {
      const auto base = fs::path(out_dir) / ("round" + std::to_string(r.round_id));
      write_probe_ledger(fs::path(base.string() + ".ledger.csv"), r.ledger);
      write_packet_records(fs::path(base.string() + ".packets.csv"), r.packets);
      if (pcap)
        write_pcap(base.string() + ".pcap", r.packets);
      for (const auto& [protocol, f] : describe_ledger(r.ledger))
        truth.probes[{r.round_id, protocol}] = f.totals;
      per_round.push_back(r.truth);
      spdlog::info("synth: round {}: {} probes, {} packets ({} noise)", r.round_id, r.ledger.size(),
                   r.packets.size(), r.noise_packets);
    }
    truth.profiles = merge_rounds(per_round);
    auto f = open_out(fs::path(out_dir) / "truth.tsv");
    write_profiles(f, truth, scenario_file.empty() ? std::vector<input_digest>{} : digests_of({scenario_file}));
  }
};

// ---- run ----

struct run_cmd {
  std::string config;

  CLI::App* attach(CLI::App& app) {
    auto* c = app.add_subcommand("run", "Run the whole pipeline from a config file");
    c->add_option("--config", config, "Pipeline config (TOML)")->required();
    return c;
  }

  void run() {
    auto cfg = load_pipeline_config(config);
    if (g_log_level.empty() && !std::getenv("BBKIT_LOG"))
      spdlog::set_level(spdlog::level::from_str(cfg.log_level));
    if (g_jobs)
      cfg.jobs = std::min(cfg.jobs, *g_jobs);
    const auto result = run_pipeline(cfg, [](std::string_view msg) { spdlog::info("{}", msg); });
    std::cout << result.manifest.string() << '\n';
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbkit: probe, match and analyze scan blowback"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));
  app.add_option("--jobs", g_jobs, "Cap on worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g_log_level, "trace, debug, info, warn, error or off (overrides BBKIT_LOG)");

  probe_cmd probe;
  match_cmd match;
  classify_cmd classify;
  summarize_cmd summarize;
  stability_cmd stab;
  concentration_cmd conc;
  origins_cmd origins;
  loops_cmd loops;
  timing_cmd timing;
  attack_cmd attack;
  synth_cmd synth;
  run_cmd run;
  const std::vector<std::pair<CLI::App*, std::function<void()>>> commands{
    {probe.attach(app), [&] { probe.run(); }},
    {match.attach(app), [&] { match.run(); }},
    {classify.attach(app), [&] { classify.run(); }},
    {summarize.attach(app), [&] { summarize.run(); }},
    {stab.attach(app), [&] { stab.run(); }},
    {conc.attach(app), [&] { conc.run(); }},
    {origins.attach(app), [&] { origins.run(); }},
    {loops.attach(app), [&] { loops.run(); }},
    {timing.attach(app), [&] { timing.run(); }},
    {attack.attach(app), [&] { attack.run(); }},
    {synth.attach(app), [&] { synth.run(); }},
    {run.attach(app), [&] { run.run(); }},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_code::ok : exit_code::validation;
  }

  try {
    setup_logging(g_log_level);
    for (const auto& [sub, action] : commands)
      if (sub->parsed())
        action();
  } catch (const validation_error& e) {
    fatal(e.what());
    return exit_code::validation;
  } catch (const data_error& e) {
    fatal(e.what());
    return exit_code::data;
  } catch (const std::exception& e) {
    fatal(std::string("internal error: ") + e.what());
    return exit_code::internal;
  }
  return 0;
}
