// portsim command-line driver.
//
//   portsim run       --scenario S --policy P --seed N --out DIR
//   portsim replicate --scenario S --policy P --seeds N [--seed BASE | --seed-list a,b,c] --out DIR
//   portsim compare   --scenario S [--policies a,b] [--rates r1,r2] [--seeds 21] --out DIR
//   portsim validate  --scenario S --policy P --seed N [--dedupe-window W] --out DIR
//   portsim fixture   --name dover|validation --out FILE
//
// Exit status: 0 success, 2 configuration error, 1 internal error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "portsim/portsim.hpp"

namespace fs = std::filesystem;
using namespace portsim;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario;
  std::string policy = "agent";
  std::uint64_t seed = 1;
  std::string out = "out";
  std::optional<double> warmup;
  bool no_drain = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_policy = true) {
  cmd->add_option("--scenario", c.scenario, "Scenario file (YAML or JSON)")->required();
  if (with_policy) cmd->add_option("--policy", c.policy, "prob-avg | prob-flow | agent");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--warmup", c.warmup, "Warm-up seconds (overrides the scenario)");
  cmd->add_flag("--no-drain", c.no_drain, "Stop at the horizon instead of draining");
}

PolicyName policy_from(const std::string& s) {
  const auto p = parse_policy_name(s);
  if (!p) throw ConfigError("unknown policy '" + s + "' (expected prob-avg, prob-flow or agent)");
  return *p;
}

PolicyKind policy_for(const ScenarioConfig& cfg, PolicyName name) {
  if (!cfg.routing) {
    if (name != PolicyName::Agent) throw ConfigError("scenario has no routing section for probabilistic policies");
    return AgentRouting{};
  }
  return make_policy(*cfg.routing, name);
}

RunOptions options_from(const Common& c) {
  if (c.warmup && *c.warmup < 0.0) throw ConfigError("--warmup must be non-negative");
  RunOptions o;
  o.warmup_s = c.warmup;
  if (c.no_drain) o.drain = false;
  return o;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

void write(const fs::path& dir, const std::string& name, const std::string& content) {
  csv::write_file((dir / name).string(), content);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(csv::to_number<T>(item));
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " '" + item + "'");
    }
  }
  return out;
}

// -- subcommands --------------------------------------------------------------

int cmd_run(const Common& c) {
  const auto cfg = load_scenario_file(c.scenario);
  const auto name = policy_from(c.policy);
  const auto opts = options_from(c);
  const auto dir = prepare_out(c.out);
  const auto r = run(cfg, policy_for(cfg, name), c.seed, opts);
  write(dir, "trips.csv", io::trips_to_csv(r));
  write(dir, "queues.csv", io::queue_series_to_csv(r));
  write(dir, "lane_tallies.csv", io::lane_tallies_to_csv(r));
  write(dir, "manifest.yaml", io::run_manifest(r, cfg.name, opts.drain.value_or(cfg.drain)));
  std::cout << "run: " << r.exited << " of " << r.scheduled << " vehicles exited, end " << csv::num(r.end_time_s)
            << " s -> " << dir.string() << "\n";
  return 0;
}

struct ReplicateArgs {
  std::size_t count = 21;
  std::string seed_list;
  unsigned threads = 1;
  std::string station;
  std::string from;
  std::string to;
};

std::vector<std::uint64_t> seeds_from(const Common& c, std::size_t count, const std::string& list) {
  if (!list.empty()) {
    auto s = parse_list<std::uint64_t>(list, "seed");
    if (s.empty()) throw ConfigError("--seed-list is empty");
    return s;
  }
  if (count < 1) throw ConfigError("--seeds must be at least 1");
  return seed_range(c.seed, count);
}

int cmd_replicate(const Common& c, const ReplicateArgs& a) {
  const auto cfg = load_scenario_file(c.scenario);
  const auto name = policy_from(c.policy);
  const auto opts = options_from(c);
  const auto seeds = seeds_from(c, a.count, a.seed_list);
  const auto topo = build_topology(cfg);

  std::string station = a.station;
  if (station.empty()) station = cfg.routing ? cfg.routing->station : topo.stations.front().id;
  const auto st = topo.station_index(station);
  if (!st) throw ConfigError("unknown station '" + station + "'");
  const std::string from_name = !a.from.empty() ? a.from : cfg.experiment ? cfg.experiment->trip_from : "network.entry";
  const std::string to_name = !a.to.empty() ? a.to : cfg.experiment ? cfg.experiment->trip_to : "network.exit";
  const auto from = topo.resolve_point(from_name);
  const auto to = topo.resolve_point(to_name);
  if (!from || !to) throw ConfigError("unknown measurement point");

  const auto dir = prepare_out(c.out);
  const auto reps = replicate(cfg, policy_for(cfg, name), seeds, opts, std::max(1u, a.threads));
  const auto hash = scenario_hash(cfg);
  std::string manifest = "scenario: " + cfg.name + "\nscenario_hash: " + hash + "\npolicy: " +
                         std::string(to_string(name)) + "\nseeds: [" + io::seeds_text(seeds) +
                         "]\nstation: " + station + "\ntrip_from: " + from_name + "\ntrip_to: " + to_name + "\n";
  if (reps.size() >= 2) {
    const auto spread = seed_spread(reps, *st, *from, *to);
    write(dir, "spread.csv", io::spread_to_csv(spread, hash, name));
    manifest += io::spread_summary(spread);
  }
  for (const auto& r : reps) {
    write(dir, "trips_seed" + std::to_string(r.seed) + ".csv", io::trips_to_csv(r));
    write(dir, "queues_seed" + std::to_string(r.seed) + ".csv", io::queue_series_to_csv(r));
  }
  write(dir, "manifest.yaml", manifest);
  std::cout << "replicate: " << reps.size() << " runs -> " << dir.string() << "\n";
  return 0;
}

struct CompareArgs {
  std::string policies = "prob-avg,prob-flow,agent";
  std::string rates;
  std::size_t count = 21;
  std::string seed_list;
  unsigned threads = 1;
};

int cmd_compare(const Common& c, const CompareArgs& a) {
  const auto cfg = load_scenario_file(c.scenario);
  if (!cfg.experiment || !cfg.routing) throw ConfigError("compare needs routing and experiment sections");
  std::vector<PolicyName> policies;
  std::stringstream ss(a.policies);
  for (std::string p; std::getline(ss, p, ',');)
    if (!p.empty()) policies.push_back(policy_from(p));
  if (policies.empty()) throw ConfigError("--policies is empty");
  auto rates = a.rates.empty() ? cfg.experiment->flow_rates : parse_list<double>(a.rates, "rate");
  for (double r : rates)
    if (!cfg.experiment->reference_trip_mean_s.count(r))
      throw ConfigError("rate " + csv::num(r) + " has no reference trip time in the scenario");
  const auto seeds = seeds_from(c, a.count, a.seed_list);
  const auto opts = options_from(c);
  const auto dir = prepare_out(c.out);

  const auto report = policy_comparison(cfg, policies, rates, seeds, opts, std::max(1u, a.threads));
  std::string names;
  for (auto p : policies) names += (names.empty() ? "" : "+") + std::string(to_string(p));
  const std::string header = io::provenance(scenario_hash(cfg), names, io::seeds_text(seeds));
  write(dir, "comparison.csv", io::comparison_to_csv(report, header));
  write(dir, "lane_shares.csv", io::lane_shares_to_csv(report, header));
  write(dir, "occupancy_error.csv", io::occupancy_errors_to_csv(report, header));
  write(dir, "trip_times.csv", io::trip_times_to_csv(report, header));
  write(dir, "scorecard.csv", io::scorecard_to_csv(report, header));
  std::string manifest = "scenario: " + cfg.name + "\nscenario_hash: " + scenario_hash(cfg) + "\npolicies: [" +
                         names + "]\nseeds: [" + io::seeds_text(seeds) + "]\n";
  for (const auto m : {ComparisonMetric::LaneOccupancy, ComparisonMetric::TripTime}) {
    const auto& w = report.worst(m);
    manifest += "worst_" + std::string(to_string(m)) + ": " + std::string(to_string(w.policy)) + "/" +
                std::string(to_string(w.band)) + "\n";
  }
  write(dir, "manifest.yaml", manifest);
  std::cout << manifest;
  return 0;
}

struct ValidateArgs {
  std::optional<double> dedupe_window;
  double bin = 60.0;
};

int cmd_validate(const Common& c, const ValidateArgs& a) {
  const auto cfg = load_scenario_file(c.scenario);
  if (!cfg.detection || cfg.detection->sites.size() != 2) throw ConfigError("validate needs two detector sites");
  if (a.dedupe_window && *a.dedupe_window < 0.0) throw ConfigError("--dedupe-window must be non-negative");
  if (!(a.bin > 0.0)) throw ConfigError("--bin must be positive");
  const auto name = policy_from(c.policy);
  const auto opts = options_from(c);
  const auto dir = prepare_out(c.out);
  const auto rep = validate(cfg, policy_for(cfg, name), c.seed, opts, a.dedupe_window);
  const auto head = io::provenance(rep.run);

  write(dir, "summary.csv", head + summary_to_csv(rep.comparison));
  write(dir, "ks.csv", head + ks_to_csv(rep.comparison));
  write(dir, "site1_log.csv", head + log_to_csv(rep.log1));
  write(dir, "site2_log.csv", head + log_to_csv(rep.log2));
  write(dir, "matches.csv", head + matches_to_csv(rep.bluetooth));
  write(dir, "camera.csv", head + matches_to_csv(rep.camera));
  write(dir, "pdf_simulation.csv", head + pdf_to_csv(trip_pdf(rep.simulation, a.bin)));
  write(dir, "pdf_bluetooth.csv", head + pdf_to_csv(trip_pdf(rep.bluetooth, a.bin)));
  write(dir, "pdf_camera.csv", head + pdf_to_csv(trip_pdf(rep.camera, a.bin)));
  std::string manifest = io::run_manifest(rep.run, cfg.name, opts.drain.value_or(cfg.drain));
  manifest += "site1_detections: " + std::to_string(rep.raw1.size()) + "\n";
  manifest += "site2_detections: " + std::to_string(rep.raw2.size()) + "\n";
  manifest += "matches: " + std::to_string(rep.bluetooth.size()) + "\n";
  write(dir, "manifest.yaml", manifest);

  std::cout << "source      n     mean   median       sd      max\n";
  for (const auto& r : rep.comparison.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %4zu %8.1f %8.1f %8.1f %8.1f\n", r.name.c_str(), r.summary.n,
                  r.summary.mean, r.summary.median, r.summary.sd, r.summary.max);
    std::cout << line;
  }
  for (const auto& p : rep.comparison.pairs)
    std::cout << p.a << " vs " << p.b << ": KS D=" << csv::num(p.ks.statistic) << " p=" << csv::num(p.ks.p_value)
              << (p.rejected ? " (rejected)" : "") << "\n";
  return 0;
}

int cmd_fixture(const std::string& name, const std::string& out) {
  ScenarioConfig cfg;
  if (name == "dover")
    cfg = default_dover_scenario();
  else if (name == "validation")
    cfg = default_validation_scenario();
  else
    throw ConfigError("unknown fixture '" + name + "'");
  const auto text = serialize_scenario(cfg);
  if (out.empty() || out == "-")
    std::cout << text;
  else
    csv::write_file(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"portsim: port-entry corridor simulation"};
  app.require_subcommand(1);

  Common run_c, rep_c, cmp_c, val_c;
  ReplicateArgs rep_a;
  CompareArgs cmp_a;
  ValidateArgs val_a;
  std::string fixture_name = "dover", fixture_out;

  auto* run_cmd = app.add_subcommand("run", "Single run: trips, queue series and manifest");
  add_common(run_cmd, run_c);
  run_cmd->add_option("--seed", run_c.seed, "Master seed");

  auto* rep_cmd = app.add_subcommand("replicate", "Runs over several seeds with a spread report");
  add_common(rep_cmd, rep_c);
  rep_cmd->add_option("--seed", rep_c.seed, "First seed");
  rep_cmd->add_option("--seeds", rep_a.count, "Number of seeds");
  rep_cmd->add_option("--seed-list", rep_a.seed_list, "Explicit comma-separated seeds");
  rep_cmd->add_option("--threads", rep_a.threads, "Concurrent runs");
  rep_cmd->add_option("--station", rep_a.station, "Station for queue spread (default: routed station)");
  rep_cmd->add_option("--from", rep_a.from, "Trip start point");
  rep_cmd->add_option("--to", rep_a.to, "Trip end point");

  auto* cmp_cmd = app.add_subcommand("compare", "Policy x flow-rate comparison grid");
  add_common(cmp_cmd, cmp_c, false);
  cmp_cmd->add_option("--policies", cmp_a.policies, "Comma-separated policies");
  cmp_cmd->add_option("--rates", cmp_a.rates, "Comma-separated flow rates (veh/h)");
  cmp_cmd->add_option("--seed", cmp_c.seed, "First seed");
  cmp_cmd->add_option("--seeds", cmp_a.count, "Replications per cell");
  cmp_cmd->add_option("--seed-list", cmp_a.seed_list, "Explicit comma-separated seeds");
  cmp_cmd->add_option("--threads", cmp_a.threads, "Concurrent runs");

  auto* val_cmd = app.add_subcommand("validate", "Detector-based trip-time validation");
  add_common(val_cmd, val_c);
  val_cmd->add_option("--seed", val_c.seed, "Master seed");
  val_cmd->add_option("--dedupe-window", val_a.dedupe_window, "Seconds; 0 disables deduplication");
  val_cmd->add_option("--bin", val_a.bin, "PDF bin width in seconds");

  auto* fix_cmd = app.add_subcommand("fixture", "Print a bundled scenario");
  fix_cmd->add_option("--name", fixture_name, "dover | validation");
  fix_cmd->add_option("--out", fixture_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run_cmd) return cmd_run(run_c);
    if (*rep_cmd) return cmd_replicate(rep_c, rep_a);
    if (*cmp_cmd) return cmd_compare(cmp_c, cmp_a);
    if (*val_cmd) return cmd_validate(val_c, val_a);
    if (*fix_cmd) return cmd_fixture(fixture_name, fixture_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
