#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "portsim/portsim.hpp"
#include "support.hpp"

using namespace portsim;
using namespace portsim::testing;

namespace {

// Pinned tolerances and thresholds.
constexpr double kSigmas = 3.0;
constexpr long long kMinServices = 50000;
constexpr double kOccupancyRuntimeS = 30.0;
constexpr double kAgentLowFlowShare = 0.95;
constexpr double kAgentHighFlowShare = 0.02;
constexpr double kCvRatio = 2.0;
constexpr double kMeanRatio = 1.5;
constexpr double kQueueingTolerance = 0.05;
constexpr double kQueueingRuntimeS = 60.0;
constexpr double kQueueingHours = 250.0;
constexpr double kQueueingWarmupS = 3600.0;
constexpr double kKsAlpha = 0.01;
constexpr std::size_t kKsBins = 10000;
constexpr std::size_t kDetectionN = 10000;
constexpr double kP1 = 0.663;
constexpr double kP2 = 0.104;
constexpr double kValidationTolerance = 0.10;
constexpr std::size_t kSeeds = 21;

int failures = 0;
bool books_closed = true;
std::size_t runs_checked = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void audit(const RunResult& r) {
  ++runs_checked;
  if (r.scheduled != r.admitted + r.stacked_at_end || r.admitted != r.exited + r.in_system_at_end) books_closed = false;
}

void audit(std::span<const RunResult> rs) {
  for (const auto& r : rs) audit(r);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

const ScenarioConfig kDover = default_dover_scenario();
const NetworkTopology kTopo = build_topology(kDover);
const std::size_t kWeighbridge = *kTopo.routed_station;

std::vector<RunResult> replicate_at(PolicyName p, double rate) {
  auto reps = replicate(with_flow_rate(kDover, rate), make_policy(*kDover.routing, p), seed_range(1, kSeeds));
  audit(reps);
  return reps;
}

std::vector<double> mean_shares(std::span<const RunResult> reps) {
  std::vector<double> mean(5, 0.0);
  for (const auto& r : reps) {
    const auto occ = lane_occupancy(r, kWeighbridge);
    for (std::size_t l = 0; l < mean.size() && !occ.empty(); ++l) mean[l] += occ.shares[l] / static_cast<double>(reps.size());
  }
  return mean;
}

void occupancy_exactness() {
  auto cfg = kDover;
  cfg.experiment->profile_duration_s = 172.0 * 3600.0;
  cfg = with_flow_rate(cfg, 300.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(cfg, make_policy(*cfg.routing, PolicyName::ProbAverage), 1);
  const double elapsed = seconds_since(t0);
  audit(r);
  const auto occ = lane_occupancy(r, kWeighbridge);
  const auto& target = kDover.routing->average_shares;
  const double n = static_cast<double>(occ.total());
  bool ok = occ.total() >= kMinServices && elapsed < kOccupancyRuntimeS;
  double worst_z = 0.0;
  for (std::size_t l = 0; l < target.size(); ++l) {
    const double z = std::abs(occ.shares[l] - target[l]) / std::sqrt(target[l] * (1 - target[l]) / n);
    worst_z = std::max(worst_z, z);
  }
  ok = ok && worst_z <= kSigmas;
  report(1, "probabilistic occupancy exactness", ok,
         fmt("n=%.0f services, worst |z|=%.2f (limit 3), %.1f s (limit 30 s)", n, worst_z, elapsed));
}

void agent_concentration() {
  const auto low = mean_shares(replicate_at(PolicyName::Agent, 60.0));
  const auto high = mean_shares(replicate_at(PolicyName::Agent, 800.0));
  const double low12 = low[0] + low[1];
  const double high_min = *std::min_element(high.begin(), high.end());
  report(2, "agent low-flow concentration", low12 >= kAgentLowFlowShare && high_min >= kAgentHighFlowShare,
         fmt("lanes 1+2 at 60 veh/h %.3f (>= 0.95), min lane share at 800 veh/h %.3f (>= 0.02)", low12, high_min));
}

ComparisonReport full_grid() {
  const std::vector<PolicyName> policies{PolicyName::ProbAverage, PolicyName::ProbFlowSpecific, PolicyName::Agent};
  const auto& rates = kDover.experiment->flow_rates;
  ComparisonReport rep;
  const auto seeds = seed_range(1, kSeeds);
  for (double rate : rates) {
    const auto cfg = with_flow_rate(kDover, rate);
    for (auto p : policies) {
      const auto reps = replicate(cfg, make_policy(*kDover.routing, p), seeds);
      audit(reps);
      rep.cells.push_back(evaluate_cell(kDover, kTopo, p, rate, reps));
    }
  }
  rep.scorecard = build_scorecard(rep.cells);
  return rep;
}

void worst_cells(const ComparisonReport& rep) {
  const auto& occ = rep.worst(ComparisonMetric::LaneOccupancy);
  const auto& trip = rep.worst(ComparisonMetric::TripTime);
  const bool ok = occ.policy == PolicyName::Agent && occ.band == FlowBandLabel::Low &&
                  trip.policy == PolicyName::ProbAverage && trip.band == FlowBandLabel::VeryHigh;
  report(3, "worst-cell reproduction", ok,
         "occupancy worst " + std::string(to_string(occ.policy)) + "/" + std::string(to_string(occ.band)) + " (" +
             fmt("%.1f", occ.error) + " pp), trip worst " + std::string(to_string(trip.policy)) + "/" +
             std::string(to_string(trip.band)) + " (" + fmt("%.1f", trip.error) + " %)");
}

void flow_specific_ordering(const ComparisonReport& rep) {
  const double flow = rep.cell(PolicyName::ProbFlowSpecific, 800).occ_error_pp;
  const double avg = rep.cell(PolicyName::ProbAverage, 800).occ_error_pp;
  const double agent_high = rep.cell(PolicyName::Agent, 800).occ_error_pp;
  double agent_low = 0.0;
  for (double r : {30.0, 60.0, 90.0}) agent_low += rep.cell(PolicyName::Agent, r).occ_error_pp / 3.0;
  report(4, "occupancy-error ordering", flow <= avg && agent_high < agent_low,
         fmt("800 veh/h: prob-flow %.1f <= prob-avg %.1f; agent 800 %.1f < agent 30-90 %.1f", flow, avg, agent_high,
             agent_low));
}

void brittleness(const ComparisonReport& rep) {
  const auto& pa = rep.cell(PolicyName::ProbAverage, 800);
  const auto& ag = rep.cell(PolicyName::Agent, 800);
  const double cv_ratio = pa.trip_cv_across_seeds / ag.trip_cv_across_seeds;
  const double mean_ratio = pa.trip_mean_s / ag.trip_mean_s;
  report(5, "brittleness ordering", cv_ratio >= kCvRatio && mean_ratio >= kMeanRatio,
         fmt("CV ratio %.2f (>= 2), mean ratio %.2f (>= 1.5); prob-avg %.1f s, agent %.1f s", cv_ratio, mean_ratio,
             pa.trip_mean_s, ag.trip_mean_s));
}

void queueing_oracles() {
  bool ok = true;
  std::string detail;
  for (double rho : {0.5, 0.8}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = erlang_scenario(rho, kQueueingHours);
    const auto r = run(cfg, AgentRouting{}, 21);
    const double elapsed = seconds_since(t0);
    audit(r);
    const auto s = station_flow_stats(r, 0, kQueueingWarmupS, cfg.horizon_s);
    const double wait_ratio = s.mean_wait / mmc_wait(5, rho * 5 / 20.0, 20.0);
    const double little_ratio = s.time_avg_number / (s.lambda * s.mean_sojourn);
    ok = ok && std::abs(wait_ratio - 1) <= kQueueingTolerance && std::abs(little_ratio - 1) <= kQueueingTolerance &&
         elapsed < kQueueingRuntimeS;
    detail += fmt("rho %.1f: Wq/ErlangC %.3f, L/(lambda W) %.3f, %.1f s; ", rho, wait_ratio, little_ratio, elapsed);
  }
  report(6, "queueing oracles", ok, detail + "tolerance 5%");
}

void arrival_law() {
  DemandBins bins;
  bins.bin_width_s = 120.0;
  bins.counts[VehicleClassId::RHV] = std::vector<long long>(kKsBins, 1);
  RandomStream rng(2009, StreamId::Arrivals);
  const auto s = arrivals_from_bins(bins, rng);
  std::vector<double> u;
  std::vector<long long> seen(kKsBins, 0);
  for (const auto& e : s.entries) {
    const auto b = static_cast<std::size_t>(e.timestamp_s / bins.bin_width_s);
    if (b < kKsBins) ++seen[b];
    u.push_back(e.timestamp_s / bins.bin_width_s - static_cast<double>(b));
  }
  const auto ks = stats::ks_uniform(u);
  const bool exact = seen == bins.counts[VehicleClassId::RHV];
  report(7, "arrival generator law", exact && ks.p_value > kKsAlpha,
         fmt("KS D=%.4f p=%.3f (alpha 0.01), counts exact: ", ks.statistic, ks.p_value) + (exact ? "yes" : "no"));
}

void determinism() {
  const auto cfg = with_flow_rate(kDover, 600.0);
  const auto policy = make_policy(*cfg.routing, PolicyName::ProbAverage);
  const auto a = run(cfg, policy, 7), b = run(cfg, policy, 7), c = run(cfg, policy, 8);
  audit(a);
  audit(b);
  audit(c);
  const bool same = io::trips_to_csv(a) == io::trips_to_csv(b) && io::queue_series_to_csv(a) == io::queue_series_to_csv(b);
  const bool differ = io::trips_to_csv(a) != io::trips_to_csv(c) && io::queue_series_to_csv(a) != io::queue_series_to_csv(c);
  report(8, "determinism", same && differ,
         std::string("seed 7 twice byte-identical: ") + (same ? "yes" : "no") + ", seed 8 differs: " + (differ ? "yes" : "no"));
}

void detection_pipeline() {
  RunResult r;
  for (std::size_t v = 0; v < kDetectionN; ++v) {
    TripRecord t;
    t.vehicle_id = v;
    t.admit_s = static_cast<double>(v) * 3.0;
    t.exit_s = t.admit_s + 200.0 + static_cast<double>((v * 37) % 400);
    r.trips.push_back(t);
  }
  const MeasurementPoint entry{MeasurementPoint::Kind::NetworkEntry, 0};
  const MeasurementPoint exit{MeasurementPoint::Kind::NetworkExit, 0};
  const DeviceAssignment devices{std::vector<int>(kDetectionN, 1)};
  RandomStream rng(1, StreamId::Detection);
  const auto l1 = simulate_detections(r, entry, DetectorSite{"site1", "network.entry", kP1}, devices, rng);
  const auto l2 = simulate_detections(r, exit, DetectorSite{"site2", "network.exit", kP2}, devices, rng);
  const auto m = match_trips(l1, l2, 3600.0);
  const double n = static_cast<double>(kDetectionN);
  auto within = [&](double x, double p) { return std::abs(x - n * p) <= kSigmas * binomial_sigma(n, p); };
  bool exact = true;
  for (const auto& t : m) exact = exact && t.trip_s() == r.trips[t.vehicle_id].exit_s - r.trips[t.vehicle_id].admit_s;
  const bool ok = within(double(l1.size()), kP1) && within(double(l2.size()), kP2) &&
                  within(double(m.size()), kP1 * kP2) && exact;
  report(9, "detection pipeline", ok,
         fmt("|log1|=%.0f (exp %.0f), |log2|=%.0f (exp %.0f), ", double(l1.size()), n * kP1, double(l2.size()), n * kP2) +
             fmt("matches=%.0f (exp %.1f), trip times exact: ", double(m.size()), n * kP1 * kP2) + (exact ? "yes" : "no"));
}

void validation_fixture() {
  const auto cfg = default_validation_scenario();
  const auto rep = validate(cfg, make_policy(*cfg.routing, PolicyName::Agent), 1);
  audit(rep.run);
  const auto& s = rep.comparison.row(kSimulationSource).summary;
  const auto& ref = *cfg.detection->reference_simulation;
  auto close = [](double x, double r) { return std::abs(x - r) <= kValidationTolerance * r; };
  const auto& ks = rep.comparison.pair(kSimulationSource, kCameraSource);
  const bool ok = close(s.mean, ref.mean_s) && close(s.median, ref.median_s) && close(s.sd, ref.sd_s) && !ks.rejected;
  report(10, "validation fixture regression", ok,
         fmt("mean %.1f, median %.1f, sd %.1f (within 10%% of 319/291/110); ", s.mean, s.median, s.sd) +
             fmt("sim vs camera KS p=%.3f", ks.ks.p_value));
}

}  // namespace

int main() {
  occupancy_exactness();
  agent_concentration();
  const auto grid = full_grid();
  worst_cells(grid);
  flow_specific_ordering(grid);
  brittleness(grid);
  queueing_oracles();
  arrival_law();
  determinism();
  detection_pipeline();
  validation_fixture();
  for (const auto& c : grid.cells) books_closed = books_closed && c.conservation_ok;
  report(11, "conservation", books_closed, fmt("%.0f runs audited", double(runs_checked)));
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
