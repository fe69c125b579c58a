#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "portsim/engine.hpp"
#include "portsim/fixtures.hpp"
#include "portsim/stats.hpp"

namespace portsim {

struct LaneOccupancySummary {
  std::size_t station = 0;
  std::vector<long long> counts;
  std::vector<double> shares;  // empty when nothing was served

  long long total() const {
    long long t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  bool empty() const { return shares.empty(); }
};

struct TripTimeSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

inline LaneOccupancySummary occupancy_from_counts(std::size_t station, std::vector<long long> counts) {
  LaneOccupancySummary s;
  s.station = station;
  s.counts = std::move(counts);
  const long long total = s.total();
  if (total > 0)
    for (auto c : s.counts) s.shares.push_back(static_cast<double>(c) / static_cast<double>(total));
  return s;
}

/// Vehicles served per lane at a station, counting services that begin at
/// or after the warm-up.
inline LaneOccupancySummary lane_occupancy(const RunResult& r, std::size_t station) {
  if (station >= r.station_ids.size()) throw std::out_of_range("lane_occupancy: unknown station");
  std::vector<long long> counts(r.lane_tallies[station].size(), 0);
  for (const auto& t : r.trips) {
    if (station >= t.visits.size()) continue;
    const auto& v = t.visits[station];
    if (v.lane > 0 && is_set(v.begin_s) && v.begin_s >= r.warmup_s) ++counts[static_cast<std::size_t>(v.lane - 1)];
  }
  return occupancy_from_counts(station, std::move(counts));
}

inline std::size_t station_index(const RunResult& r, std::string_view id) {
  for (std::size_t i = 0; i < r.station_ids.size(); ++i)
    if (r.station_ids[i] == id) return i;
  throw std::out_of_range("unknown station '" + std::string(id) + "'");
}

inline TripTimeSummary summarize(std::vector<double> xs) {
  TripTimeSummary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  s.mean = stats::mean(xs);
  s.sd = stats::stddev(xs);
  s.median = stats::quantile_sorted(xs, 0.5);
  s.q1 = stats::quantile_sorted(xs, 0.25);
  s.q3 = stats::quantile_sorted(xs, 0.75);
  s.min = xs.front();
  s.max = xs.back();
  return s;
}

struct TripSample {
  double from_s;
  double trip_s;
};

/// Trips between two points for vehicles passing both, with the first
/// passage at or after the warm-up.
inline std::vector<TripSample> trip_samples(const RunResult& r, const MeasurementPoint& from,
                                            const MeasurementPoint& to) {
  std::vector<TripSample> out;
  for (const auto& t : r.trips) {
    if (!t.admitted()) continue;
    const auto a = t.passage(from);
    const auto b = t.passage(to);
    if (!a || !b || *a < r.warmup_s) continue;
    out.push_back({*a, *b - *a});
  }
  return out;
}

inline std::vector<double> trip_times(const RunResult& r, const MeasurementPoint& from, const MeasurementPoint& to) {
  std::vector<double> out;
  for (const auto& s : trip_samples(r, from, to)) out.push_back(s.trip_s);
  return out;
}

inline TripTimeSummary trip_time_stats(const RunResult& r, const MeasurementPoint& from, const MeasurementPoint& to) {
  return summarize(trip_times(r, from, to));
}

/// L1 distance between share vectors, in percentage points.
inline double occupancy_error(std::span<const double> sim, std::span<const double> observed) {
  if (sim.size() != observed.size()) throw std::invalid_argument("occupancy_error: share vectors differ in length");
  double e = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) e += std::abs(sim[i] - observed[i]);
  return e * 100.0;
}

// ---------------------------------------------------------------------------
// Seed sensitivity

struct SpreadReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_trip_means;
  std::vector<double> per_seed_mean_queue_m;
  double max_queue_difference_m = 0.0;  // max over aligned samples and seed pairs
  double max_mean_ratio = 1.0;          // largest / smallest per-seed mean trip time
  double max_windowed_ratio = 1.0;      // same ratio, per departure window
  double trip_mean_cv = 0.0;            // coefficient of variation of per-seed means
};

/// Total queue at a station (every lane plus the upstream queue), per sample.
inline std::vector<double> station_queue_series(const RunResult& r, std::size_t station) {
  std::vector<double> total(r.series_length(), 0.0);
  for (const auto& q : r.queue_series) {
    if (q.station != station) continue;
    for (std::size_t i = 0; i < q.meters.size() && i < total.size(); ++i) total[i] += q.meters[i];
  }
  return total;
}

inline SpreadReport seed_spread(std::span<const RunResult> reps, std::size_t station, const MeasurementPoint& from,
                                const MeasurementPoint& to, double window_s = 600.0) {
  if (reps.size() < 2) throw std::invalid_argument("seed_spread: at least two replications are required");
  SpreadReport rep;
  std::vector<std::vector<double>> queues;
  std::vector<std::map<long long, std::pair<double, long long>>> windows(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    rep.seeds.push_back(reps[i].seed);
    const auto samples = trip_samples(reps[i], from, to);
    std::vector<double> trips;
    for (const auto& s : samples) {
      trips.push_back(s.trip_s);
      auto& w = windows[i][static_cast<long long>(std::floor(s.from_s / window_s))];
      w.first += s.trip_s;
      ++w.second;
    }
    rep.per_seed_trip_means.push_back(stats::mean(trips));
    queues.push_back(station_queue_series(reps[i], station));
    rep.per_seed_mean_queue_m.push_back(stats::mean(queues.back()));
  }

  for (std::size_t a = 0; a < queues.size(); ++a) {
    for (std::size_t b = a + 1; b < queues.size(); ++b) {
      const std::size_t n = std::max(queues[a].size(), queues[b].size());
      for (std::size_t k = 0; k < n; ++k) {
        const double qa = k < queues[a].size() ? queues[a][k] : 0.0;
        const double qb = k < queues[b].size() ? queues[b][k] : 0.0;
        rep.max_queue_difference_m = std::max(rep.max_queue_difference_m, std::abs(qa - qb));
      }
    }
  }

  const auto [lo, hi] = std::minmax_element(rep.per_seed_trip_means.begin(), rep.per_seed_trip_means.end());
  if (*lo > 0.0) rep.max_mean_ratio = *hi / *lo;
  rep.trip_mean_cv = stats::coefficient_of_variation(rep.per_seed_trip_means);

  std::map<long long, std::vector<double>> by_window;
  for (const auto& w : windows)
    for (const auto& [k, acc] : w) by_window[k].push_back(acc.first / static_cast<double>(acc.second));
  for (const auto& [k, means] : by_window) {
    if (means.size() != reps.size()) continue;
    const auto [wl, wh] = std::minmax_element(means.begin(), means.end());
    if (*wl > 0.0) rep.max_windowed_ratio = std::max(rep.max_windowed_ratio, *wh / *wl);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Policy comparison

enum class ComparisonMetric { LaneOccupancy, TripTime };

inline std::string_view to_string(ComparisonMetric m) {
  return m == ComparisonMetric::LaneOccupancy ? "lane-occupancy" : "trip-time";
}

struct ComparisonCell {
  PolicyName policy = PolicyName::ProbAverage;
  double rate = 0.0;
  FlowBandLabel band = FlowBandLabel::All;
  std::vector<double> reference_shares;
  std::vector<double> mean_shares;   // averaged over seeds
  std::vector<double> sd_shares;
  std::vector<double> occ_errors_pp;  // one per seed
  double occ_error_pp = 0.0;          // mean over seeds
  double occ_error_sd = 0.0;
  std::vector<double> per_seed_trip_means;
  double trip_mean_s = 0.0;  // mean of per-seed means
  double trip_sd_s = 0.0;    // pooled over every trip of every seed
  double trip_q1_s = 0.0;
  double trip_median_s = 0.0;
  double trip_q3_s = 0.0;
  double trip_cv_across_seeds = 0.0;
  double reference_trip_s = 0.0;
  double trip_error_pct = 0.0;  // |sim - reference| / reference * 100
  std::size_t served = 0;       // weighbridge services counted, all seeds
  bool conservation_ok = true;
};

struct ScorecardEntry {
  ComparisonMetric metric = ComparisonMetric::LaneOccupancy;
  PolicyName policy = PolicyName::ProbAverage;
  FlowBandLabel band = FlowBandLabel::All;
  double error = 0.0;
  bool worst = false;
};

struct ComparisonReport {
  std::vector<ComparisonCell> cells;
  std::vector<ScorecardEntry> scorecard;

  const ComparisonCell& cell(PolicyName p, double rate) const {
    for (const auto& c : cells)
      if (c.policy == p && c.rate == rate) return c;
    throw std::out_of_range("comparison: no such cell");
  }

  const ScorecardEntry& worst(ComparisonMetric m) const {
    for (const auto& e : scorecard)
      if (e.metric == m && e.worst) return e;
    throw std::out_of_range("comparison: empty scorecard");
  }

  double band_error(ComparisonMetric m, PolicyName p, FlowBandLabel b) const {
    for (const auto& e : scorecard)
      if (e.metric == m && e.policy == p && e.band == b) return e.error;
    throw std::out_of_range("comparison: no such scorecard entry");
  }
};

inline double reference_trip_for(const ExperimentConfig& e, double rate) {
  const auto it = e.reference_trip_mean_s.find(rate);
  if (it == e.reference_trip_mean_s.end())
    throw std::invalid_argument("no reference trip time for rate " + std::to_string(rate));
  return it->second;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

/// Summarise one replication set into a grid cell.
inline ComparisonCell evaluate_cell(const ScenarioConfig& scenario, const NetworkTopology& topo, PolicyName policy,
                                    double rate, std::span<const RunResult> reps) {
  const auto& e = *scenario.experiment;
  const std::size_t station = *topo.routed_station;
  const auto from = *topo.resolve_point(e.trip_from);
  const auto to = *topo.resolve_point(e.trip_to);
  const auto& bands = e.observed_by_band.bands.empty() ? scenario.routing->flow_specific.bands
                                                       : e.observed_by_band.bands;

  ComparisonCell c;
  c.policy = policy;
  c.rate = rate;
  c.band = flow_band(rate, bands).label;
  c.reference_shares = e.observed_by_band.bands.empty() ? e.observed_average
                                                        : occupancy_lookup(e.observed_by_band, rate);
  const std::size_t lanes = c.reference_shares.size();
  std::vector<std::vector<double>> shares_by_lane(lanes);
  std::vector<double> pooled;
  for (const auto& r : reps) {
    const auto occ = lane_occupancy(r, station);
    c.served += static_cast<std::size_t>(occ.total());
    if (!occ.empty()) {
      c.occ_errors_pp.push_back(occupancy_error(occ.shares, c.reference_shares));
      for (std::size_t l = 0; l < lanes; ++l) shares_by_lane[l].push_back(occ.shares[l]);
    }
    auto trips = trip_times(r, from, to);
    c.per_seed_trip_means.push_back(stats::mean(trips));
    pooled.insert(pooled.end(), trips.begin(), trips.end());
    if (r.scheduled != r.admitted + r.stacked_at_end || r.admitted != r.exited + r.in_system_at_end)
      c.conservation_ok = false;
  }
  for (std::size_t l = 0; l < lanes; ++l) {
    c.mean_shares.push_back(stats::mean(shares_by_lane[l]));
    c.sd_shares.push_back(stats::stddev(shares_by_lane[l]));
  }
  c.occ_error_pp = stats::mean(c.occ_errors_pp);
  c.occ_error_sd = stats::stddev(c.occ_errors_pp);
  c.trip_mean_s = stats::mean(c.per_seed_trip_means);
  c.trip_cv_across_seeds = stats::coefficient_of_variation(c.per_seed_trip_means);
  const auto pooled_summary = summarize(pooled);
  c.trip_sd_s = pooled_summary.sd;
  c.trip_q1_s = pooled_summary.q1;
  c.trip_median_s = pooled_summary.median;
  c.trip_q3_s = pooled_summary.q3;
  c.reference_trip_s = reference_trip_for(e, rate);
  c.trip_error_pct = std::abs(c.trip_mean_s - c.reference_trip_s) / c.reference_trip_s * 100.0;
  return c;
}

/// Band-level errors (cells averaged within each band) and the worst cell
/// per metric.
inline std::vector<ScorecardEntry> build_scorecard(const std::vector<ComparisonCell>& cells) {
  std::map<std::pair<PolicyName, FlowBandLabel>, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& c : cells) {
    auto& a = acc[{c.policy, c.band}];
    a.first.push_back(c.occ_error_pp);
    a.second.push_back(c.trip_error_pct);
  }
  std::vector<ScorecardEntry> out;
  for (const auto metric : {ComparisonMetric::LaneOccupancy, ComparisonMetric::TripTime}) {
    const std::size_t first = out.size();
    for (const auto& [key, errs] : acc) {
      const auto& v = metric == ComparisonMetric::LaneOccupancy ? errs.first : errs.second;
      out.push_back({metric, key.first, key.second, stats::mean(v), false});
    }
    if (out.size() > first) {
      auto worst = std::max_element(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                                    [](const ScorecardEntry& a, const ScorecardEntry& b) { return a.error < b.error; });
      worst->worst = true;
    }
  }
  return out;
}

/// Full policy x rate grid, each cell replicated over `seeds`.
inline ComparisonReport policy_comparison(const ScenarioConfig& scenario, std::span<const PolicyName> policies,
                                          std::span<const double> rates, std::span<const std::uint64_t> seeds,
                                          const RunOptions& options = {}, unsigned threads = 1) {
  if (!scenario.experiment || !scenario.routing)
    throw std::invalid_argument("policy_comparison needs routing and experiment sections");
  const NetworkTopology topo = build_topology(scenario);
  ComparisonReport report;
  for (const double rate : rates) {
    const ScenarioConfig cfg = with_flow_rate(scenario, rate);
    for (const auto p : policies) {
      const auto policy = make_policy(*scenario.routing, p);
      const auto reps = replicate(cfg, policy, seeds, options, threads);
      report.cells.push_back(evaluate_cell(scenario, topo, p, rate, reps));
    }
  }
  report.scorecard = build_scorecard(report.cells);
  return report;
}

}  // namespace portsim
