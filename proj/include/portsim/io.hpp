#pragma once

#include <span>
#include <string>
#include <vector>

#include "portsim/csv.hpp"
#include "portsim/engine.hpp"
#include "portsim/metrics.hpp"

// Artifact writers. Every CSV starts with a `#` provenance line carrying the
// scenario hash, policy and seed(s); csv::parse skips it.

namespace portsim::io {

inline std::string seeds_text(std::span<const std::uint64_t> seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? " " : "") + std::to_string(seeds[i]);
  return s;
}

inline std::string provenance(const std::string& hash, std::string_view policy, const std::string& seeds) {
  return "# scenario_hash=" + hash + " policy=" + std::string(policy) + " seed=" + seeds + "\n";
}

inline std::string provenance(const RunResult& r) {
  return provenance(r.scenario_hash, to_string(r.policy), std::to_string(r.seed));
}

inline std::string opt_num(double v) { return is_set(v) ? csv::num(v) : ""; }

/// One row per scheduled vehicle; blank cells for passages that never happened.
inline std::string trips_to_csv(const RunResult& r) {
  std::string out = provenance(r);
  out += "vehicle_id,class,scheduled_s,admit_s,exit_s";
  for (const auto& id : r.station_ids)
    out += "," + id + "_lane," + id + "_arrive_s," + id + "_join_s," + id + "_begin_s," + id + "_end_s," + id +
           "_depart_s," + id + "_security";
  out += "\n";
  for (const auto& t : r.trips) {
    out += std::to_string(t.vehicle_id) + "," + std::string(to_string(t.cls)) + "," + csv::num(t.scheduled_s) + "," +
           opt_num(t.admit_s) + "," + opt_num(t.exit_s);
    for (const auto& v : t.visits)
      out += "," + std::to_string(v.lane) + "," + opt_num(v.arrive_s) + "," + opt_num(v.join_s) + "," +
             opt_num(v.begin_s) + "," + opt_num(v.end_s) + "," + opt_num(v.depart_s) + "," +
             (v.security_hit ? "1" : "0");
    out += "\n";
  }
  return out;
}

/// Wide sample table: time, stacked vehicles, then meters per station lane
/// (`<station>_upstream_m` is the queue ahead of the lanes).
inline std::string queue_series_to_csv(const RunResult& r) {
  std::string out = provenance(r);
  out += "time_s,stacked";
  for (const auto& q : r.queue_series) {
    const auto& id = r.station_ids[q.station];
    out += q.lane == 0 ? "," + id + "_upstream_m" : "," + id + "_lane" + std::to_string(q.lane) + "_m";
  }
  out += "\n";
  for (std::size_t k = 0; k < r.series_length(); ++k) {
    out += csv::num(static_cast<double>(k) * r.sample_interval_s) + "," + std::to_string(r.stacked_series[k]);
    for (const auto& q : r.queue_series) out += "," + csv::num(q.meters[k]);
    out += "\n";
  }
  return out;
}

inline std::string lane_tallies_to_csv(const RunResult& r) {
  std::string out = provenance(r);
  out += "station,lane,served\n";
  for (std::size_t s = 0; s < r.lane_tallies.size(); ++s)
    for (std::size_t l = 0; l < r.lane_tallies[s].size(); ++l)
      out += r.station_ids[s] + "," + std::to_string(l + 1) + "," + std::to_string(r.lane_tallies[s][l]) + "\n";
  return out;
}

/// Structured-text manifest of one run.
inline std::string run_manifest(const RunResult& r, const std::string& scenario_name, bool drain) {
  std::string out;
  out += "scenario: " + scenario_name + "\n";
  out += "scenario_hash: " + r.scenario_hash + "\n";
  out += "policy: " + std::string(to_string(r.policy)) + "\n";
  out += "seed: " + std::to_string(r.seed) + "\n";
  out += "warmup_s: " + csv::num(r.warmup_s) + "\n";
  out += "drain: " + std::string(drain ? "true" : "false") + "\n";
  out += "end_time_s: " + csv::num(r.end_time_s) + "\n";
  out += "scheduled: " + std::to_string(r.scheduled) + "\n";
  out += "admitted: " + std::to_string(r.admitted) + "\n";
  out += "exited: " + std::to_string(r.exited) + "\n";
  out += "in_system_at_end: " + std::to_string(r.in_system_at_end) + "\n";
  out += "stacked_at_end: " + std::to_string(r.stacked_at_end) + "\n";
  return out;
}

inline std::string spread_to_csv(const SpreadReport& s, const std::string& hash, PolicyName policy) {
  std::string out = provenance(hash, to_string(policy), seeds_text(s.seeds));
  out += "seed,trip_mean_s,mean_queue_m\n";
  for (std::size_t i = 0; i < s.seeds.size(); ++i)
    out += std::to_string(s.seeds[i]) + "," + csv::num(s.per_seed_trip_means[i]) + "," +
           csv::num(s.per_seed_mean_queue_m[i]) + "\n";
  return out;
}

inline std::string spread_summary(const SpreadReport& s) {
  std::string out;
  out += "max_queue_difference_m: " + csv::num(s.max_queue_difference_m) + "\n";
  out += "max_mean_ratio: " + csv::num(s.max_mean_ratio) + "\n";
  out += "max_windowed_ratio: " + csv::num(s.max_windowed_ratio) + "\n";
  out += "trip_mean_cv: " + csv::num(s.trip_mean_cv) + "\n";
  return out;
}

// -- comparison ---------------------------------------------------------------

inline std::string comparison_to_csv(const ComparisonReport& c, const std::string& header) {
  std::string out = header + "policy,rate,occ_error_pp,trip_mean_s,trip_sd_s\n";
  for (const auto& x : c.cells)
    out += std::string(to_string(x.policy)) + "," + csv::num(x.rate) + "," + csv::num(x.occ_error_pp) + "," +
           csv::num(x.trip_mean_s) + "," + csv::num(x.trip_sd_s) + "\n";
  return out;
}

/// Lane share per policy and rate, with the reference share alongside.
inline std::string lane_shares_to_csv(const ComparisonReport& c, const std::string& header) {
  std::string out = header + "policy,rate,lane,share_mean,share_sd,reference_share\n";
  for (const auto& x : c.cells)
    for (std::size_t l = 0; l < x.mean_shares.size(); ++l)
      out += std::string(to_string(x.policy)) + "," + csv::num(x.rate) + "," + std::to_string(l + 1) + "," +
             csv::num(x.mean_shares[l]) + "," + csv::num(x.sd_shares[l]) + "," + csv::num(x.reference_shares[l]) +
             "\n";
  return out;
}

inline std::string occupancy_errors_to_csv(const ComparisonReport& c, const std::string& header) {
  std::string out = header + "policy,rate,band,occ_error_pp,occ_error_sd\n";
  for (const auto& x : c.cells)
    out += std::string(to_string(x.policy)) + "," + csv::num(x.rate) + "," + std::string(to_string(x.band)) + "," +
           csv::num(x.occ_error_pp) + "," + csv::num(x.occ_error_sd) + "\n";
  return out;
}

inline std::string trip_times_to_csv(const ComparisonReport& c, const std::string& header) {
  std::string out = header +
                    "policy,rate,trip_mean_s,trip_q1_s,trip_median_s,trip_q3_s,reference_trip_s,trip_error_pct,"
                    "trip_cv_across_seeds\n";
  for (const auto& x : c.cells)
    out += std::string(to_string(x.policy)) + "," + csv::num(x.rate) + "," + csv::num(x.trip_mean_s) + "," +
           csv::num(x.trip_q1_s) + "," + csv::num(x.trip_median_s) + "," + csv::num(x.trip_q3_s) + "," +
           csv::num(x.reference_trip_s) + "," + csv::num(x.trip_error_pct) + "," + csv::num(x.trip_cv_across_seeds) +
           "\n";
  return out;
}

inline std::string scorecard_to_csv(const ComparisonReport& c, const std::string& header) {
  std::string out = header + "metric,policy,band,error,worst\n";
  for (const auto& e : c.scorecard)
    out += std::string(to_string(e.metric)) + "," + std::string(to_string(e.policy)) + "," +
           std::string(to_string(e.band)) + "," + csv::num(e.error) + "," + (e.worst ? "true" : "false") + "\n";
  return out;
}

}  // namespace portsim::io
