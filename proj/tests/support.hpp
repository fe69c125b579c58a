#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "portsim/portsim.hpp"

namespace portsim::testing {

inline Station plain_station(std::string id, int lanes, ServiceModel svc, double capacity = 200.0,
                             bool shared = false) {
  Station s;
  s.id = std::move(id);
  s.kind = StationKind::Ticketing;
  s.lane_count = lanes;
  s.service = std::move(svc);
  LaneSet all;
  for (int l = 1; l <= lanes; ++l) all.push_back(l);
  s.admissible_lanes = {{VehicleClassId::RHV, all}, {VehicleClassId::Tourist, all}};
  s.approach_capacity_m = capacity;
  s.shared_queue = shared;
  return s;
}

/// A chain of stations joined by segments with the given free-flow times
/// (one more segment than stations).
inline ScenarioConfig chain(std::vector<Station> stations, std::vector<double> free_flow, double storage_m = 1e6) {
  ScenarioConfig cfg;
  cfg.name = "chain";
  cfg.classes = {VehicleClass{VehicleClassId::RHV, 17.0, true, false},
                 VehicleClass{VehicleClassId::Tourist, 6.0, false, true}};
  cfg.warmup_s = 0.0;
  std::string prev(kSource);
  for (std::size_t i = 0; i < free_flow.size(); ++i) {
    const std::string to = i < stations.size() ? stations[i].id : std::string(kSink);
    cfg.segments.push_back(Segment{"seg" + std::to_string(i), prev, to, free_flow[i], storage_m});
    prev = to;
  }
  cfg.stations = std::move(stations);
  cfg.demand.bin_width_s = 120.0;
  cfg.demand.counts[VehicleClassId::RHV] = {};
  cfg.horizon_s = 0.0;
  return cfg;
}

inline void set_demand(ScenarioConfig& cfg, DemandBins bins) {
  cfg.demand = std::move(bins);
  cfg.horizon_s = cfg.demand.span_s();
}

/// Exact Erlang-C probability of waiting, by the Erlang-B recursion.
inline double erlang_c(int servers, double offered) {
  double b = 1.0;
  for (int k = 1; k <= servers; ++k) b = offered * b / (k + offered * b);
  const double rho = offered / servers;
  return b / (1.0 - rho + rho * b);
}

/// M/M/c mean wait in queue.
inline double mmc_wait(int servers, double lambda, double mean_service) {
  const double a = lambda * mean_service;
  return erlang_c(servers, a) * mean_service / (servers - a);
}

/// Allen-Cunneen M/G/c mean wait with Poisson arrivals.
inline double allen_cunneen_wait(int servers, double lambda, double mean_service, double sd_service) {
  const double cs2 = (sd_service / mean_service) * (sd_service / mean_service);
  return mmc_wait(servers, lambda, mean_service) * (1.0 + cs2) / 2.0;
}

/// Single shared-queue station with Exponential service and Poisson
/// arrivals at utilisation `rho`.
inline ScenarioConfig erlang_scenario(double rho, double hours, int servers = 5, double mean_service = 20.0,
                                      std::uint64_t demand_seed = 11) {
  auto st = plain_station("desk", servers, ServiceModel{Exponential{mean_service}, 0.0, 0.0}, 1e6, true);
  auto cfg = chain({st}, {1.0, 1.0}, 1e9);
  const double rate = rho * servers / mean_service * 3600.0;
  RandomStream rng(demand_seed, 0xe1);
  const auto bins = static_cast<std::size_t>(hours * 3600.0 / 120.0);
  set_demand(cfg, poisson_bins(rate, 120.0, bins, VehicleClassId::RHV, rng));
  cfg.sample_interval_s = 0.0;
  return cfg;
}

struct StationFlowStats {
  std::size_t n = 0;
  double mean_wait = 0.0;      // begin - arrive
  double mean_sojourn = 0.0;   // depart - arrive
  double lambda = 0.0;         // arrivals per second in the window
  double time_avg_number = 0.0;
};

/// Waits and Little's-law quantities for vehicles reaching `station` in
/// [from, to). The time-average number in the station is integrated exactly
/// from the arrive/depart records over the same window.
inline StationFlowStats station_flow_stats(const RunResult& r, std::size_t station, double from, double to) {
  StationFlowStats s;
  double wait = 0.0, sojourn = 0.0, area = 0.0;
  for (const auto& t : r.trips) {
    const auto& v = t.visits[station];
    if (!is_set(v.arrive_s)) continue;
    const double leave = is_set(v.depart_s) ? v.depart_s : to;
    area += std::max(0.0, std::min(leave, to) - std::max(v.arrive_s, from));
    if (v.arrive_s < from || v.arrive_s >= to || !is_set(v.depart_s)) continue;
    ++s.n;
    wait += v.begin_s - v.arrive_s;
    sojourn += v.depart_s - v.arrive_s;
  }
  if (s.n == 0) return s;
  s.mean_wait = wait / static_cast<double>(s.n);
  s.mean_sojourn = sojourn / static_cast<double>(s.n);
  s.lambda = static_cast<double>(s.n) / (to - from);
  s.time_avg_number = area / (to - from);
  return s;
}

inline double binomial_sigma(double n, double p) { return std::sqrt(n * p * (1.0 - p)); }

}  // namespace portsim::testing
