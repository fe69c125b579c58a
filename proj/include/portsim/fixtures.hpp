#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "portsim/arrivals.hpp"
#include "portsim/routing.hpp"
#include "portsim/scenario.hpp"

namespace portsim {

/// Weighbridge bay occupancy over 2009, bays one to five.
inline const std::vector<double>& observed_weighbridge_shares_2009() {
  static const std::vector<double> shares{0.223, 0.254, 0.228, 0.156, 0.139};
  return shares;
}

/// Flow-specific lane shares standing in for the unpublished per-band field
/// data: lanes one and two dominate at low flow and the load evens out as
/// flow rises. These are fixture inputs, not measurements.
inline OccupancyTable dover_flow_specific_table() {
  OccupancyTable t;
  t.bands = default_flow_bands();
  t.shares = {
      {0.300, 0.310, 0.190, 0.110, 0.090},
      {0.250, 0.270, 0.220, 0.140, 0.120},
      {0.220, 0.240, 0.230, 0.160, 0.150},
      {0.200, 0.210, 0.220, 0.190, 0.180},
  };
  return t;
}

namespace detail {

inline Station make_station(std::string id, StationKind kind, int lanes, ServiceModel service,
                            std::map<VehicleClassId, LaneSet> admissible, double capacity, bool uncalibrated) {
  Station s;
  s.id = std::move(id);
  s.kind = kind;
  s.lane_count = lanes;
  s.service = std::move(service);
  s.admissible_lanes = std::move(admissible);
  s.approach_capacity_m = capacity;
  s.uncalibrated = uncalibrated;
  return s;
}

inline LaneSet lanes_1_to(int n) {
  LaneSet l(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) l[static_cast<std::size_t>(i)] = i + 1;
  return l;
}

inline std::uint64_t rate_key(double rate) {
  return static_cast<std::uint64_t>(std::llround(rate * 1000.0));
}

}  // namespace detail

/// Per-bin counts for a constant flow rate. The counts are Poisson draws
/// from a fixed fixture seed, so every replication sees identical traffic.
inline DemandBins demand_profile_for_rate(double rate_per_hour, double duration_s, std::uint64_t profile_seed,
                                          VehicleClassId cls, double bin_width_s = 120.0) {
  RandomStream rng(profile_seed, detail::rate_key(rate_per_hour));
  const auto n = static_cast<std::size_t>(std::ceil(duration_s / bin_width_s));
  return poisson_bins(rate_per_hour, bin_width_s, n, cls, rng);
}

/// The scenario with its demand replaced by the fixture profile for `rate`.
inline ScenarioConfig with_flow_rate(const ScenarioConfig& base, double rate_per_hour) {
  if (!base.experiment) throw std::invalid_argument("scenario has no experiment section");
  const auto& e = *base.experiment;
  ScenarioConfig cfg = base;
  cfg.demand = demand_profile_for_rate(rate_per_hour, e.profile_duration_s, e.profile_seed, e.profile_class,
                                       base.demand.bin_width_s);
  cfg.horizon_s = std::max(base.horizon_s, cfg.demand.span_s());
  return cfg;
}

/// 24 h RHV profile in 2-minute bins: a cosine swing between one vehicle a
/// minute (trough centred on 02:07:30) and four a minute (peak centred on
/// 15:22:30). Counts come from rounding the cumulative expected volume.
inline DemandBins dover_day_profile(double min_per_minute = 1.0, double max_per_minute = 4.0) {
  constexpr double kDay = 86400.0;
  constexpr double kTrough = 2.0 * 3600 + 7.5 * 60;
  constexpr double kPeak = 15.0 * 3600 + 22.5 * 60;
  const auto rate = [&](double t) {
    // Half-cosine rise from trough to peak, half-cosine fall back.
    double phase;
    const double rise = kPeak - kTrough;
    const double fall = kDay - rise;
    const double since = std::fmod(t - kTrough + kDay, kDay);
    if (since <= rise)
      phase = since / rise;
    else
      phase = 1.0 - (since - rise) / fall;
    const double s = 0.5 - 0.5 * std::cos(std::numbers::pi * phase);
    return (min_per_minute + (max_per_minute - min_per_minute) * s) / 60.0;
  };
  DemandBins bins;
  bins.bin_width_s = 120.0;
  auto& counts = bins.counts[VehicleClassId::RHV];
  const int steps_per_bin = 120;
  double cumulative = 0.0;
  long long emitted = 0;
  for (int b = 0; b < 720; ++b) {
    for (int k = 0; k < steps_per_bin; ++k) {
      const double t = b * 120.0 + k + 0.5;
      cumulative += rate(t);
    }
    const long long target = std::llround(cumulative);
    counts.push_back(target - emitted);
    emitted = target;
  }
  return bins;
}

/// The bundled port-entry corridor: passport check, five-bay weighbridge,
/// ticketing. Passport and ticketing service parameters are placeholders.
inline ScenarioConfig default_dover_scenario() {
  using V = VehicleClassId;
  ScenarioConfig cfg;
  cfg.name = "dover";
  cfg.drain = true;
  cfg.warmup_s = 900.0;
  cfg.sample_interval_s = 10.0;
  cfg.classes = {VehicleClass{V::RHV, 17.0, true, false}, VehicleClass{V::Tourist, 6.0, false, true}};

  cfg.stations.push_back(detail::make_station(
      "passport", StationKind::PassportCheck, 6, ServiceModel{NormalTruncated{8.0, 3.0}, 0.0, 0.0},
      {{V::RHV, {1, 2, 3}}, {V::Tourist, detail::lanes_1_to(6)}}, 120.0, true));
  cfg.stations.push_back(detail::make_station("weighbridge", StationKind::Weighbridge, 5,
                                              ServiceModel{NormalTruncated{20.0, 2.0}, 0.0, 0.0},
                                              {{V::RHV, detail::lanes_1_to(5)}, {V::Tourist, {}}}, 85.0, false));
  cfg.stations.push_back(detail::make_station(
      "ticketing", StationKind::Ticketing, 16, ServiceModel{NormalTruncated{60.0, 25.0}, 0.05, 180.0},
      {{V::RHV, detail::lanes_1_to(16)}, {V::Tourist, detail::lanes_1_to(16)}}, 60.0, true));

  cfg.segments = {
      Segment{"entry", "source", "passport", 30.0, 12000.0},
      Segment{"approach", "passport", "weighbridge", 45.0, 200.0},
      Segment{"link", "weighbridge", "ticketing", 60.0, 600.0},
      Segment{"embark", "ticketing", "sink", 30.0, 2000.0},
  };

  RoutingConfig r;
  r.station = "weighbridge";
  r.rate_window_s = 900.0;
  r.average_shares = observed_weighbridge_shares_2009();
  r.flow_specific = dover_flow_specific_table();
  r.agent_profiles = {WeightedProfile{1.0, DriverProfile{{1, 2, 3, 4, 5}, 2, true}}};
  cfg.routing = r;

  ExperimentConfig e;
  e.flow_rates = {30, 60, 90, 300, 600, 800};
  e.profile_duration_s = 10800.0;
  e.profile_seed = 2009;
  e.profile_class = V::RHV;
  e.trip_from = "network.entry";
  e.trip_to = "weighbridge.exit";
  e.observed_average = observed_weighbridge_shares_2009();
  e.observed_by_band = dover_flow_specific_table();
  // Free-flow times plus service plus the Allen-Cunneen M/G/c wait at the
  // passport (3 RHV lanes) and the pooled weighbridge (5 lanes).
  e.reference_trip_mean_s = {{30, 103.0}, {60, 103.0}, {90, 103.0}, {300, 103.2}, {600, 105.5}, {800, 117.7}};
  cfg.experiment = e;

  cfg.demand = demand_profile_for_rate(300.0, e.profile_duration_s, e.profile_seed, V::RHV);
  cfg.horizon_s = cfg.demand.span_s();
  return cfg;
}

/// Trip-time validation scenario: four hours of mixed traffic past two
/// detector sites (after passport control and after ticketing).
inline ScenarioConfig default_validation_scenario() {
  using V = VehicleClassId;
  ScenarioConfig cfg = default_dover_scenario();
  cfg.name = "dover-validation";
  cfg.experiment.reset();
  cfg.warmup_s = 900.0;
  cfg.segments[2].free_flow_s = 160.0;
  cfg.stations[2].service = ServiceModel{NormalTruncated{60.0, 25.0}, 0.15, 300.0};

  RandomStream rng(2009, 0x7a11);
  DemandBins bins;
  bins.bin_width_s = 120.0;
  const std::size_t n = 120;  // four hours
  bins.counts[V::RHV] = poisson_bins(150.0, 120.0, n, V::RHV, rng).counts[V::RHV];
  bins.counts[V::Tourist] = poisson_bins(150.0, 120.0, n, V::Tourist, rng).counts[V::Tourist];
  cfg.demand = bins;
  cfg.horizon_s = bins.span_s();

  DetectionConfig d;
  d.sites = {DetectorSite{"site1", "passport.exit", 0.737}, DetectorSite{"site2", "ticketing.exit", 0.116}};
  d.device_distribution = {0.25, 0.60, 0.15};
  d.dedupe_window_s = 5.0;
  d.max_trip_s = 3600.0;
  d.camera_window_start_s = 5400.0;
  d.camera_window_end_s = 6600.0;
  d.reference_simulation = TripSummaryTarget{319.0, 291.0, 110.0, 729.0};
  cfg.detection = d;
  return cfg;
}

}  // namespace portsim
