#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace portsim {

// Lane indices are 1-based everywhere in the public API, matching how lanes
// are numbered on site and in exported files.
using LaneIndex = int;
using LaneSet = std::vector<LaneIndex>;

enum class VehicleClassId { RHV, Tourist };

inline std::string_view to_string(VehicleClassId id) {
  return id == VehicleClassId::RHV ? "RHV" : "Tourist";
}

inline std::optional<VehicleClassId> parse_vehicle_class(std::string_view s) {
  if (s == "RHV") return VehicleClassId::RHV;
  if (s == "Tourist") return VehicleClassId::Tourist;
  return std::nullopt;
}

struct VehicleClass {
  VehicleClassId id = VehicleClassId::RHV;
  double effective_length_m = 17.0;  // vehicle plus standstill gap
  bool visits_weighbridge = true;
  bool visits_tourist_checkin = false;

  bool operator==(const VehicleClass&) const = default;
};

enum class StationKind { PassportCheck, Weighbridge, Ticketing, SecurityCheck };

inline std::string_view to_string(StationKind k) {
  switch (k) {
    case StationKind::PassportCheck: return "PassportCheck";
    case StationKind::Weighbridge: return "Weighbridge";
    case StationKind::Ticketing: return "Ticketing";
    case StationKind::SecurityCheck: return "SecurityCheck";
  }
  return "?";
}

inline std::optional<StationKind> parse_station_kind(std::string_view s) {
  if (s == "PassportCheck") return StationKind::PassportCheck;
  if (s == "Weighbridge") return StationKind::Weighbridge;
  if (s == "Ticketing") return StationKind::Ticketing;
  if (s == "SecurityCheck") return StationKind::SecurityCheck;
  return std::nullopt;
}

struct NormalTruncated {
  double mean_s = 20.0;
  double sd_s = 2.0;
  bool operator==(const NormalTruncated&) const = default;
};

struct Deterministic {
  double value_s = 10.0;
  bool operator==(const Deterministic&) const = default;
};

struct Exponential {
  double mean_s = 12.0;
  bool operator==(const Exponential&) const = default;
};

using ServiceDistribution = std::variant<NormalTruncated, Deterministic, Exponential>;

struct ServiceModel {
  ServiceDistribution distribution = NormalTruncated{};
  double security_check_probability = 0.0;
  double security_check_delay_s = 0.0;

  bool operator==(const ServiceModel&) const = default;
};

struct Station {
  std::string id;
  StationKind kind = StationKind::PassportCheck;
  int lane_count = 1;
  ServiceModel service;
  // A class with no entry (or an empty set) bypasses the station.
  std::map<VehicleClassId, LaneSet> admissible_lanes;
  double approach_capacity_m = 100.0;  // storage per lane
  // One FIFO feeding every lane (M/M/c style) instead of per-lane queues.
  bool shared_queue = false;
  // Parameters not backed by field data.
  bool uncalibrated = false;

  bool operator==(const Station&) const = default;
};

inline constexpr std::string_view kSource = "source";
inline constexpr std::string_view kSink = "sink";

struct Segment {
  std::string id;
  std::string from;  // station id or "source"
  std::string to;    // station id or "sink"
  double free_flow_s = 30.0;
  double storage_m = 500.0;

  bool operator==(const Segment&) const = default;
};

struct DemandBins {
  double bin_width_s = 120.0;
  std::map<VehicleClassId, std::vector<long long>> counts;

  std::size_t bin_count() const {
    std::size_t n = 0;
    for (const auto& [cls, c] : counts) n = std::max(n, c.size());
    return n;
  }
  double span_s() const { return bin_width_s * static_cast<double>(bin_count()); }

  bool operator==(const DemandBins&) const = default;
};

enum class FlowBandLabel { All, Low, Medium, High, VeryHigh };

inline std::string_view to_string(FlowBandLabel l) {
  switch (l) {
    case FlowBandLabel::All: return "All";
    case FlowBandLabel::Low: return "Low";
    case FlowBandLabel::Medium: return "Medium";
    case FlowBandLabel::High: return "High";
    case FlowBandLabel::VeryHigh: return "VeryHigh";
  }
  return "?";
}

inline std::optional<FlowBandLabel> parse_band_label(std::string_view s) {
  if (s == "All") return FlowBandLabel::All;
  if (s == "Low") return FlowBandLabel::Low;
  if (s == "Medium") return FlowBandLabel::Medium;
  if (s == "High") return FlowBandLabel::High;
  if (s == "VeryHigh") return FlowBandLabel::VeryHigh;
  return std::nullopt;
}

inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();

/// Rates r with lower < r <= upper belong to the band; the first band of a
/// partition also owns its lower edge.
struct FlowBand {
  FlowBandLabel label = FlowBandLabel::All;
  double lower = 0.0;
  double upper = kInfiniteRate;

  bool operator==(const FlowBand&) const = default;
};

struct OccupancyTable {
  std::vector<FlowBand> bands;
  std::vector<std::vector<double>> shares;  // one share vector per band

  bool operator==(const OccupancyTable&) const = default;
};

struct DriverProfile {
  std::vector<LaneIndex> preference_order;
  int switch_threshold = 2;
  bool lookahead = true;

  bool operator==(const DriverProfile&) const = default;
};

struct WeightedProfile {
  double weight = 1.0;
  DriverProfile profile;

  bool operator==(const WeightedProfile&) const = default;
};

struct RoutingConfig {
  std::string station;  // the station whose lane choice the policy controls
  double rate_window_s = 900.0;
  std::vector<double> average_shares;
  OccupancyTable flow_specific;
  std::vector<WeightedProfile> agent_profiles;

  bool operator==(const RoutingConfig&) const = default;
};

struct TripSummaryTarget {
  double mean_s = 0.0;
  double median_s = 0.0;
  double sd_s = 0.0;
  double max_s = 0.0;

  bool operator==(const TripSummaryTarget&) const = default;
};

/// Demand fixtures and reference data for the policy comparison.
struct ExperimentConfig {
  std::vector<double> flow_rates;  // veh/h
  double profile_duration_s = 10800.0;
  std::uint64_t profile_seed = 2009;
  VehicleClassId profile_class = VehicleClassId::RHV;
  std::string trip_from;
  std::string trip_to;
  std::vector<double> observed_average;  // calibration target
  OccupancyTable observed_by_band;       // reference for occupancy error
  std::map<double, double> reference_trip_mean_s;  // rate -> mean trip

  bool operator==(const ExperimentConfig&) const = default;
};

struct DetectorSite {
  std::string id;
  std::string location;  // measurement point
  double detection_probability = 1.0;

  bool operator==(const DetectorSite&) const = default;
};

struct DetectionConfig {
  std::vector<DetectorSite> sites;
  std::vector<double> device_distribution{0.25, 0.60, 0.15};  // P(0), P(1), P(2)
  double dedupe_window_s = 5.0;
  double max_trip_s = 3600.0;
  double camera_window_start_s = 0.0;
  double camera_window_end_s = kInfiniteRate;
  std::optional<TripSummaryTarget> reference_simulation;

  bool operator==(const DetectionConfig&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double horizon_s = 3600.0;
  bool drain = true;
  double warmup_s = 900.0;
  double sample_interval_s = 10.0;
  std::vector<VehicleClass> classes;
  std::vector<Segment> segments;  // ordered source -> sink
  std::vector<Station> stations;  // ordered source -> sink
  DemandBins demand;
  std::optional<RoutingConfig> routing;
  std::optional<ExperimentConfig> experiment;
  std::optional<DetectionConfig> detection;

  bool operator==(const ScenarioConfig&) const = default;
};

struct ValidationIssue {
  std::string path;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : std::runtime_error(format(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  static std::string format(const std::vector<ValidationIssue>& issues) {
    std::string out = "scenario validation failed:";
    for (const auto& i : issues) out += "\n  " + i.path + ": " + i.message;
    return out;
  }
  std::vector<ValidationIssue> issues_;
};

}  // namespace portsim
