#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "portsim/rng.hpp"
#include "portsim/types.hpp"

namespace portsim {

// ---------------------------------------------------------------------------
// Measurement points

/// A named position on the corridor where a vehicle's passage time is known.
///   network.entry   admission into the first segment
///   network.exit    arrival at the sink
///   <station>.arrive  reaching the decision point at the head of the approach
///   <station>.exit    leaving the station into the next segment
struct MeasurementPoint {
  enum class Kind { NetworkEntry, NetworkExit, StationArrive, StationExit };
  Kind kind = Kind::NetworkEntry;
  std::size_t station = 0;

  bool operator==(const MeasurementPoint&) const = default;
};

// ---------------------------------------------------------------------------
// Validated topology

struct NetworkTopology {
  std::vector<Segment> segments;  // segments[i] feeds stations[i]; the last feeds the sink
  std::vector<Station> stations;
  std::vector<VehicleClass> classes;
  // resolved[s][c]: sorted admissible lanes of station s for class index c.
  std::vector<std::vector<LaneSet>> resolved;
  std::optional<std::size_t> routed_station;

  std::size_t class_index(VehicleClassId id) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i].id == id) return i;
    throw std::out_of_range("vehicle class not declared in scenario: " + std::string(to_string(id)));
  }

  const VehicleClass& vehicle_class(VehicleClassId id) const { return classes[class_index(id)]; }

  const LaneSet& lanes_for(std::size_t station, VehicleClassId id) const {
    return resolved.at(station).at(class_index(id));
  }

  std::optional<std::size_t> station_index(std::string_view id) const {
    for (std::size_t i = 0; i < stations.size(); ++i)
      if (stations[i].id == id) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> first_station_of_kind(StationKind kind) const {
    for (std::size_t i = 0; i < stations.size(); ++i)
      if (stations[i].kind == kind) return i;
    return std::nullopt;
  }

  std::optional<MeasurementPoint> resolve_point(std::string_view name) const {
    if (name == "network.entry") return MeasurementPoint{MeasurementPoint::Kind::NetworkEntry, 0};
    if (name == "network.exit") return MeasurementPoint{MeasurementPoint::Kind::NetworkExit, 0};
    const auto dot = name.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const auto station = station_index(name.substr(0, dot));
    if (!station) return std::nullopt;
    const auto suffix = name.substr(dot + 1);
    if (suffix == "arrive") return MeasurementPoint{MeasurementPoint::Kind::StationArrive, *station};
    if (suffix == "exit") return MeasurementPoint{MeasurementPoint::Kind::StationExit, *station};
    return std::nullopt;
  }
};

struct TopologyResult {
  std::optional<NetworkTopology> topology;
  std::vector<ValidationIssue> errors;

  bool ok() const { return topology.has_value(); }
};

namespace detail {

inline void check_shares(const std::vector<double>& shares, std::size_t lanes, const std::string& path,
                         std::vector<ValidationIssue>& out) {
  if (lanes != 0 && shares.size() != lanes) {
    out.push_back({path, "expected " + std::to_string(lanes) + " shares, got " + std::to_string(shares.size())});
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (!(shares[i] >= 0.0) || !std::isfinite(shares[i]))
      out.push_back({path + "[" + std::to_string(i) + "]", "share must be finite and >= 0"});
    sum += shares[i];
  }
  if (!shares.empty() && std::abs(sum - 1.0) > 1e-9)
    out.push_back({path, "shares sum to " + std::to_string(sum) + ", expected 1"});
}

inline void check_bands(const std::vector<FlowBand>& bands, const std::string& path,
                        std::vector<ValidationIssue>& out) {
  if (bands.empty()) {
    out.push_back({path, "at least one flow band is required"});
    return;
  }
  if (bands.front().lower != 0.0) out.push_back({path + "[0].lower", "first band must start at 0"});
  if (bands.back().upper != kInfiniteRate) out.push_back({path, "last band must be unbounded above"});
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].upper > bands[i].lower))
      out.push_back({path + "[" + std::to_string(i) + "]", "band upper edge must exceed lower edge"});
    if (i > 0 && bands[i].lower != bands[i - 1].upper)
      out.push_back({path + "[" + std::to_string(i) + "].lower", "bands must be contiguous and ascending"});
  }
}

inline void check_table(const OccupancyTable& t, std::size_t lanes, const std::string& path,
                        std::vector<ValidationIssue>& out) {
  check_bands(t.bands, path, out);
  if (t.shares.size() != t.bands.size()) {
    out.push_back({path, "one share vector per band is required"});
    return;
  }
  for (std::size_t i = 0; i < t.shares.size(); ++i)
    check_shares(t.shares[i], lanes, path + "[" + std::to_string(i) + "].shares", out);
}

inline bool is_permutation_of_lanes(const std::vector<LaneIndex>& order, int lanes) {
  if (order.size() != static_cast<std::size_t>(lanes)) return false;
  std::vector<LaneIndex> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < lanes; ++i)
    if (sorted[static_cast<std::size_t>(i)] != i + 1) return false;
  return true;
}

}  // namespace detail

/// Check the corridor structure and resolve lane sets. Every violated
/// invariant is reported.
inline TopologyResult validate_topology(const ScenarioConfig& cfg) {
  std::vector<ValidationIssue> errs;

  if (cfg.classes.empty()) errs.push_back({"classes", "at least one vehicle class is required"});
  double longest = 0.0;
  for (std::size_t i = 0; i < cfg.classes.size(); ++i) {
    const auto& c = cfg.classes[i];
    const std::string p = "classes[" + std::to_string(i) + "]";
    if (!(c.effective_length_m > 0.0)) errs.push_back({p + ".effective_length_m", "must be > 0"});
    longest = std::max(longest, c.effective_length_m);
    if (c.id == VehicleClassId::RHV && !c.visits_weighbridge)
      errs.push_back({p + ".visits_weighbridge", "RHVs must visit the weighbridge"});
    if (c.id == VehicleClassId::Tourist && c.visits_weighbridge)
      errs.push_back({p + ".visits_weighbridge", "tourist vehicles do not visit the weighbridge"});
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.classes[j].id == c.id) errs.push_back({p + ".id", "duplicate vehicle class"});
  }

  const auto& st = cfg.stations;
  const auto& sg = cfg.segments;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto& s = st[i];
    const std::string p = "stations[" + std::to_string(i) + "]";
    if (s.id.empty() || s.id == kSource || s.id == kSink || s.id == "network")
      errs.push_back({p + ".id", "station id must be non-empty and not a reserved name"});
    for (std::size_t j = 0; j < i; ++j)
      if (st[j].id == s.id) errs.push_back({p + ".id", "duplicate station id '" + s.id + "'"});
    if (s.lane_count < 1) errs.push_back({p + ".lanes", "lane count must be >= 1"});
    if (!(s.approach_capacity_m > 0.0))
      errs.push_back({p + ".approach_capacity_m", "must be > 0"});
    else if (s.approach_capacity_m < longest)
      errs.push_back({p + ".approach_capacity_m", "cannot hold the longest vehicle class"});

    const auto& svc = s.service;
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, NormalTruncated>) {
            if (!(d.mean_s > 0.0)) errs.push_back({p + ".service.mean_s", "must be > 0"});
            if (!(d.sd_s >= 0.0)) errs.push_back({p + ".service.sd_s", "must be >= 0"});
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            if (!(d.value_s > 0.0)) errs.push_back({p + ".service.value_s", "must be > 0"});
          } else {
            if (!(d.mean_s > 0.0)) errs.push_back({p + ".service.mean_s", "must be > 0"});
          }
        },
        svc.distribution);
    if (!(svc.security_check_probability >= 0.0 && svc.security_check_probability <= 1.0))
      errs.push_back({p + ".service.security_probability", "must lie in [0, 1]"});
    if (!(svc.security_check_delay_s >= 0.0))
      errs.push_back({p + ".service.security_delay_s", "must be >= 0"});

    for (const auto& [cls, lanes] : s.admissible_lanes) {
      const std::string lp = p + ".admissible." + std::string(to_string(cls));
      const bool declared = std::any_of(cfg.classes.begin(), cfg.classes.end(),
                                        [&](const VehicleClass& c) { return c.id == cls; });
      if (!declared) errs.push_back({lp, "class not declared in classes"});
      for (std::size_t k = 0; k < lanes.size(); ++k) {
        if (lanes[k] < 1 || lanes[k] > s.lane_count)
          errs.push_back({lp + "[" + std::to_string(k) + "]", "lane " + std::to_string(lanes[k]) +
                                                                 " outside 1.." + std::to_string(s.lane_count)});
        for (std::size_t m = 0; m < k; ++m)
          if (lanes[m] == lanes[k]) errs.push_back({lp + "[" + std::to_string(k) + "]", "duplicate lane"});
      }
    }
    if (s.kind == StationKind::Weighbridge) {
      for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
        const auto& c = cfg.classes[ci];
        const auto it = s.admissible_lanes.find(c.id);
        const bool visits = it != s.admissible_lanes.end() && !it->second.empty();
        if (c.visits_weighbridge && !visits)
          errs.push_back({p + ".admissible." + std::string(to_string(c.id)),
                          "class must stop at the weighbridge but has no admissible lane"});
        if (!c.visits_weighbridge && visits)
          errs.push_back({p + ".admissible." + std::string(to_string(c.id)),
                          "class does not visit the weighbridge but has admissible lanes"});
      }
    }
  }

  if (sg.size() != st.size() + 1) {
    errs.push_back({"segments", "expected " + std::to_string(st.size() + 1) + " segments for " +
                                    std::to_string(st.size()) + " stations, got " + std::to_string(sg.size())});
  }
  for (std::size_t i = 0; i < sg.size(); ++i) {
    const auto& s = sg[i];
    const std::string p = "segments[" + std::to_string(i) + "]";
    if (!(s.free_flow_s > 0.0)) errs.push_back({p + ".free_flow_s", "must be > 0"});
    if (!(s.storage_m > 0.0))
      errs.push_back({p + ".storage_m", "zero-capacity segment"});
    else if (s.storage_m < longest)
      errs.push_back({p + ".storage_m", "cannot hold the longest vehicle class"});
    const std::string want_from = i == 0 ? std::string(kSource) : (i - 1 < st.size() ? st[i - 1].id : "?");
    const std::string want_to = i < st.size() ? st[i].id : std::string(kSink);
    if (s.from != want_from)
      errs.push_back({p + ".from", "chain is disconnected: expected '" + want_from + "', got '" + s.from + "'"});
    if (s.to != want_to)
      errs.push_back({p + ".to", "chain is disconnected: expected '" + want_to + "', got '" + s.to + "'"});
  }

  if (!(cfg.demand.bin_width_s > 0.0)) errs.push_back({"demand.bin_width_s", "must be > 0"});
  for (const auto& [cls, counts] : cfg.demand.counts) {
    const std::string p = "demand.counts." + std::string(to_string(cls));
    const bool declared = std::any_of(cfg.classes.begin(), cfg.classes.end(),
                                      [&](const VehicleClass& c) { return c.id == cls; });
    if (!declared) errs.push_back({p, "class not declared in classes"});
    for (std::size_t b = 0; b < counts.size(); ++b)
      if (counts[b] < 0)
        errs.push_back({p + "[" + std::to_string(b) + "]",
                        "bin " + std::to_string(b) + " has negative count " + std::to_string(counts[b])});
  }
  if (!(cfg.horizon_s >= cfg.demand.span_s()))
    errs.push_back({"horizon_s", "horizon is shorter than the demand span"});
  if (!(cfg.warmup_s >= 0.0)) errs.push_back({"warmup_s", "must be >= 0"});
  if (!(cfg.sample_interval_s >= 0.0)) errs.push_back({"sample_interval_s", "must be >= 0"});

  NetworkTopology topo;
  topo.segments = sg;
  topo.stations = st;
  topo.classes = cfg.classes;

  if (cfg.routing) {
    const auto& r = *cfg.routing;
    const auto it = std::find_if(st.begin(), st.end(), [&](const Station& s) { return s.id == r.station; });
    if (it == st.end()) {
      errs.push_back({"routing.station", "unknown station '" + r.station + "'"});
    } else {
      const auto lanes = static_cast<std::size_t>(it->lane_count);
      topo.routed_station = static_cast<std::size_t>(it - st.begin());
      if (!(r.rate_window_s > 0.0)) errs.push_back({"routing.rate_window_s", "must be > 0"});
      detail::check_shares(r.average_shares, lanes, "routing.average_shares", errs);
      detail::check_table(r.flow_specific, lanes, "routing.flow_specific", errs);
      double total_weight = 0.0;
      for (std::size_t i = 0; i < r.agent_profiles.size(); ++i) {
        const auto& wp = r.agent_profiles[i];
        const std::string p = "routing.agent_profiles[" + std::to_string(i) + "]";
        if (!(wp.weight > 0.0)) errs.push_back({p + ".weight", "must be > 0"});
        total_weight += wp.weight;
        if (!detail::is_permutation_of_lanes(wp.profile.preference_order, it->lane_count))
          errs.push_back({p + ".preference", "must be a permutation of the station's lanes"});
        if (wp.profile.switch_threshold < 0) errs.push_back({p + ".switch_threshold", "must be >= 0"});
      }
      if (r.agent_profiles.empty()) errs.push_back({"routing.agent_profiles", "at least one driver profile"});
    }
  }

  if (!errs.empty()) return {std::nullopt, std::move(errs)};

  topo.resolved.resize(st.size());
  for (std::size_t s = 0; s < st.size(); ++s) {
    topo.resolved[s].resize(cfg.classes.size());
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
      const auto it = st[s].admissible_lanes.find(cfg.classes[c].id);
      if (it == st[s].admissible_lanes.end()) continue;
      LaneSet lanes = it->second;
      std::sort(lanes.begin(), lanes.end());
      topo.resolved[s][c] = std::move(lanes);
    }
  }
  return {std::move(topo), {}};
}

/// Full scenario validation: topology plus the experiment and detection
/// sections, which refer to measurement points.
inline std::vector<ValidationIssue> validate_scenario(const ScenarioConfig& cfg) {
  auto result = validate_topology(cfg);
  auto errs = std::move(result.errors);
  if (!result.ok()) return errs;
  const auto& topo = *result.topology;

  if (cfg.experiment) {
    const auto& e = *cfg.experiment;
    for (std::size_t i = 0; i < e.flow_rates.size(); ++i)
      if (!(e.flow_rates[i] > 0.0))
        errs.push_back({"experiment.flow_rates[" + std::to_string(i) + "]", "rate must be > 0"});
    if (!(e.profile_duration_s > 0.0)) errs.push_back({"experiment.profile_duration_s", "must be > 0"});
    if (!topo.resolve_point(e.trip_from))
      errs.push_back({"experiment.trip_from", "unknown measurement point '" + e.trip_from + "'"});
    if (!topo.resolve_point(e.trip_to))
      errs.push_back({"experiment.trip_to", "unknown measurement point '" + e.trip_to + "'"});
    std::size_t lanes = 0;
    if (topo.routed_station) lanes = static_cast<std::size_t>(topo.stations[*topo.routed_station].lane_count);
    if (!e.observed_average.empty())
      detail::check_shares(e.observed_average, lanes, "experiment.observed_average", errs);
    if (!e.observed_by_band.bands.empty())
      detail::check_table(e.observed_by_band, lanes, "experiment.observed_by_band", errs);
  }

  if (cfg.detection) {
    const auto& d = *cfg.detection;
    for (std::size_t i = 0; i < d.sites.size(); ++i) {
      const std::string p = "detection.sites[" + std::to_string(i) + "]";
      if (!topo.resolve_point(d.sites[i].location))
        errs.push_back({p + ".location", "unknown measurement point '" + d.sites[i].location + "'"});
      const double q = d.sites[i].detection_probability;
      if (!(q >= 0.0 && q <= 1.0)) errs.push_back({p + ".detection_probability", "must lie in [0, 1]"});
    }
    detail::check_shares(d.device_distribution, 0, "detection.device_distribution", errs);
    if (d.device_distribution.empty() || d.device_distribution.size() > 3)
      errs.push_back({"detection.device_distribution", "expects probabilities for 0, 1 and 2 devices"});
    if (!(d.dedupe_window_s >= 0.0)) errs.push_back({"detection.dedupe_window_s", "must be >= 0"});
    if (!(d.max_trip_s > 0.0)) errs.push_back({"detection.max_trip_s", "must be > 0"});
    if (!(d.camera_window_end_s > d.camera_window_start_s))
      errs.push_back({"detection.camera_window_end_s", "must exceed camera_window_start_s"});
  }
  return errs;
}

/// Validate a scenario and build its topology, throwing on any issue.
inline NetworkTopology build_topology(const ScenarioConfig& cfg) {
  auto issues = validate_scenario(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return *validate_topology(cfg).topology;
}

// ---------------------------------------------------------------------------
// Document form
//
// Scenario documents are YAML; since YAML is a superset of JSON the same
// reader accepts the JSON form. The grammar is documented in
// docs/scenario-format.md. `serialize_scenario` writes the canonical form
// (fixed key order, shortest round-trip numbers).

namespace detail {

class DocReader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ParseError(path + ": " + what);
  }

  template <typename T>
  static T scalar(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(path, "expected a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(path, "cannot convert '" + n.Scalar() + "'");
    }
  }

  template <typename T>
  static T get(const YAML::Node& map, const char* key, const std::string& path, T fallback) {
    const auto n = map[key];
    if (!n) return fallback;
    return scalar<T>(n, path + "." + key);
  }

  template <typename T>
  static T require(const YAML::Node& map, const char* key, const std::string& path) {
    const auto n = map[key];
    if (!n) fail(path + "." + key, "missing required key");
    return scalar<T>(n, path + "." + key);
  }

  template <typename T>
  static std::vector<T> list(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence()) fail(path, "expected a list");
    std::vector<T> out;
    out.reserve(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar<T>(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  static void require_map(const YAML::Node& n, const std::string& path) {
    if (!n.IsMap()) fail(path, "expected a mapping");
  }
};

inline VehicleClassId class_from(const std::string& s, const std::string& path) {
  const auto c = parse_vehicle_class(s);
  if (!c) DocReader::fail(path, "unknown vehicle class '" + s + "'");
  return *c;
}

inline OccupancyTable read_table(const YAML::Node& n, const std::string& path) {
  using R = DocReader;
  if (!n.IsSequence()) R::fail(path, "expected a list of bands");
  OccupancyTable t;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    R::require_map(n[i], p);
    const auto label_s = R::require<std::string>(n[i], "label", p);
    const auto label = parse_band_label(label_s);
    if (!label) R::fail(p + ".label", "unknown band label '" + label_s + "'");
    FlowBand b{*label, R::get<double>(n[i], "lower", p, 0.0), R::get<double>(n[i], "upper", p, kInfiniteRate)};
    t.bands.push_back(b);
    if (!n[i]["shares"]) R::fail(p + ".shares", "missing required key");
    t.shares.push_back(R::list<double>(n[i]["shares"], p + ".shares"));
  }
  return t;
}

inline ServiceModel read_service(const YAML::Node& n, const std::string& path) {
  using R = DocReader;
  R::require_map(n, path);
  ServiceModel m;
  const auto dist = R::require<std::string>(n, "distribution", path);
  if (dist == "NormalTruncated") {
    m.distribution = NormalTruncated{R::require<double>(n, "mean_s", path), R::require<double>(n, "sd_s", path)};
  } else if (dist == "Deterministic") {
    m.distribution = Deterministic{R::require<double>(n, "value_s", path)};
  } else if (dist == "Exponential") {
    m.distribution = Exponential{R::require<double>(n, "mean_s", path)};
  } else {
    R::fail(path + ".distribution", "unknown distribution '" + dist + "'");
  }
  m.security_check_probability = R::get<double>(n, "security_probability", path, 0.0);
  m.security_check_delay_s = R::get<double>(n, "security_delay_s", path, 0.0);
  return m;
}

inline std::vector<VehicleClass> default_classes() {
  return {VehicleClass{VehicleClassId::RHV, 17.0, true, false},
          VehicleClass{VehicleClassId::Tourist, 6.0, false, true}};
}

inline ScenarioConfig read_scenario(const YAML::Node& root) {
  using R = DocReader;
  if (!root || root.IsNull()) R::fail("<document>", "empty document");
  R::require_map(root, "<document>");
  ScenarioConfig cfg;
  cfg.name = R::get<std::string>(root, "name", "", "scenario");
  cfg.drain = R::get<bool>(root, "drain", "", true);
  cfg.warmup_s = R::get<double>(root, "warmup_s", "", 900.0);
  cfg.sample_interval_s = R::get<double>(root, "sample_interval_s", "", 10.0);

  if (const auto n = root["classes"]) {
    if (!n.IsSequence()) R::fail("classes", "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string p = "classes[" + std::to_string(i) + "]";
      R::require_map(n[i], p);
      VehicleClass c;
      c.id = class_from(R::require<std::string>(n[i], "id", p), p + ".id");
      const bool rhv = c.id == VehicleClassId::RHV;
      c.effective_length_m = R::get<double>(n[i], "effective_length_m", p, rhv ? 17.0 : 6.0);
      c.visits_weighbridge = R::get<bool>(n[i], "visits_weighbridge", p, rhv);
      c.visits_tourist_checkin = R::get<bool>(n[i], "visits_tourist_checkin", p, !rhv);
      cfg.classes.push_back(c);
    }
  } else {
    cfg.classes = default_classes();
  }

  const auto stations = root["stations"];
  if (!stations) R::fail("stations", "missing required key");
  if (!stations.IsSequence()) R::fail("stations", "expected a list");
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const std::string p = "stations[" + std::to_string(i) + "]";
    const auto& n = stations[i];
    R::require_map(n, p);
    Station s;
    s.id = R::require<std::string>(n, "id", p);
    const auto kind_s = R::require<std::string>(n, "kind", p);
    const auto kind = parse_station_kind(kind_s);
    if (!kind) R::fail(p + ".kind", "unknown station kind '" + kind_s + "'");
    s.kind = *kind;
    s.lane_count = R::require<int>(n, "lanes", p);
    s.approach_capacity_m = R::get<double>(n, "approach_capacity_m", p, 100.0);
    s.shared_queue = R::get<bool>(n, "shared_queue", p, false);
    s.uncalibrated = R::get<bool>(n, "uncalibrated", p, false);
    if (!n["service"]) R::fail(p + ".service", "missing required key");
    s.service = read_service(n["service"], p + ".service");
    if (const auto a = n["admissible"]) {
      R::require_map(a, p + ".admissible");
      for (const auto& kv : a) {
        const auto key = kv.first.as<std::string>();
        const auto cls = class_from(key, p + ".admissible");
        s.admissible_lanes[cls] = R::list<int>(kv.second, p + ".admissible." + key);
      }
    } else {
      // Every lane for every class; classes that skip the weighbridge bypass it.
      LaneSet all(static_cast<std::size_t>(std::max(s.lane_count, 0)));
      std::iota(all.begin(), all.end(), 1);
      for (const auto& c : cfg.classes) {
        const bool bypass = s.kind == StationKind::Weighbridge && !c.visits_weighbridge;
        s.admissible_lanes[c.id] = bypass ? LaneSet{} : all;
      }
    }
    cfg.stations.push_back(std::move(s));
  }

  const auto segments = root["segments"];
  if (!segments) R::fail("segments", "missing required key");
  if (!segments.IsSequence()) R::fail("segments", "expected a list");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::string p = "segments[" + std::to_string(i) + "]";
    const auto& n = segments[i];
    R::require_map(n, p);
    Segment s;
    s.id = R::get<std::string>(n, "id", p, "seg" + std::to_string(i));
    s.from = R::require<std::string>(n, "from", p);
    s.to = R::require<std::string>(n, "to", p);
    s.free_flow_s = R::require<double>(n, "free_flow_s", p);
    s.storage_m = R::require<double>(n, "storage_m", p);
    cfg.segments.push_back(std::move(s));
  }

  if (const auto d = root["demand"]) {
    R::require_map(d, "demand");
    cfg.demand.bin_width_s = R::get<double>(d, "bin_width_s", "demand", 120.0);
    if (const auto c = d["counts"]) {
      R::require_map(c, "demand.counts");
      for (const auto& kv : c) {
        const auto key = kv.first.as<std::string>();
        const auto cls = class_from(key, "demand.counts");
        cfg.demand.counts[cls] = R::list<long long>(kv.second, "demand.counts." + key);
      }
    }
  }
  cfg.horizon_s = R::get<double>(root, "horizon_s", "", cfg.demand.span_s());

  if (const auto r = root["routing"]) {
    R::require_map(r, "routing");
    RoutingConfig rc;
    rc.station = R::require<std::string>(r, "station", "routing");
    rc.rate_window_s = R::get<double>(r, "rate_window_s", "routing", 900.0);
    if (!r["average_shares"]) R::fail("routing.average_shares", "missing required key");
    rc.average_shares = R::list<double>(r["average_shares"], "routing.average_shares");
    if (!r["flow_specific"]) R::fail("routing.flow_specific", "missing required key");
    rc.flow_specific = read_table(r["flow_specific"], "routing.flow_specific");
    if (const auto a = r["agent_profiles"]) {
      if (!a.IsSequence()) R::fail("routing.agent_profiles", "expected a list");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string p = "routing.agent_profiles[" + std::to_string(i) + "]";
        R::require_map(a[i], p);
        WeightedProfile wp;
        wp.weight = R::get<double>(a[i], "weight", p, 1.0);
        if (!a[i]["preference"]) R::fail(p + ".preference", "missing required key");
        wp.profile.preference_order = R::list<int>(a[i]["preference"], p + ".preference");
        wp.profile.switch_threshold = R::get<int>(a[i], "switch_threshold", p, 2);
        wp.profile.lookahead = R::get<bool>(a[i], "lookahead", p, true);
        rc.agent_profiles.push_back(std::move(wp));
      }
    }
    cfg.routing = std::move(rc);
  }

  if (const auto e = root["experiment"]) {
    R::require_map(e, "experiment");
    ExperimentConfig ex;
    if (!e["flow_rates"]) R::fail("experiment.flow_rates", "missing required key");
    ex.flow_rates = R::list<double>(e["flow_rates"], "experiment.flow_rates");
    ex.profile_duration_s = R::get<double>(e, "profile_duration_s", "experiment", 10800.0);
    ex.profile_seed = R::get<std::uint64_t>(e, "profile_seed", "experiment", 2009);
    ex.profile_class = class_from(R::get<std::string>(e, "profile_class", "experiment", "RHV"),
                                  "experiment.profile_class");
    ex.trip_from = R::require<std::string>(e, "trip_from", "experiment");
    ex.trip_to = R::require<std::string>(e, "trip_to", "experiment");
    if (const auto o = e["observed_average"]) ex.observed_average = R::list<double>(o, "experiment.observed_average");
    if (const auto o = e["observed_by_band"]) ex.observed_by_band = read_table(o, "experiment.observed_by_band");
    if (const auto t = e["reference_trip_mean_s"]) {
      if (!t.IsSequence()) R::fail("experiment.reference_trip_mean_s", "expected a list");
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string p = "experiment.reference_trip_mean_s[" + std::to_string(i) + "]";
        R::require_map(t[i], p);
        ex.reference_trip_mean_s[R::require<double>(t[i], "rate", p)] = R::require<double>(t[i], "mean_s", p);
      }
    }
    cfg.experiment = std::move(ex);
  }

  if (const auto d = root["detection"]) {
    R::require_map(d, "detection");
    DetectionConfig dc;
    if (const auto s = d["sites"]) {
      if (!s.IsSequence()) R::fail("detection.sites", "expected a list");
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string p = "detection.sites[" + std::to_string(i) + "]";
        R::require_map(s[i], p);
        dc.sites.push_back({R::require<std::string>(s[i], "id", p), R::require<std::string>(s[i], "location", p),
                            R::get<double>(s[i], "detection_probability", p, 1.0)});
      }
    }
    if (const auto dd = d["device_distribution"])
      dc.device_distribution = R::list<double>(dd, "detection.device_distribution");
    dc.dedupe_window_s = R::get<double>(d, "dedupe_window_s", "detection", 5.0);
    dc.max_trip_s = R::get<double>(d, "max_trip_s", "detection", 3600.0);
    dc.camera_window_start_s = R::get<double>(d, "camera_window_start_s", "detection", 0.0);
    dc.camera_window_end_s = R::get<double>(d, "camera_window_end_s", "detection", kInfiniteRate);
    if (const auto ref = d["reference_simulation"]) {
      const std::string p = "detection.reference_simulation";
      R::require_map(ref, p);
      dc.reference_simulation =
          TripSummaryTarget{R::require<double>(ref, "mean_s", p), R::require<double>(ref, "median_s", p),
                            R::require<double>(ref, "sd_s", p), R::require<double>(ref, "max_s", p)};
    }
    cfg.detection = std::move(dc);
  }
  return cfg;
}

inline std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline YAML::Emitter& emit_numbers(YAML::Emitter& out, const std::vector<double>& xs) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : xs) out << number(x);
  return out << YAML::EndSeq;
}

template <typename Int>
YAML::Emitter& emit_ints(YAML::Emitter& out, const std::vector<Int>& xs) {
  out << YAML::Flow << YAML::BeginSeq;
  for (auto x : xs) out << std::to_string(x);
  return out << YAML::EndSeq;
}

inline void emit_table(YAML::Emitter& out, const OccupancyTable& t) {
  out << YAML::BeginSeq;
  for (std::size_t i = 0; i < t.bands.size(); ++i) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "label" << YAML::Value << std::string(to_string(t.bands[i].label));
    out << YAML::Key << "lower" << YAML::Value << number(t.bands[i].lower);
    if (t.bands[i].upper != kInfiniteRate) out << YAML::Key << "upper" << YAML::Value << number(t.bands[i].upper);
    out << YAML::Key << "shares" << YAML::Value;
    emit_numbers(out, i < t.shares.size() ? t.shares[i] : std::vector<double>{});
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

}  // namespace detail

/// Parse a scenario document (YAML or JSON) and validate it.
/// Throws ParseError for malformed documents and ValidationError (carrying
/// every issue found) for invariant violations.
inline ScenarioConfig load_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
  ScenarioConfig cfg = detail::read_scenario(root);
  auto issues = validate_scenario(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

/// Canonical document form; load_scenario(serialize_scenario(c)) == c.
inline std::string serialize_scenario(const ScenarioConfig& cfg) {
  using detail::number;
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;
  out << YAML::Key << "horizon_s" << YAML::Value << number(cfg.horizon_s);
  out << YAML::Key << "drain" << YAML::Value << cfg.drain;
  out << YAML::Key << "warmup_s" << YAML::Value << number(cfg.warmup_s);
  out << YAML::Key << "sample_interval_s" << YAML::Value << number(cfg.sample_interval_s);

  out << YAML::Key << "classes" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : cfg.classes) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << std::string(to_string(c.id));
    out << YAML::Key << "effective_length_m" << YAML::Value << number(c.effective_length_m);
    out << YAML::Key << "visits_weighbridge" << YAML::Value << c.visits_weighbridge;
    out << YAML::Key << "visits_tourist_checkin" << YAML::Value << c.visits_tourist_checkin;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "stations" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.stations) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << s.id;
    out << YAML::Key << "kind" << YAML::Value << std::string(to_string(s.kind));
    out << YAML::Key << "lanes" << YAML::Value << s.lane_count;
    out << YAML::Key << "approach_capacity_m" << YAML::Value << number(s.approach_capacity_m);
    out << YAML::Key << "shared_queue" << YAML::Value << s.shared_queue;
    out << YAML::Key << "uncalibrated" << YAML::Value << s.uncalibrated;
    out << YAML::Key << "service" << YAML::Value << YAML::Flow << YAML::BeginMap;
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, NormalTruncated>) {
            out << YAML::Key << "distribution" << YAML::Value << "NormalTruncated";
            out << YAML::Key << "mean_s" << YAML::Value << number(d.mean_s);
            out << YAML::Key << "sd_s" << YAML::Value << number(d.sd_s);
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            out << YAML::Key << "distribution" << YAML::Value << "Deterministic";
            out << YAML::Key << "value_s" << YAML::Value << number(d.value_s);
          } else {
            out << YAML::Key << "distribution" << YAML::Value << "Exponential";
            out << YAML::Key << "mean_s" << YAML::Value << number(d.mean_s);
          }
        },
        s.service.distribution);
    out << YAML::Key << "security_probability" << YAML::Value << number(s.service.security_check_probability);
    out << YAML::Key << "security_delay_s" << YAML::Value << number(s.service.security_check_delay_s);
    out << YAML::EndMap;
    out << YAML::Key << "admissible" << YAML::Value << YAML::BeginMap;
    for (const auto& [cls, lanes] : s.admissible_lanes) {
      out << YAML::Key << std::string(to_string(cls)) << YAML::Value;
      detail::emit_ints(out, lanes);
    }
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "segments" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.segments) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << s.id;
    out << YAML::Key << "from" << YAML::Value << s.from;
    out << YAML::Key << "to" << YAML::Value << s.to;
    out << YAML::Key << "free_flow_s" << YAML::Value << number(s.free_flow_s);
    out << YAML::Key << "storage_m" << YAML::Value << number(s.storage_m);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "demand" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "bin_width_s" << YAML::Value << number(cfg.demand.bin_width_s);
  out << YAML::Key << "counts" << YAML::Value << YAML::BeginMap;
  for (const auto& [cls, counts] : cfg.demand.counts) {
    out << YAML::Key << std::string(to_string(cls)) << YAML::Value;
    detail::emit_ints(out, counts);
  }
  out << YAML::EndMap << YAML::EndMap;

  if (cfg.routing) {
    const auto& r = *cfg.routing;
    out << YAML::Key << "routing" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "station" << YAML::Value << r.station;
    out << YAML::Key << "rate_window_s" << YAML::Value << number(r.rate_window_s);
    out << YAML::Key << "average_shares" << YAML::Value;
    detail::emit_numbers(out, r.average_shares);
    out << YAML::Key << "flow_specific" << YAML::Value;
    detail::emit_table(out, r.flow_specific);
    out << YAML::Key << "agent_profiles" << YAML::Value << YAML::BeginSeq;
    for (const auto& wp : r.agent_profiles) {
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "weight" << YAML::Value << number(wp.weight);
      out << YAML::Key << "preference" << YAML::Value;
      detail::emit_ints(out, wp.profile.preference_order);
      out << YAML::Key << "switch_threshold" << YAML::Value << wp.profile.switch_threshold;
      out << YAML::Key << "lookahead" << YAML::Value << wp.profile.lookahead;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }

  if (cfg.experiment) {
    const auto& e = *cfg.experiment;
    out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "flow_rates" << YAML::Value;
    detail::emit_numbers(out, e.flow_rates);
    out << YAML::Key << "profile_duration_s" << YAML::Value << number(e.profile_duration_s);
    out << YAML::Key << "profile_seed" << YAML::Value << std::to_string(e.profile_seed);
    out << YAML::Key << "profile_class" << YAML::Value << std::string(to_string(e.profile_class));
    out << YAML::Key << "trip_from" << YAML::Value << e.trip_from;
    out << YAML::Key << "trip_to" << YAML::Value << e.trip_to;
    if (!e.observed_average.empty()) {
      out << YAML::Key << "observed_average" << YAML::Value;
      detail::emit_numbers(out, e.observed_average);
    }
    if (!e.observed_by_band.bands.empty()) {
      out << YAML::Key << "observed_by_band" << YAML::Value;
      detail::emit_table(out, e.observed_by_band);
    }
    if (!e.reference_trip_mean_s.empty()) {
      out << YAML::Key << "reference_trip_mean_s" << YAML::Value << YAML::BeginSeq;
      for (const auto& [rate, m] : e.reference_trip_mean_s) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "rate" << YAML::Value << number(rate);
        out << YAML::Key << "mean_s" << YAML::Value << number(m);
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }

  if (cfg.detection) {
    const auto& d = *cfg.detection;
    out << YAML::Key << "detection" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "sites" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : d.sites) {
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "id" << YAML::Value << s.id;
      out << YAML::Key << "location" << YAML::Value << s.location;
      out << YAML::Key << "detection_probability" << YAML::Value << number(s.detection_probability);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "device_distribution" << YAML::Value;
    detail::emit_numbers(out, d.device_distribution);
    out << YAML::Key << "dedupe_window_s" << YAML::Value << number(d.dedupe_window_s);
    out << YAML::Key << "max_trip_s" << YAML::Value << number(d.max_trip_s);
    out << YAML::Key << "camera_window_start_s" << YAML::Value << number(d.camera_window_start_s);
    out << YAML::Key << "camera_window_end_s" << YAML::Value << number(d.camera_window_end_s);
    if (d.reference_simulation) {
      const auto& t = *d.reference_simulation;
      out << YAML::Key << "reference_simulation" << YAML::Value << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "mean_s" << YAML::Value << number(t.mean_s);
      out << YAML::Key << "median_s" << YAML::Value << number(t.median_s);
      out << YAML::Key << "sd_s" << YAML::Value << number(t.sd_s);
      out << YAML::Key << "max_s" << YAML::Value << number(t.max_s);
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string scenario_hash(const ScenarioConfig& cfg) {
  const std::string text = serialize_scenario(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = kHex[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

}  // namespace portsim
