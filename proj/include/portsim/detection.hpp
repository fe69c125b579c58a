#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "portsim/csv.hpp"
#include "portsim/engine.hpp"
#include "portsim/metrics.hpp"
#include "portsim/stats.hpp"

namespace portsim {

struct DetectionEvent {
  std::string site;
  std::uint64_t device_id = 0;
  std::uint64_t vehicle_id = 0;  // ground truth, never used for matching
  double timestamp_s = 0.0;

  bool operator==(const DetectionEvent&) const = default;
};

struct DetectionLog {
  std::vector<DetectionEvent> events;  // sorted by (timestamp, device id)

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  bool operator==(const DetectionLog&) const = default;
};

struct MatchedTrip {
  std::uint64_t device_id = 0;
  std::uint64_t vehicle_id = 0;
  double t1_s = 0.0;
  double t2_s = 0.0;
  double trip_s() const { return t2_s - t1_s; }
};

using MatchedTrips = std::vector<MatchedTrip>;

/// Devices carried per vehicle, indexed by vehicle id. Drawn once per run so
/// a vehicle carries the same devices past every site.
struct DeviceAssignment {
  std::vector<int> counts;

  static std::uint64_t device_id(std::uint64_t vehicle, int k) { return vehicle * 2 + static_cast<std::uint64_t>(k); }
};

inline void check_device_distribution(std::span<const double> dist) {
  if (dist.size() != 3) throw std::invalid_argument("device distribution covers 0, 1 and 2 devices");
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("device probabilities must lie in [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("device distribution must sum to 1");
}

inline DeviceAssignment assign_devices(const RunResult& r, std::span<const double> distribution, RandomStream& rng) {
  check_device_distribution(distribution);
  DeviceAssignment d;
  d.counts.reserve(r.trips.size());
  for (std::size_t v = 0; v < r.trips.size(); ++v) {
    const double u = rng.uniform();
    d.counts.push_back(u < distribution[0] ? 0 : u < distribution[0] + distribution[1] ? 1 : 2);
  }
  return d;
}

inline void sort_log(DetectionLog& log) {
  std::sort(log.events.begin(), log.events.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
    return a.timestamp_s != b.timestamp_s ? a.timestamp_s < b.timestamp_s : a.device_id < b.device_id;
  });
}

/// Each device of each vehicle passing `point` is registered independently
/// with the site's detection probability, at the vehicle's passage time.
/// One uniform is consumed per device whatever the outcome.
inline DetectionLog simulate_detections(const RunResult& r, const MeasurementPoint& point, const DetectorSite& site,
                                        const DeviceAssignment& devices, RandomStream& rng) {
  if (!(site.detection_probability >= 0.0 && site.detection_probability <= 1.0))
    throw std::invalid_argument("detection probability must lie in [0, 1]");
  if (devices.counts.size() != r.trips.size()) throw std::invalid_argument("device assignment does not match run");
  DetectionLog log;
  for (const auto& t : r.trips) {
    const auto when = t.passage(point);
    for (int k = 0; k < devices.counts[t.vehicle_id]; ++k) {
      const double u = rng.uniform();
      if (when && u < site.detection_probability)
        log.events.push_back({site.id, DeviceAssignment::device_id(t.vehicle_id, k), t.vehicle_id, *when});
    }
  }
  sort_log(log);
  return log;
}

inline DetectionLog simulate_detections(const RunResult& r, const NetworkTopology& topo, const DetectorSite& site,
                                        const DeviceAssignment& devices, RandomStream& rng) {
  const auto point = topo.resolve_point(site.location);
  if (!point) throw std::invalid_argument("unknown detector location '" + site.location + "'");
  return simulate_detections(r, *point, site, devices, rng);
}

/// Keep the earliest of a vehicle's co-travelling signals at a site; later
/// signals from the same vehicle within `window_s` of the kept one are
/// dropped. A window of zero disables deduplication.
inline DetectionLog dedupe(const DetectionLog& log, double window_s) {
  if (window_s < 0.0) throw std::invalid_argument("dedupe window must be non-negative");
  DetectionLog out = log;
  sort_log(out);
  if (window_s == 0.0) return out;
  std::map<std::pair<std::string, std::uint64_t>, double> kept_at;
  std::vector<DetectionEvent> kept;
  for (const auto& e : out.events) {
    const auto key = std::make_pair(e.site, e.vehicle_id);
    const auto it = kept_at.find(key);
    if (it != kept_at.end() && e.timestamp_s - it->second <= window_s) continue;
    kept_at[key] = e.timestamp_s;
    kept.push_back(e);
  }
  out.events = std::move(kept);
  return out;
}

/// One match per device: its earliest first-site event paired with the
/// earliest second-site event 0 < t2 - t1 <= max_trip_s.
inline MatchedTrips match_trips(const DetectionLog& log1, const DetectionLog& log2, double max_trip_s) {
  std::map<std::uint64_t, std::vector<const DetectionEvent*>> second;
  for (const auto& e : log2.events) second[e.device_id].push_back(&e);
  for (auto& [id, v] : second)
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->timestamp_s < b->timestamp_s; });

  std::vector<const DetectionEvent*> first;
  for (const auto& e : log1.events) first.push_back(&e);
  std::stable_sort(first.begin(), first.end(), [](auto* a, auto* b) { return a->timestamp_s < b->timestamp_s; });

  MatchedTrips out;
  std::map<std::uint64_t, bool> done;
  for (const auto* a : first) {
    if (done[a->device_id]) continue;
    const auto it = second.find(a->device_id);
    if (it == second.end()) continue;
    for (const auto* b : it->second) {
      const double dt = b->timestamp_s - a->timestamp_s;
      if (dt > 0.0 && dt <= max_trip_s) {
        out.push_back({a->device_id, a->vehicle_id, a->timestamp_s, b->timestamp_s});
        done[a->device_id] = true;
        break;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const MatchedTrip& a, const MatchedTrip& b) {
    return a.t1_s != b.t1_s ? a.t1_s < b.t1_s : a.device_id < b.device_id;
  });
  return out;
}

inline std::vector<double> trip_times_of(const MatchedTrips& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (const auto& t : m) out.push_back(t.trip_s());
  return out;
}

/// Normalized histogram; bin k covers [origin + k * bin, origin + (k + 1) * bin)
/// with the origin at the bin boundary below the smallest value.
struct TripPdf {
  double bin_width_s = 60.0;
  double origin_s = 0.0;
  std::vector<double> masses;

  bool empty() const { return masses.empty(); }
  double mean_estimate() const {
    double m = 0.0;
    for (std::size_t k = 0; k < masses.size(); ++k)
      m += masses[k] * (origin_s + (static_cast<double>(k) + 0.5) * bin_width_s);
    return m;
  }
};

inline TripPdf trip_pdf(std::span<const double> trips, double bin_s) {
  if (!(bin_s > 0.0)) throw std::invalid_argument("bin width must be positive");
  TripPdf pdf;
  pdf.bin_width_s = bin_s;
  if (trips.empty()) return pdf;
  const double lo = *std::min_element(trips.begin(), trips.end());
  pdf.origin_s = std::floor(lo / bin_s) * bin_s;
  for (double t : trips) {
    const auto k = static_cast<std::size_t>(std::floor((t - pdf.origin_s) / bin_s));
    if (k >= pdf.masses.size()) pdf.masses.resize(k + 1, 0.0);
    pdf.masses[k] += 1.0;
  }
  for (auto& m : pdf.masses) m /= static_cast<double>(trips.size());
  return pdf;
}

inline TripPdf trip_pdf(const MatchedTrips& m, double bin_s) { return trip_pdf(trip_times_of(m), bin_s); }

// ---------------------------------------------------------------------------
// Source comparison

struct TripSource {
  std::string name;
  std::vector<double> samples;
};

struct SourceRow {
  std::string name;
  TripTimeSummary summary;
};

struct SourcePair {
  std::string a;
  std::string b;
  stats::KsResult ks;
  bool rejected = false;
};

struct TripSourceComparison {
  double alpha = 0.05;
  std::vector<SourceRow> rows;
  std::vector<SourcePair> pairs;

  const SourceRow& row(std::string_view name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw std::out_of_range("no source '" + std::string(name) + "'");
  }
  const SourcePair& pair(std::string_view a, std::string_view b) const {
    for (const auto& p : pairs)
      if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return p;
    throw std::out_of_range("no such source pair");
  }
};

inline TripSourceComparison compare_trip_sources(const std::vector<TripSource>& sources, double alpha = 0.05) {
  TripSourceComparison c;
  c.alpha = alpha;
  for (const auto& s : sources) {
    if (s.samples.empty()) throw std::invalid_argument("source '" + s.name + "' has no samples");
    c.rows.push_back({s.name, summarize(s.samples)});
  }
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j) {
      const auto ks = stats::ks_two_sample(sources[i].samples, sources[j].samples);
      c.pairs.push_back({sources[i].name, sources[j].name, ks, ks.p_value < alpha});
    }
  return c;
}

// ---------------------------------------------------------------------------
// Validation run

/// Full-visibility observation: every vehicle whose first-site passage falls
/// inside [start, end) and that reached the second site.
inline MatchedTrips camera_trips(const RunResult& r, const MeasurementPoint& p1, const MeasurementPoint& p2,
                                 double start_s, double end_s) {
  MatchedTrips out;
  for (const auto& t : r.trips) {
    const auto a = t.passage(p1);
    const auto b = t.passage(p2);
    if (!a || !b || *a < start_s || *a >= end_s) continue;
    out.push_back({t.vehicle_id, t.vehicle_id, *a, *b});
  }
  return out;
}

struct ValidationReport {
  RunResult run;
  DetectionLog raw1, raw2;
  DetectionLog log1, log2;
  MatchedTrips bluetooth;
  MatchedTrips camera;
  std::vector<double> simulation;
  TripSourceComparison comparison;
};

inline constexpr std::string_view kSimulationSource = "Simulation";
inline constexpr std::string_view kBluetoothSource = "Bluetooth";
inline constexpr std::string_view kCameraSource = "Camera";

/// Simulate, observe with both detector sites and a camera, match, and
/// compare the three trip-time sources. Detection draws come from the
/// run's detection substream.
inline ValidationReport validate(const ScenarioConfig& scenario, const PolicyKind& policy, std::uint64_t seed,
                                 const RunOptions& options = {}, std::optional<double> dedupe_window_s = {}) {
  if (!scenario.detection || scenario.detection->sites.size() != 2)
    throw std::invalid_argument("validation needs exactly two detector sites");
  const auto& d = *scenario.detection;
  const NetworkTopology topo = build_topology(scenario);
  const auto p1 = *topo.resolve_point(d.sites[0].location);
  const auto p2 = *topo.resolve_point(d.sites[1].location);

  ValidationReport rep;
  rep.run = run(scenario, policy, seed, options);
  RandomStream rng(seed, StreamId::Detection);
  const auto devices = assign_devices(rep.run, d.device_distribution, rng);
  rep.raw1 = simulate_detections(rep.run, p1, d.sites[0], devices, rng);
  rep.raw2 = simulate_detections(rep.run, p2, d.sites[1], devices, rng);
  const double window = dedupe_window_s.value_or(d.dedupe_window_s);
  rep.log1 = dedupe(rep.raw1, window);
  rep.log2 = dedupe(rep.raw2, window);
  rep.bluetooth = match_trips(rep.log1, rep.log2, d.max_trip_s);
  rep.camera = camera_trips(rep.run, p1, p2, d.camera_window_start_s, d.camera_window_end_s);
  rep.simulation = trip_times(rep.run, p1, p2);

  std::vector<TripSource> sources{{std::string(kSimulationSource), rep.simulation}};
  if (!rep.bluetooth.empty()) sources.push_back({std::string(kBluetoothSource), trip_times_of(rep.bluetooth)});
  if (!rep.camera.empty()) sources.push_back({std::string(kCameraSource), trip_times_of(rep.camera)});
  rep.comparison = compare_trip_sources(sources);
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string log_to_csv(const DetectionLog& log) {
  std::string out = "site,device_id,timestamp_s\n";
  for (const auto& e : log.events)
    out += e.site + "," + std::to_string(e.device_id) + "," + csv::num(e.timestamp_s) + "\n";
  return out;
}

inline std::string matches_to_csv(const MatchedTrips& m) {
  std::string out = "device_id,t1_s,t2_s,trip_s\n";
  for (const auto& t : m)
    out += std::to_string(t.device_id) + "," + csv::num(t.t1_s) + "," + csv::num(t.t2_s) + "," + csv::num(t.trip_s()) +
           "\n";
  return out;
}

inline std::string pdf_to_csv(const TripPdf& pdf) {
  std::string out = "bin_start_s,mass\n";
  for (std::size_t k = 0; k < pdf.masses.size(); ++k)
    out += csv::num(pdf.origin_s + static_cast<double>(k) * pdf.bin_width_s) + "," + csv::num(pdf.masses[k]) + "\n";
  return out;
}

inline std::string summary_to_csv(const TripSourceComparison& c) {
  std::string out = "source,n,mean_s,median_s,sd_s,max_s\n";
  for (const auto& r : c.rows)
    out += r.name + "," + std::to_string(r.summary.n) + "," + csv::num(r.summary.mean) + "," +
           csv::num(r.summary.median) + "," + csv::num(r.summary.sd) + "," + csv::num(r.summary.max) + "\n";
  return out;
}

inline std::string ks_to_csv(const TripSourceComparison& c) {
  std::string out = "source_a,source_b,ks_distance,p_value,rejected\n";
  for (const auto& p : c.pairs)
    out += p.a + "," + p.b + "," + csv::num(p.ks.statistic) + "," + csv::num(p.ks.p_value) + "," +
           (p.rejected ? "true" : "false") + "\n";
  return out;
}

}  // namespace portsim
