#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "portsim/csv.hpp"
#include "portsim/rng.hpp"
#include "portsim/types.hpp"

namespace portsim {

struct ArrivalEntry {
  double timestamp_s = 0.0;
  VehicleClassId cls = VehicleClassId::RHV;
  std::uint64_t vehicle_id = 0;

  bool operator==(const ArrivalEntry&) const = default;
};

/// Entries sorted by (timestamp, vehicle_id); ids are 0..n-1.
struct ArrivalSchedule {
  std::vector<ArrivalEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const ArrivalSchedule&) const = default;
};

struct FlowSeries {
  double window_s = 900.0;
  std::vector<long long> counts;

  long long total() const {
    long long t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// Counts of values in [k * bin_width, (k + 1) * bin_width).
struct Histogram {
  double bin_width = 1.0;
  std::vector<long long> counts;

  long long total() const {
    long long t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// Place exactly counts[b] vehicles in each bin b. Within a bin the
/// timestamps are the order statistics of independent uniforms, which is
/// the law of a Poisson process conditioned on its count.
inline ArrivalSchedule arrivals_from_bins(const DemandBins& bins, RandomStream& rng) {
  ArrivalSchedule out;
  const double w = bins.bin_width_s;
  const std::size_t nbins = bins.bin_count();
  std::vector<ArrivalEntry> bin_entries;
  for (std::size_t b = 0; b < nbins; ++b) {
    const double start = static_cast<double>(b) * w;
    const double end = static_cast<double>(b + 1) * w;
    bin_entries.clear();
    for (const auto& [cls, counts] : bins.counts) {
      const long long n = b < counts.size() ? counts[b] : 0;
      for (long long k = 0; k < n; ++k) {
        double t = start + rng.uniform() * w;
        if (t >= end) t = std::nextafter(end, start);
        bin_entries.push_back({t, cls, 0});
      }
    }
    std::stable_sort(bin_entries.begin(), bin_entries.end(),
                     [](const ArrivalEntry& a, const ArrivalEntry& b) { return a.timestamp_s < b.timestamp_s; });
    for (auto& e : bin_entries) {
      e.vehicle_id = out.entries.size();
      out.entries.push_back(e);
    }
  }
  return out;
}

/// Independent Poisson bin counts at a constant rate (veh/h); used to
/// build demand fixtures and for queueing-oracle scenarios.
inline DemandBins poisson_bins(double rate_per_hour, double bin_width_s, std::size_t n_bins, VehicleClassId cls,
                               RandomStream& rng) {
  DemandBins bins;
  bins.bin_width_s = bin_width_s;
  auto& counts = bins.counts[cls];
  counts.reserve(n_bins);
  const double mean = rate_per_hour * bin_width_s / 3600.0;
  for (std::size_t i = 0; i < n_bins; ++i) counts.push_back(rng.poisson(mean));
  return bins;
}

/// Windowed counts over [0, last timestamp]. The total is preserved.
inline FlowSeries rate_profile(const ArrivalSchedule& s, double window_s) {
  FlowSeries f;
  f.window_s = window_s;
  if (s.empty()) return f;
  const double last = s.entries.back().timestamp_s;
  f.counts.assign(static_cast<std::size_t>(std::floor(last / window_s)) + 1, 0);
  for (const auto& e : s.entries) {
    auto k = static_cast<std::size_t>(std::floor(e.timestamp_s / window_s));
    k = std::min(k, f.counts.size() - 1);
    ++f.counts[k];
  }
  return f;
}

inline Histogram histogram_of(const std::vector<double>& values, double bin_width) {
  Histogram h;
  h.bin_width = bin_width;
  for (double v : values) {
    const auto k = static_cast<std::size_t>(std::floor(std::max(v, 0.0) / bin_width));
    if (k >= h.counts.size()) h.counts.resize(k + 1, 0);
    ++h.counts[k];
  }
  return h;
}

inline std::vector<double> interarrival_times(const ArrivalSchedule& s) {
  std::vector<double> d;
  for (std::size_t i = 1; i < s.entries.size(); ++i)
    d.push_back(s.entries[i].timestamp_s - s.entries[i - 1].timestamp_s);
  return d;
}

/// Histogram of successive gaps; counts sum to max(size - 1, 0).
inline Histogram interarrival_histogram(const ArrivalSchedule& s, double bin_s) {
  return histogram_of(interarrival_times(s), bin_s);
}

// CSV forms: DemandBins `bin_index,class,count`; schedule
// `timestamp_s,class,vehicle_id`.

inline DemandBins demand_from_csv(const std::string& text, double bin_width_s = 120.0) {
  const auto t = csv::parse(text);
  const auto ib = t.column("bin_index");
  const auto ic = t.column("class");
  const auto in = t.column("count");
  DemandBins bins;
  bins.bin_width_s = bin_width_s;
  for (const auto& row : t.rows) {
    const auto cls = parse_vehicle_class(row.at(ic));
    if (!cls) throw std::runtime_error("csv: unknown vehicle class '" + row.at(ic) + "'");
    const auto b = csv::to_number<long long>(row.at(ib));
    if (b < 0) throw std::runtime_error("csv: negative bin index");
    auto& counts = bins.counts[*cls];
    if (counts.size() <= static_cast<std::size_t>(b)) counts.resize(static_cast<std::size_t>(b) + 1, 0);
    counts[static_cast<std::size_t>(b)] = csv::to_number<long long>(row.at(in));
  }
  return bins;
}

inline std::string demand_to_csv(const DemandBins& bins) {
  std::string out = "bin_index,class,count\n";
  for (std::size_t b = 0; b < bins.bin_count(); ++b)
    for (const auto& [cls, counts] : bins.counts)
      out += std::to_string(b) + "," + std::string(to_string(cls)) + "," +
             std::to_string(b < counts.size() ? counts[b] : 0) + "\n";
  return out;
}

inline std::string schedule_to_csv(const ArrivalSchedule& s) {
  std::string out = "timestamp_s,class,vehicle_id\n";
  for (const auto& e : s.entries)
    out += csv::num(e.timestamp_s) + "," + std::string(to_string(e.cls)) + "," + std::to_string(e.vehicle_id) + "\n";
  return out;
}

}  // namespace portsim
