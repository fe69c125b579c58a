#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "portsim/portsim.hpp"
#include "support.hpp"

using namespace portsim;
using namespace portsim::testing;

namespace {

const MeasurementPoint kEntry{MeasurementPoint::Kind::NetworkEntry, 0};
const MeasurementPoint kExit{MeasurementPoint::Kind::NetworkExit, 0};

/// `n` vehicles entering one second apart, each taking `trip(v)` seconds.
template <typename F>
RunResult passages(std::size_t n, F trip) {
  RunResult r;
  for (std::size_t v = 0; v < n; ++v) {
    TripRecord t;
    t.vehicle_id = v;
    t.admit_s = static_cast<double>(v);
    t.exit_s = t.admit_s + trip(v);
    r.trips.push_back(t);
  }
  return r;
}

DeviceAssignment single_devices(std::size_t n) { return DeviceAssignment{std::vector<int>(n, 1)}; }

DetectionEvent ev(std::string site, std::uint64_t device, double t) { return {std::move(site), device, device, t}; }

std::map<std::string, std::vector<double>> table_samples() {
  const auto t = csv::read_file(std::string(PORTSIM_DATA_DIR) + "/trip_samples.csv");
  std::map<std::string, std::vector<double>> out;
  for (const auto& row : t.rows) out[row[t.column("source")]].push_back(csv::to_number<double>(row[t.column("trip_s")]));
  return out;
}

}  // namespace

TEST(SimulateDetections, CertainDetectionLogsEveryPassage) {
  const auto r = passages(3, [](std::size_t) { return 100.0; });
  RandomStream rng(1, StreamId::Detection);
  const auto log = simulate_detections(r, kEntry, DetectorSite{"s1", "network.entry", 1.0}, single_devices(3), rng);
  ASSERT_EQ(log.size(), 3u);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(log.events[v].vehicle_id, v);
    EXPECT_DOUBLE_EQ(log.events[v].timestamp_s, static_cast<double>(v));
    EXPECT_EQ(log.events[v].site, "s1");
  }
}

TEST(SimulateDetections, ZeroProbabilityIsEmpty) {
  const auto r = passages(50, [](std::size_t) { return 100.0; });
  RandomStream rng(1, StreamId::Detection);
  EXPECT_TRUE(simulate_detections(r, kEntry, DetectorSite{"s1", "x", 0.0}, single_devices(50), rng).empty());
}

TEST(SimulateDetections, DevicelessVehiclesNeverSeen) {
  const auto r = passages(40, [](std::size_t) { return 100.0; });
  RandomStream rng(1, StreamId::Detection);
  EXPECT_TRUE(simulate_detections(r, kEntry, DetectorSite{"s1", "x", 1.0}, DeviceAssignment{std::vector<int>(40, 0)}, rng)
                  .empty());
}

TEST(SimulateDetections, ThinningWithinThreeSigma) {
  for (std::size_t n : {1200u, 10000u}) {
    const double p = 0.663;
    const auto r = passages(n, [](std::size_t) { return 100.0; });
    RandomStream rng(n, StreamId::Detection);
    const auto log = simulate_detections(r, kEntry, DetectorSite{"s1", "x", p}, single_devices(n), rng);
    EXPECT_NEAR(static_cast<double>(log.size()), n * p, 3.0 * binomial_sigma(static_cast<double>(n), p)) << n;
  }
}

TEST(SimulateDetections, RejectsBadInput) {
  const auto r = passages(2, [](std::size_t) { return 1.0; });
  RandomStream rng(1, 1);
  EXPECT_THROW(simulate_detections(r, kEntry, DetectorSite{"s", "x", 1.5}, single_devices(2), rng), std::invalid_argument);
  EXPECT_THROW(simulate_detections(r, kEntry, DetectorSite{"s", "x", 0.5}, single_devices(3), rng), std::invalid_argument);
  EXPECT_THROW(check_device_distribution(std::vector<double>{0.5, 0.6, 0.0}), std::invalid_argument);
  const auto topo = build_topology(default_validation_scenario());
  EXPECT_THROW(simulate_detections(r, topo, DetectorSite{"s", "nowhere.exit", 0.5}, single_devices(2), rng),
               std::invalid_argument);
}

TEST(AssignDevices, FollowsDistribution) {
  const auto r = passages(20000, [](std::size_t) { return 1.0; });
  RandomStream rng(3, StreamId::Detection);
  const std::vector<double> dist{0.25, 0.60, 0.15};
  const auto d = assign_devices(r, dist, rng);
  std::vector<double> seen(3, 0.0);
  for (int c : d.counts) ++seen[static_cast<std::size_t>(c)];
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(seen[k], 20000 * dist[k], 3.0 * binomial_sigma(20000, dist[k]));
}

TEST(Dedupe, Examples) {
  DetectionLog same;
  same.events = {{"s1", 10, 5, 100.0}, {"s1", 11, 5, 101.0}};
  const auto a = dedupe(same, 5.0);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a.events[0].timestamp_s, 100.0);

  DetectionLog different;
  different.events = {{"s1", 10, 5, 100.0}, {"s1", 12, 6, 101.0}};
  EXPECT_EQ(dedupe(different, 5.0).size(), 2u);

  EXPECT_TRUE(dedupe(DetectionLog{}, 5.0).empty());
  EXPECT_EQ(dedupe(same, 0.0).size(), 2u);
  EXPECT_THROW(dedupe(same, -1.0), std::invalid_argument);
}

TEST(Dedupe, Idempotent) {
  const auto cfg = default_validation_scenario();
  const auto rep = validate(cfg, make_policy(*cfg.routing, PolicyName::Agent), 4);
  for (double w : {1.0, 5.0, 60.0}) {
    const auto once = dedupe(rep.raw1, w);
    EXPECT_EQ(dedupe(once, w), once);
    EXPECT_LE(once.size(), rep.raw1.size());
  }
}

TEST(MatchTrips, DisjointDevicesGiveNothing) {
  DetectionLog l1, l2;
  l1.events = {ev("s1", 1, 0), ev("s1", 2, 5)};
  l2.events = {ev("s2", 3, 100), ev("s2", 4, 105)};
  EXPECT_TRUE(match_trips(l1, l2, 3600).empty());
}

TEST(MatchTrips, ConstructedOverlap) {
  // 796 first-site devices, 125 second-site devices, 104 in common.
  DetectionLog l1, l2;
  for (std::uint64_t d = 0; d < 796; ++d) l1.events.push_back(ev("s1", d, static_cast<double>(d)));
  for (std::uint64_t d = 0; d < 104; ++d) l2.events.push_back(ev("s2", d * 7, static_cast<double>(d * 7) + 300.0));
  for (std::uint64_t d = 0; d < 21; ++d) l2.events.push_back(ev("s2", 10000 + d, 50.0));
  sort_log(l1);
  sort_log(l2);
  const auto m = match_trips(l1, l2, 3600);
  EXPECT_EQ(m.size(), 104u);
  for (const auto& t : m) EXPECT_DOUBLE_EQ(t.trip_s(), 300.0);
}

TEST(MatchTrips, ReversedOrderOrTooLongRejected) {
  DetectionLog l1, l2;
  l1.events = {ev("s1", 1, 500), ev("s1", 2, 0)};
  l2.events = {ev("s2", 1, 400), ev("s2", 2, 4000)};
  EXPECT_TRUE(match_trips(l1, l2, 3600).empty());
  EXPECT_EQ(match_trips(l1, l2, 4000).size(), 1u);
}

TEST(MatchTrips, OneMatchPerDevice) {
  DetectionLog l1, l2;
  l1.events = {ev("s1", 1, 0), ev("s1", 1, 10)};
  l2.events = {ev("s2", 1, 100), ev("s2", 1, 200)};
  const auto m = match_trips(l1, l2, 3600);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m[0].t1_s, 0.0);
  EXPECT_DOUBLE_EQ(m[0].t2_s, 100.0);
}

TEST(MatchTrips, ExpectedMatchesAndGroundTruth) {
  const std::size_t n = 10000;
  const double p1 = 0.663, p2 = 0.104;
  const auto r = passages(n, [](std::size_t v) { return 120.0 + static_cast<double>(v % 97); });
  RandomStream rng(9, StreamId::Detection);
  const auto devices = single_devices(n);
  const auto l1 = simulate_detections(r, kEntry, DetectorSite{"s1", "x", p1}, devices, rng);
  const auto l2 = simulate_detections(r, kExit, DetectorSite{"s2", "y", p2}, devices, rng);
  const auto m = match_trips(l1, l2, 3600);
  EXPECT_LE(m.size(), std::min(l1.size(), l2.size()));
  EXPECT_NEAR(static_cast<double>(m.size()), n * p1 * p2, 3.0 * binomial_sigma(static_cast<double>(n), p1 * p2));
  for (const auto& t : m) EXPECT_DOUBLE_EQ(t.trip_s(), r.trips[t.vehicle_id].exit_s - r.trips[t.vehicle_id].admit_s);
}

TEST(TripPdf, Examples) {
  const auto a = trip_pdf(std::vector<double>{300, 300}, 60);
  ASSERT_EQ(a.masses.size(), 1u);
  EXPECT_DOUBLE_EQ(a.masses[0], 1.0);
  EXPECT_DOUBLE_EQ(a.origin_s, 300.0);

  const auto b = trip_pdf(std::vector<double>{100, 200, 300}, 100);
  ASSERT_EQ(b.masses.size(), 3u);
  for (double m : b.masses) EXPECT_DOUBLE_EQ(m, 1.0 / 3.0);

  EXPECT_TRUE(trip_pdf(std::vector<double>{}, 60).empty());
  EXPECT_THROW(trip_pdf(std::vector<double>{1}, 0), std::invalid_argument);
}

TEST(TripPdf, MassesSumToOneAndMeanTracksSample) {
  const auto samples = table_samples();
  for (const auto& [name, xs] : samples) {
    for (double bin : {30.0, 60.0, 120.0}) {
      const auto pdf = trip_pdf(xs, bin);
      double sum = 0;
      for (double m : pdf.masses) sum += m;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_NEAR(pdf.mean_estimate(), stats::mean(xs), bin / 2.0) << name;
    }
  }
  EXPECT_NEAR(trip_pdf(samples.at("Bluetooth"), 60).mean_estimate(), 358.0, 30.0);
}

TEST(CompareTripSources, IdenticalSamples) {
  const std::vector<double> xs{100, 150, 220, 400};
  const auto c = compare_trip_sources({{"a", xs}, {"b", xs}});
  EXPECT_DOUBLE_EQ(c.pair("a", "b").ks.statistic, 0.0);
  EXPECT_FALSE(c.pair("b", "a").rejected);
  EXPECT_THROW(compare_trip_sources({{"a", xs}, {"empty", {}}}), std::invalid_argument);
}

TEST(CompareTripSources, ReproducesReferenceTable) {
  const auto samples = table_samples();
  std::vector<TripSource> sources;
  for (const auto& name : {"Simulation", "Bluetooth", "Camera"}) sources.push_back({name, samples.at(name)});
  const auto c = compare_trip_sources(sources);
  struct Ref {
    const char* name;
    std::size_t n;
    double mean, median, sd, max;
  };
  for (const Ref& r : {Ref{"Simulation", 121, 319, 291, 110, 729}, Ref{"Bluetooth", 104, 358, 301, 181, 1250},
                       Ref{"Camera", 111, 343, 306, 137, 860}}) {
    const auto& s = c.row(r.name).summary;
    EXPECT_EQ(s.n, r.n);
    EXPECT_NEAR(s.mean, r.mean, 0.5) << r.name;
    EXPECT_NEAR(s.median, r.median, 0.5) << r.name;
    EXPECT_NEAR(s.sd, r.sd, 0.5) << r.name;
    EXPECT_NEAR(s.max, r.max, 0.5) << r.name;
  }
  EXPECT_EQ(c.pairs.size(), 3u);
}

TEST(CompareTripSources, ShiftedSampleRejected) {
  const auto samples = table_samples();
  auto shifted = samples.at("Simulation");
  for (auto& x : shifted) x += 500.0;
  const auto c = compare_trip_sources({{"sim", samples.at("Simulation")}, {"shifted", shifted}});
  EXPECT_TRUE(c.pair("sim", "shifted").rejected);
  EXPECT_GT(c.pair("sim", "shifted").ks.statistic, 0.9);
}

TEST(Validate, PerfectDetectionMatchesCamera) {
  auto cfg = default_validation_scenario();
  auto& d = *cfg.detection;
  d.sites[0].detection_probability = 1.0;
  d.sites[1].detection_probability = 1.0;
  d.device_distribution = {0.0, 1.0, 0.0};
  d.camera_window_start_s = 0.0;
  d.camera_window_end_s = 1e9;
  const auto rep = validate(cfg, make_policy(*cfg.routing, PolicyName::Agent), 1);
  auto bt = trip_times_of(rep.bluetooth), cam = trip_times_of(rep.camera);
  std::sort(bt.begin(), bt.end());
  std::sort(cam.begin(), cam.end());
  EXPECT_EQ(bt, cam);
  EXPECT_FALSE(bt.empty());
}

TEST(Validate, DedupeWindowZeroKeepsRawLogs) {
  const auto cfg = default_validation_scenario();
  const auto policy = make_policy(*cfg.routing, PolicyName::Agent);
  const auto rep = validate(cfg, policy, 1, {}, 0.0);
  EXPECT_EQ(rep.log1, rep.raw1);
  EXPECT_EQ(rep.log2, rep.raw2);
  const auto deduped = validate(cfg, policy, 1);
  EXPECT_LT(deduped.log1.size(), rep.log1.size());
}

TEST(Validate, SeedOneNearReferenceTable) {
  const auto cfg = default_validation_scenario();
  const auto rep = validate(cfg, make_policy(*cfg.routing, PolicyName::Agent), 1);
  const auto& sim = rep.comparison.row(kSimulationSource).summary;
  EXPECT_NEAR(sim.mean, 319.0, 31.9);
  EXPECT_NEAR(sim.median, 291.0, 29.1);
  EXPECT_NEAR(sim.sd, 110.0, 11.0);
  EXPECT_FALSE(rep.comparison.pair(kSimulationSource, kCameraSource).rejected);
  EXPECT_EQ(rep.comparison.rows.size(), 3u);
  // Raw detector counts land near the observed 796 / 125.
  EXPECT_NEAR(static_cast<double>(rep.raw1.size()), 796.0, 80.0);
  EXPECT_NEAR(static_cast<double>(rep.raw2.size()), 125.0, 25.0);
}

TEST(Validate, Deterministic) {
  const auto cfg = default_validation_scenario();
  const auto policy = make_policy(*cfg.routing, PolicyName::Agent);
  const auto a = validate(cfg, policy, 3), b = validate(cfg, policy, 3);
  EXPECT_EQ(log_to_csv(a.log1), log_to_csv(b.log1));
  EXPECT_EQ(matches_to_csv(a.bluetooth), matches_to_csv(b.bluetooth));
  EXPECT_EQ(summary_to_csv(a.comparison), summary_to_csv(b.comparison));
}
