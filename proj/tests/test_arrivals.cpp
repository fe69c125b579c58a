#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

#include "portsim/portsim.hpp"

using namespace portsim;

namespace {

DemandBins rhv_bins(std::vector<long long> counts, double width = 120.0) {
  DemandBins b;
  b.bin_width_s = width;
  b.counts[VehicleClassId::RHV] = std::move(counts);
  return b;
}

// Two-sided KS statistic against U(0,1), computed directly.
double ks_distance_uniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - xs[i]);
    d = std::max(d, xs[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace

TEST(ArrivalsFromBins, CountsForcedPerBin) {
  RandomStream rng(7, StreamId::Arrivals);
  const auto s = arrivals_from_bins(rhv_bins({3, 0, 2}), rng);
  ASSERT_EQ(s.size(), 5u);
  int in0 = 0, in1 = 0, in2 = 0;
  for (const auto& e : s.entries) {
    if (e.timestamp_s < 120) ++in0;
    else if (e.timestamp_s < 240) ++in1;
    else if (e.timestamp_s < 360) ++in2;
  }
  EXPECT_EQ(in0, 3);
  EXPECT_EQ(in1, 0);
  EXPECT_EQ(in2, 2);
}

TEST(ArrivalsFromBins, Deterministic) {
  const auto bins = demand_profile_for_rate(300, 3600, 11, VehicleClassId::RHV);
  RandomStream a(42, StreamId::Arrivals), b(42, StreamId::Arrivals), c(43, StreamId::Arrivals);
  const auto sa = arrivals_from_bins(bins, a);
  EXPECT_EQ(sa, arrivals_from_bins(bins, b));
  RandomStream d(42, StreamId::Arrivals);
  EXPECT_EQ(schedule_to_csv(sa), schedule_to_csv(arrivals_from_bins(bins, d)));
  EXPECT_NE(sa, arrivals_from_bins(bins, c));
}

TEST(ArrivalsFromBins, SortedWithSequentialIds) {
  DemandBins bins = rhv_bins({4, 5, 6});
  bins.counts[VehicleClassId::Tourist] = {2, 0, 7};
  RandomStream rng(3, StreamId::Arrivals);
  const auto s = arrivals_from_bins(bins, rng);
  ASSERT_EQ(s.size(), 24u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.entries[i].vehicle_id, i);
    if (i) {
      EXPECT_LE(s.entries[i - 1].timestamp_s, s.entries[i].timestamp_s);
    }
  }
}

TEST(ArrivalsFromBins, ExactCountPropertyOverManyProfiles) {
  RandomStream gen(99, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<long long> counts;
    for (int b = 0; b < 30; ++b) counts.push_back(gen.poisson(4.0));
    RandomStream rng(static_cast<std::uint64_t>(trial), StreamId::Arrivals);
    const auto s = arrivals_from_bins(rhv_bins(counts), rng);
    std::vector<long long> seen(counts.size(), 0);
    for (const auto& e : s.entries) ++seen[static_cast<std::size_t>(e.timestamp_s / 120.0)];
    EXPECT_EQ(seen, counts);
  }
}

TEST(ArrivalsFromBins, WithinBinPositionsAreUniform) {
  const auto bins = rhv_bins(std::vector<long long>(10000, 1), 120.0);
  RandomStream rng(2009, StreamId::Arrivals);
  const auto s = arrivals_from_bins(bins, rng);
  std::vector<double> u;
  for (std::size_t i = 0; i < s.size(); ++i) u.push_back(s.entries[i].timestamp_s / 120.0 - static_cast<double>(i));
  // Critical value of the KS statistic at alpha = 0.01 is 1.628 / sqrt(n)
  // for large n.
  EXPECT_LT(ks_distance_uniform(u), 1.628 / std::sqrt(10000.0));
  const auto ks = stats::ks_uniform(u);
  EXPECT_NEAR(ks.statistic, ks_distance_uniform(u), 1e-12);
  EXPECT_GT(ks.p_value, 0.01);
}

TEST(KolmogorovDistribution, KnownCriticalValues) {
  // Asymptotic Kolmogorov tail: Q(1.358) = 0.05, Q(1.628) = 0.01.
  EXPECT_NEAR(stats::kolmogorov_survival(1.3581), 0.05, 5e-4);
  EXPECT_NEAR(stats::kolmogorov_survival(1.6276), 0.01, 1e-4);
  EXPECT_DOUBLE_EQ(stats::kolmogorov_survival(0.0), 1.0);
}

TEST(RateProfile, SingleWindow) {
  ArrivalSchedule s;
  for (int i = 0; i < 4; ++i) s.entries.push_back({100.0 * i, VehicleClassId::RHV, static_cast<std::uint64_t>(i)});
  EXPECT_EQ(rate_profile(s, 900).counts, (std::vector<long long>{4}));
}

TEST(RateProfile, EmptySchedule) { EXPECT_TRUE(rate_profile(ArrivalSchedule{}, 900).counts.empty()); }

TEST(RateProfile, TotalsPreserved) {
  const auto bins = dover_day_profile();
  RandomStream rng(1, StreamId::Arrivals);
  const auto s = arrivals_from_bins(bins, rng);
  for (double w : {60.0, 300.0, 900.0, 3600.0, 86400.0})
    EXPECT_EQ(static_cast<std::size_t>(rate_profile(s, w).total()), s.size());
}

TEST(RateProfile, DayProfilePeakToTroughNearFour) {
  const auto bins = dover_day_profile();
  RandomStream rng(1, StreamId::Arrivals);
  const auto f = rate_profile(arrivals_from_bins(bins, rng), 3600.0);
  const auto [lo, hi] = std::minmax_element(f.counts.begin(), f.counts.end());
  const double ratio = static_cast<double>(*hi) / static_cast<double>(*lo);
  EXPECT_NEAR(ratio, 4.0, 0.4);
  // Trough hour starts at 02:00, peak hour at 15:00.
  EXPECT_EQ(lo - f.counts.begin(), 2);
  EXPECT_EQ(hi - f.counts.begin(), 15);
}

TEST(InterarrivalHistogram, HandArithmetic) {
  ArrivalSchedule s;
  s.entries = {{0, VehicleClassId::RHV, 0}, {10, VehicleClassId::RHV, 1}, {30, VehicleClassId::RHV, 2}};
  const auto h = interarrival_histogram(s, 10);
  EXPECT_EQ(h.counts, (std::vector<long long>{0, 1, 1}));
}

TEST(InterarrivalHistogram, SingleVehicleIsEmpty) {
  ArrivalSchedule s;
  s.entries = {{5, VehicleClassId::RHV, 0}};
  EXPECT_EQ(interarrival_histogram(s, 10).total(), 0);
}

TEST(InterarrivalHistogram, HomogeneousRateIsExponential) {
  const double rate_per_hour = 360.0;  // one per 10 s
  RandomStream counts_rng(5, 77);
  const auto bins = poisson_bins(rate_per_hour, 120.0, 9000, VehicleClassId::RHV, counts_rng);
  RandomStream rng(5, StreamId::Arrivals);
  auto s = arrivals_from_bins(bins, rng);
  s.entries.resize(std::min<std::size_t>(s.size(), 10001));
  const double bin = 5.0;
  const auto h = interarrival_histogram(s, bin);
  const double n = static_cast<double>(h.total());
  const double lambda = rate_per_hour / 3600.0;

  // Chi-square against the exponential pmf per bin; the tail is pooled
  // into the last cell.
  const std::size_t cells = 8;
  double chi2 = 0.0;
  long long observed_tail = 0;
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    if (k >= cells - 1) observed_tail += h.counts[k];
  for (std::size_t k = 0; k < cells; ++k) {
    const double p = k + 1 < cells ? std::exp(-lambda * bin * k) - std::exp(-lambda * bin * (k + 1))
                                   : std::exp(-lambda * bin * k);
    const double obs = k + 1 < cells ? static_cast<double>(k < h.counts.size() ? h.counts[k] : 0)
                                     : static_cast<double>(observed_tail);
    chi2 += (obs - n * p) * (obs - n * p) / (n * p);
  }
  boost::math::chi_squared dist(static_cast<double>(cells - 1));
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(DemandCsv, RoundTrip) {
  DemandBins bins = rhv_bins({1, 0, 3});
  bins.counts[VehicleClassId::Tourist] = {2, 2, 0};
  const auto text = demand_to_csv(bins);
  EXPECT_EQ(demand_from_csv(text), bins);
}

TEST(DemandCsv, RejectsUnknownClass) { EXPECT_THROW(demand_from_csv("bin_index,class,count\n0,Bus,3\n"), std::runtime_error); }

TEST(PoissonSampler, MeanAndVariance) {
  RandomStream rng(17, 1);
  for (double mean : {0.5, 4.0, 26.7, 80.0}) {
    const int n = 40000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(rng.poisson(mean));
      s += x;
      s2 += x * x;
    }
    const double m = s / n;
    const double v = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(mean / n)) << mean;
    EXPECT_NEAR(v / mean, 1.0, 0.05) << mean;
  }
}
