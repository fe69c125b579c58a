#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace portsim {

/// Named substreams. Every stream is derived from one master seed.
enum class StreamId : std::uint64_t {
  Arrivals = 1,
  Service = 2,
  Routing = 3,
  Security = 4,
  Detection = 5,
};

inline constexpr std::string_view stream_name(StreamId id) {
  switch (id) {
    case StreamId::Arrivals: return "arrivals";
    case StreamId::Service: return "service";
    case StreamId::Routing: return "routing";
    case StreamId::Security: return "security";
    case StreamId::Detection: return "detection";
  }
  return "unknown";
}

namespace detail {
inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// A single reproducible random stream.
///
/// The engine is std::mt19937_64; the variate transforms below are written
/// out explicitly instead of using <random> distributions, whose output is
/// implementation-defined, so that artifacts are byte-identical across
/// standard libraries.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}

  RandomStream(std::uint64_t master_seed, std::uint64_t stream_key) {
    std::uint64_t state = master_seed ^ (stream_key * 0xd1b54a32d192ed03ULL);
    std::array<std::uint32_t, 8> words{};
    for (std::size_t i = 0; i < words.size(); i += 2) {
      const std::uint64_t v = detail::splitmix64(state);
      words[i] = static_cast<std::uint32_t>(v);
      words[i + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  RandomStream(std::uint64_t master_seed, StreamId id)
      : RandomStream(master_seed, static_cast<std::uint64_t>(id)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_open_low() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Always consumes exactly two uniforms.
  double standard_normal() {
    const double u1 = uniform_open_low();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double mean) { return -mean * std::log(uniform_open_low()); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson count by Knuth's product method; large means are split.
  long long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      long long k = 0;
      double prod = uniform_open_low();
      while (prod > limit) {
        ++k;
        prod *= uniform_open_low();
      }
      return k;
    }
    // Split large means into independent chunks; sum of Poissons is Poisson.
    const double half = mean / 2.0;
    return poisson(half) + poisson(mean - half);
  }

 private:
  std::mt19937_64 engine_;
};

/// The per-run bundle of independent substreams.
struct RngStreams {
  explicit RngStreams(std::uint64_t master_seed)
      : master_seed(master_seed),
        arrivals(master_seed, StreamId::Arrivals),
        service(master_seed, StreamId::Service),
        routing(master_seed, StreamId::Routing),
        security(master_seed, StreamId::Security),
        detection(master_seed, StreamId::Detection) {}

  std::uint64_t master_seed;
  RandomStream arrivals;
  RandomStream service;
  RandomStream routing;
  RandomStream security;
  RandomStream detection;
};

}  // namespace portsim
