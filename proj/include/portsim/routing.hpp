#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "portsim/types.hpp"

namespace portsim {

class InvalidShares : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws InvalidShares unless entries are finite, non-negative and sum to
/// one within 1e-9. Shares are never renormalized.
inline void check_share_vector(std::span<const double> shares) {
  if (shares.empty()) throw InvalidShares("empty share vector");
  double sum = 0.0;
  for (double s : shares) {
    if (!std::isfinite(s) || s < 0.0) throw InvalidShares("share entries must be finite and non-negative");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidShares("shares sum to " + std::to_string(sum) + ", expected 1");
}

/// Biased roulette wheel: lane k (1-based) such that
/// cumulative(k-1) <= u < cumulative(k).
inline LaneIndex roulette_select(std::span<const double> shares, double u) {
  check_share_vector(shares);
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("roulette draw must lie in [0, 1)");
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    if (shares[k] > 0.0) last_positive = k;
    cum += shares[k];
    if (u < cum) return static_cast<LaneIndex>(k + 1);
  }
  // Rounding left the final cumulative just below 1.
  return static_cast<LaneIndex>(last_positive + 1);
}

/// Low [0, 90], Medium (90, 450], High (450, 700], VeryHigh (700, inf) veh/h.
inline std::vector<FlowBand> default_flow_bands() {
  return {{FlowBandLabel::Low, 0.0, 90.0},
          {FlowBandLabel::Medium, 90.0, 450.0},
          {FlowBandLabel::High, 450.0, 700.0},
          {FlowBandLabel::VeryHigh, 700.0, kInfiniteRate}};
}

inline std::size_t flow_band_index(double rate, std::span<const FlowBand> bands) {
  if (bands.empty()) throw std::invalid_argument("no flow bands");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    const bool above_lower = i == 0 ? rate >= b.lower : rate > b.lower;
    if (above_lower && rate <= b.upper) return i;
  }
  return rate < bands.front().lower ? 0 : bands.size() - 1;
}

inline FlowBand flow_band(double rate, std::span<const FlowBand> bands) {
  return bands[flow_band_index(rate, bands)];
}

inline const std::vector<double>& occupancy_lookup(const OccupancyTable& table, double rate) {
  if (table.shares.size() != table.bands.size() || table.bands.empty())
    throw std::invalid_argument("occupancy table needs one share vector per band");
  return table.shares[flow_band_index(rate, table.bands)];
}

/// Agent lane choice: stay with the first admissible lane in preference
/// order unless the shortest admissible queue beats it by more than the
/// switch threshold. Ties go to the earlier preference position.
inline LaneIndex agent_select(std::span<const int> queues, std::span<const LaneIndex> admissible,
                              const DriverProfile& profile) {
  if (admissible.empty()) throw std::invalid_argument("agent_select: no admissible lane");
  auto allowed = [&](LaneIndex l) { return std::find(admissible.begin(), admissible.end(), l) != admissible.end(); };
  auto queue_of = [&](LaneIndex l) { return queues[static_cast<std::size_t>(l - 1)]; };

  std::optional<LaneIndex> preferred;
  std::optional<LaneIndex> shortest;
  for (LaneIndex l : profile.preference_order) {
    if (!allowed(l)) continue;
    if (!preferred) preferred = l;
    if (!shortest || queue_of(l) < queue_of(*shortest)) shortest = l;
  }
  // Admissible lanes missing from the preference order rank after it.
  for (LaneIndex l : admissible) {
    if (std::find(profile.preference_order.begin(), profile.preference_order.end(), l) !=
        profile.preference_order.end())
      continue;
    if (!preferred) preferred = l;
    if (!shortest || queue_of(l) < queue_of(*shortest)) shortest = l;
  }
  if (queue_of(*preferred) - queue_of(*shortest) > profile.switch_threshold) return *shortest;
  return *preferred;
}

/// Shortest admissible queue, ties to the lowest lane index. Used at
/// stations the routing policy does not control.
inline LaneIndex shortest_queue_select(std::span<const int> queues, std::span<const LaneIndex> admissible) {
  DriverProfile p;
  p.preference_order.assign(admissible.begin(), admissible.end());
  std::sort(p.preference_order.begin(), p.preference_order.end());
  p.switch_threshold = 0;
  return agent_select(queues, admissible, p);
}

inline const LaneSet& class_admissible_lanes(VehicleClassId cls, const Station& station) {
  static const LaneSet kEmpty;
  const auto it = station.admissible_lanes.find(cls);
  return it == station.admissible_lanes.end() ? kEmpty : it->second;
}

// ---------------------------------------------------------------------------
// Policies

struct ProbabilisticAverage {
  OccupancyTable table;  // a single all-flows band
};

struct ProbabilisticFlowSpecific {
  OccupancyTable table;
};

struct AgentRouting {
  std::vector<WeightedProfile> profiles;
};

using PolicyKind = std::variant<ProbabilisticAverage, ProbabilisticFlowSpecific, AgentRouting>;

enum class PolicyName { ProbAverage, ProbFlowSpecific, Agent };

inline std::string_view to_string(PolicyName p) {
  switch (p) {
    case PolicyName::ProbAverage: return "prob-avg";
    case PolicyName::ProbFlowSpecific: return "prob-flow";
    case PolicyName::Agent: return "agent";
  }
  return "?";
}

inline std::optional<PolicyName> parse_policy_name(std::string_view s) {
  if (s == "prob-avg") return PolicyName::ProbAverage;
  if (s == "prob-flow") return PolicyName::ProbFlowSpecific;
  if (s == "agent") return PolicyName::Agent;
  return std::nullopt;
}

inline PolicyName policy_name(const PolicyKind& p) {
  return static_cast<PolicyName>(p.index());
}

inline PolicyKind make_policy(const RoutingConfig& r, PolicyName name) {
  switch (name) {
    case PolicyName::ProbAverage:
      return ProbabilisticAverage{OccupancyTable{{FlowBand{FlowBandLabel::All, 0.0, kInfiniteRate}},
                                                 {r.average_shares}}};
    case PolicyName::ProbFlowSpecific:
      return ProbabilisticFlowSpecific{r.flow_specific};
    case PolicyName::Agent:
      return AgentRouting{r.agent_profiles};
  }
  throw std::invalid_argument("unknown policy");
}

/// Weighted pick of a driver profile with a single uniform draw.
inline const DriverProfile& select_profile(std::span<const WeightedProfile> profiles, double u) {
  if (profiles.empty()) throw std::invalid_argument("no driver profiles");
  double total = 0.0;
  for (const auto& p : profiles) total += p.weight;
  double cum = 0.0;
  for (const auto& p : profiles) {
    cum += p.weight / total;
    if (u < cum) return p.profile;
  }
  return profiles.back().profile;
}

}  // namespace portsim
