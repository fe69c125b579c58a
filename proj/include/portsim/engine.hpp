#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <future>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "portsim/arrivals.hpp"
#include "portsim/rng.hpp"
#include "portsim/routing.hpp"
#include "portsim/scenario.hpp"

namespace portsim {

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

inline bool is_set(double t) { return !std::isnan(t); }

enum class EventKind { Arrival, AdmitFromStack, ReachHead, JoinQueue, BeginService, EndService, Exit };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Arrival: return "Arrival";
    case EventKind::AdmitFromStack: return "AdmitFromStack";
    case EventKind::ReachHead: return "ReachHead";
    case EventKind::JoinQueue: return "JoinQueue";
    case EventKind::BeginService: return "BeginService";
    case EventKind::EndService: return "EndService";
    case EventKind::Exit: return "Exit";
  }
  return "?";
}

struct EventRecord {
  double time_s = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t vehicle_id = 0;
  std::uint32_t location = 0;  // segment index for ReachHead, station index otherwise

  bool operator==(const EventRecord&) const = default;
};

struct StationVisit {
  double arrive_s = kUnset;  // reached the decision point
  double join_s = kUnset;    // entered lane storage
  double begin_s = kUnset;
  double end_s = kUnset;     // service finished
  double depart_s = kUnset;  // left into the next segment
  LaneIndex lane = 0;        // 0 when the class bypasses the station
  bool security_hit = false;

  bool bypassed() const { return lane == 0; }
};

struct TripRecord {
  std::uint64_t vehicle_id = 0;
  VehicleClassId cls = VehicleClassId::RHV;
  double scheduled_s = 0.0;
  double admit_s = kUnset;
  double exit_s = kUnset;
  std::vector<StationVisit> visits;

  bool admitted() const { return is_set(admit_s); }
  bool completed() const { return is_set(exit_s); }
  bool in_system_at_end() const { return admitted() && !completed(); }

  /// Passage time at a measurement point, if the vehicle got there.
  std::optional<double> passage(const MeasurementPoint& p) const {
    double t = kUnset;
    switch (p.kind) {
      case MeasurementPoint::Kind::NetworkEntry: t = admit_s; break;
      case MeasurementPoint::Kind::NetworkExit: t = exit_s; break;
      case MeasurementPoint::Kind::StationArrive: t = visits.at(p.station).arrive_s; break;
      case MeasurementPoint::Kind::StationExit: t = visits.at(p.station).depart_s; break;
    }
    if (!is_set(t)) return std::nullopt;
    return t;
  }
};

/// Lane 0 of a station is the queue upstream of its lanes: vehicles that
/// have finished traversing the approach segment but not yet entered a lane,
/// plus the shared waiting line of a shared-queue station.
struct QueueSeries {
  std::size_t station = 0;
  LaneIndex lane = 0;
  std::vector<double> meters;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::string scenario_hash;
  PolicyName policy = PolicyName::ProbAverage;
  double warmup_s = 0.0;
  double end_time_s = 0.0;
  double sample_interval_s = 0.0;
  std::vector<std::string> station_ids;
  std::vector<TripRecord> trips;                  // indexed by vehicle id
  std::vector<std::vector<long long>> lane_tallies;  // [station][lane - 1], services begun
  std::vector<QueueSeries> queue_series;
  std::vector<long long> stacked_series;
  std::vector<EventRecord> events;  // only when requested

  std::size_t scheduled = 0;
  std::size_t admitted = 0;
  std::size_t exited = 0;
  std::size_t in_system_at_end = 0;
  std::size_t stacked_at_end = 0;

  std::size_t series_length() const { return stacked_series.size(); }

  const QueueSeries* series_for(std::size_t station, LaneIndex lane) const {
    for (const auto& q : queue_series)
      if (q.station == station && q.lane == lane) return &q;
    return nullptr;
  }
};

struct RunOptions {
  std::optional<bool> drain;         // overrides the scenario
  std::optional<double> warmup_s;    // overrides the scenario
  bool record_events = false;
};

// ---------------------------------------------------------------------------
// Sampling primitives

/// Strictly positive service time. Normal samples are redrawn until > 0.
inline double sample_service_time(const ServiceModel& model, RandomStream& rng) {
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NormalTruncated>) {
          while (true) {
            const double x = d.mean_s + d.sd_s * rng.standard_normal();
            if (x > 0.0) return x;
          }
        } else if constexpr (std::is_same_v<T, Deterministic>) {
          return d.value_s;
        } else {
          while (true) {
            const double x = rng.exponential(d.mean_s);
            if (x > 0.0) return x;
          }
        }
      },
      model.distribution);
}

/// Extra delay from a random security check. Exactly one draw is consumed
/// whatever the outcome.
inline double security_check(const ServiceModel& model, RandomStream& rng) {
  const double u = rng.uniform();
  return u < model.security_check_probability ? model.security_check_delay_s : 0.0;
}

/// Outcome of trying to put a vehicle onto the entry segment.
struct Admission {
  bool admitted = false;
};

/// A vehicle is admitted iff the segment has room for its effective length
/// and nobody is already stacked ahead of it.
inline Admission admit_or_stack(double vehicle_length_m, double segment_used_m, double segment_storage_m,
                                std::size_t stacked_ahead) {
  return {stacked_ahead == 0 && segment_used_m + vehicle_length_m <= segment_storage_m + 1e-9};
}

// ---------------------------------------------------------------------------

namespace detail {

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const NetworkTopology& topo, const PolicyKind& policy, std::uint64_t seed,
             const RunOptions& opts)
      : cfg_(cfg), topo_(topo), policy_(policy), streams_(seed), opts_(opts) {
    drain_ = opts.drain.value_or(cfg.drain);
    result_.seed = seed;
    result_.scenario_hash = scenario_hash(cfg);
    result_.policy = policy_name(policy);
    result_.warmup_s = opts.warmup_s.value_or(cfg.warmup_s);
    result_.sample_interval_s = cfg.sample_interval_s;
    for (const auto& s : topo.stations) result_.station_ids.push_back(s.id);
  }

  RunResult run() {
    schedule_ = arrivals_from_bins(cfg_.demand, streams_.arrivals);
    const std::size_t n = schedule_.size();
    const std::size_t ns = topo_.stations.size();
    arrival_times_.reserve(n);
    for (const auto& e : schedule_.entries) arrival_times_.push_back(e.timestamp_s);

    // Per-vehicle draws in id order so every policy sees the same numbers.
    service_.assign(n * ns, 0.0);
    security_.assign(n * ns, 0.0);
    route_u_.assign(n, 0.0);
    profile_u_.assign(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t s = 0; s < ns; ++s) {
        service_[v * ns + s] = sample_service_time(topo_.stations[s].service, streams_.service);
        security_[v * ns + s] = security_check(topo_.stations[s].service, streams_.security);
      }
      route_u_[v] = streams_.routing.uniform();
      profile_u_[v] = streams_.routing.uniform();
    }

    init_state();
    result_.trips.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      auto& tr = result_.trips[v];
      tr.vehicle_id = v;
      tr.cls = schedule_.entries[v].cls;
      tr.scheduled_s = schedule_.entries[v].timestamp_s;
      tr.visits.resize(ns);
      length_.push_back(topo_.vehicle_class(tr.cls).effective_length_m);
      class_idx_.push_back(topo_.class_index(tr.cls));
      push(tr.scheduled_s, EventKind::Arrival, v, 0);
    }
    at_head_.assign(n, false);
    waiting_registered_.assign(n, false);

    const double interval = cfg_.sample_interval_s;
    const double horizon = cfg_.horizon_s;
    double next_sample = 0.0;
    while (!queue_.empty()) {
      const Pending ev = queue_.top();
      if (!drain_ && ev.time > horizon) break;
      queue_.pop();
      if (interval > 0.0) {
        while (next_sample < ev.time) {
          take_sample();
          next_sample = interval * static_cast<double>(result_.stacked_series.size());
        }
      }
      now_ = ev.time;
      dispatch(ev);
    }
    const double end = drain_ ? now_ : horizon;
    result_.end_time_s = end;
    if (interval > 0.0) {
      while (next_sample <= end) {
        take_sample();
        next_sample = interval * static_cast<double>(result_.stacked_series.size());
      }
    }

    result_.scheduled = n;
    result_.stacked_at_end = stack_.size();
    for (const auto& t : result_.trips) {
      if (t.admitted()) ++result_.admitted;
      if (t.completed()) ++result_.exited;
    }
    result_.in_system_at_end = result_.admitted - result_.exited;
    return std::move(result_);
  }

 private:
  struct Pending {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::uint32_t vehicle;
    std::uint32_t location;
    std::uint32_t lane;

    bool operator>(const Pending& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  // Something waiting for room on a segment.
  struct Waiter {
    enum class Kind { BlockedServer, Bypass } kind;
    std::uint32_t vehicle;
    std::uint32_t lane;  // 0-based server index for BlockedServer
  };

  struct SegmentState {
    double storage = 0.0;
    double used = 0.0;
    double queued_m = 0.0;
    std::deque<std::uint32_t> fifo;
    std::deque<Waiter> waiters;
  };

  struct LaneState {
    double capacity = 0.0;
    double used = 0.0;
    int count = 0;  // vehicles held in the lane, including the one at the server
    std::deque<std::uint32_t> waiting;
    std::optional<std::uint32_t> at_server;
  };

  struct StationState {
    std::vector<LaneState> lanes;
    // Shared-queue stations keep one line and count storage station-wide.
    std::deque<std::uint32_t> shared_waiting;
    double shared_used = 0.0;
    double shared_capacity = 0.0;
  };

  void init_state() {
    segs_.resize(topo_.segments.size());
    for (std::size_t i = 0; i < segs_.size(); ++i) segs_[i].storage = topo_.segments[i].storage_m;
    stations_.resize(topo_.stations.size());
    result_.lane_tallies.resize(topo_.stations.size());
    for (std::size_t s = 0; s < stations_.size(); ++s) {
      const auto& st = topo_.stations[s];
      stations_[s].lanes.resize(static_cast<std::size_t>(st.lane_count));
      for (auto& l : stations_[s].lanes) l.capacity = st.approach_capacity_m;
      stations_[s].shared_capacity = st.approach_capacity_m * st.lane_count;
      result_.lane_tallies[s].assign(static_cast<std::size_t>(st.lane_count), 0);
      for (LaneIndex l = 0; l <= st.lane_count; ++l) result_.queue_series.push_back({s, l, {}});
    }
  }

  void push(double t, EventKind kind, std::size_t v, std::size_t loc, std::size_t lane = 0) {
    queue_.push({t, seq_++, kind, static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(loc),
                 static_cast<std::uint32_t>(lane)});
  }

  void log(EventKind kind, std::size_t v, std::size_t loc) {
    if (!opts_.record_events) return;
    result_.events.push_back({now_, log_seq_++, kind, v, static_cast<std::uint32_t>(loc)});
  }

  void dispatch(const Pending& ev) {
    switch (ev.kind) {
      case EventKind::Arrival: on_arrival(ev.vehicle); break;
      case EventKind::ReachHead: on_reach_head(ev.vehicle, ev.location); break;
      case EventKind::EndService: on_end_service(ev.vehicle, ev.location, ev.lane); break;
      default: break;
    }
  }

  double free_space(const SegmentState& s) const { return s.storage - s.used; }
  bool fits(const SegmentState& s, std::uint32_t v) const { return length_[v] <= free_space(s) + 1e-9; }

  // -- admission ------------------------------------------------------------

  void on_arrival(std::uint32_t v) {
    log(EventKind::Arrival, v, 0);
    const auto a = admit_or_stack(length_[v], segs_[0].used, segs_[0].storage, stack_.size());
    if (a.admitted) {
      enter_segment(v, 0);
      result_.trips[v].admit_s = now_;
    } else {
      stack_.push_back(v);
    }
  }

  void enter_segment(std::uint32_t v, std::size_t seg) {
    auto& s = segs_[seg];
    s.used += length_[v];
    s.fifo.push_back(v);
    at_head_[v] = false;
    push(now_ + topo_.segments[seg].free_flow_s, EventKind::ReachHead, v, seg);
  }

  void leave_segment(std::uint32_t v, std::size_t seg) {
    auto& s = segs_[seg];
    s.used -= length_[v];
    if (s.used < 1e-9) s.used = 0.0;
    if (at_head_[v]) s.queued_m -= length_[v];
    if (s.queued_m < 1e-9) s.queued_m = 0.0;
    at_head_[v] = false;
    s.fifo.pop_front();
  }

  // -- segment traversal -----------------------------------------------------

  void on_reach_head(std::uint32_t v, std::size_t seg) {
    log(EventKind::ReachHead, v, seg);
    at_head_[v] = true;
    segs_[seg].queued_m += length_[v];
    try_advance(seg);
  }

  void try_advance(std::size_t seg) {
    auto& s = segs_[seg];
    const bool to_sink = seg + 1 == segs_.size();
    while (!s.fifo.empty()) {
      const std::uint32_t v = s.fifo.front();
      if (!at_head_[v]) break;
      auto& trip = result_.trips[v];
      if (to_sink) {
        leave_segment(v, seg);
        trip.exit_s = now_;
        log(EventKind::Exit, v, seg);
        space_freed(seg);
        continue;
      }
      const std::size_t st = seg;
      auto& visit = trip.visits[st];
      const LaneSet& lanes = topo_.resolved[st][class_idx_[v]];
      if (lanes.empty()) {
        if (!is_set(visit.arrive_s)) visit.arrive_s = now_;
        auto& next = segs_[seg + 1];
        if (!waiting_registered_[v] && next.waiters.empty() && fits(next, v)) {
          pass_through(v, st);
          continue;
        }
        if (!waiting_registered_[v]) {
          waiting_registered_[v] = true;
          next.waiters.push_back({Waiter::Kind::Bypass, v, 0});
        }
        break;
      }
      if (!is_set(visit.arrive_s)) {
        visit.arrive_s = now_;
        visit.lane = decide_lane(v, st, lanes);
      }
      if (!lane_has_room(st, visit.lane, v)) break;
      leave_segment(v, seg);
      join_lane(v, st, visit.lane);
      space_freed(seg);
    }
  }

  void pass_through(std::uint32_t v, std::size_t st) {
    auto& visit = result_.trips[v].visits[st];
    visit.join_s = visit.begin_s = visit.end_s = visit.depart_s = now_;
    visit.lane = 0;
    waiting_registered_[v] = false;
    leave_segment(v, st);
    enter_segment(v, st + 1);
    space_freed(st);
  }

  // -- lane choice ------------------------------------------------------------

  double current_rate_per_hour() const {
    const double window = cfg_.routing ? cfg_.routing->rate_window_s : 900.0;
    if (now_ <= 0.0) return 0.0;
    const auto hi = std::upper_bound(arrival_times_.begin(), arrival_times_.end(), now_);
    const auto lo = std::upper_bound(arrival_times_.begin(), arrival_times_.end(), now_ - window);
    const double span = std::min(now_, window);
    return static_cast<double>(hi - lo) * 3600.0 / span;
  }

  std::vector<int> lane_counts(std::size_t st) const {
    std::vector<int> q;
    for (const auto& l : stations_[st].lanes) q.push_back(l.count);
    return q;
  }

  LaneIndex decide_lane(std::uint32_t v, std::size_t st, const LaneSet& lanes) {
    if (topo_.stations[st].shared_queue) return 0;
    const auto queues = lane_counts(st);
    if (!topo_.routed_station || *topo_.routed_station != st) return shortest_queue_select(queues, lanes);

    auto admissible = [&](LaneIndex l) { return std::find(lanes.begin(), lanes.end(), l) != lanes.end(); };
    return std::visit(
        [&](const auto& p) -> LaneIndex {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, AgentRouting>) {
            const auto& profile = select_profile(p.profiles, profile_u_[v]);
            if (!profile.lookahead) {
              for (LaneIndex l : profile.preference_order)
                if (admissible(l)) return l;
            }
            return agent_select(queues, lanes, profile);
          } else {
            const double rate = std::is_same_v<T, ProbabilisticAverage> ? 0.0 : current_rate_per_hour();
            const LaneIndex l = roulette_select(occupancy_lookup(p.table, rate), route_u_[v]);
            // A class restricted to a subset of lanes keeps to that subset.
            return admissible(l) ? l : shortest_queue_select(queues, lanes);
          }
        },
        policy_);
  }

  // -- lanes and service ------------------------------------------------------

  bool lane_has_room(std::size_t st, LaneIndex lane, std::uint32_t v) const {
    const auto& S = stations_[st];
    if (topo_.stations[st].shared_queue) return S.shared_used + length_[v] <= S.shared_capacity + 1e-9;
    const auto& L = S.lanes[static_cast<std::size_t>(lane - 1)];
    return L.used + length_[v] <= L.capacity + 1e-9;
  }

  void join_lane(std::uint32_t v, std::size_t st, LaneIndex lane) {
    auto& visit = result_.trips[v].visits[st];
    visit.join_s = now_;
    log(EventKind::JoinQueue, v, st);
    auto& S = stations_[st];
    if (topo_.stations[st].shared_queue) {
      S.shared_used += length_[v];
      S.shared_waiting.push_back(v);
      for (std::size_t k = 0; k < S.lanes.size(); ++k) {
        if (!S.lanes[k].at_server) {
          start_next(st, k);
          break;
        }
      }
      return;
    }
    auto& L = S.lanes[static_cast<std::size_t>(lane - 1)];
    L.used += length_[v];
    ++L.count;
    L.waiting.push_back(v);
    if (!L.at_server) start_next(st, static_cast<std::size_t>(lane - 1));
  }

  void start_next(std::size_t st, std::size_t k) {
    auto& S = stations_[st];
    auto& L = S.lanes[k];
    auto& line = topo_.stations[st].shared_queue ? S.shared_waiting : L.waiting;
    if (line.empty()) return;
    const std::uint32_t v = line.front();
    line.pop_front();
    L.at_server = v;
    if (topo_.stations[st].shared_queue) {
      ++L.count;
      L.used += length_[v];
    }
    const std::size_t ns = topo_.stations.size();
    auto& visit = result_.trips[v].visits[st];
    visit.lane = static_cast<LaneIndex>(k + 1);
    visit.begin_s = now_;
    const double extra = security_[v * ns + st];
    visit.security_hit = extra > 0.0;
    ++result_.lane_tallies[st][k];
    log(EventKind::BeginService, v, st);
    push(now_ + service_[v * ns + st] + extra, EventKind::EndService, v, st, k);
  }

  void on_end_service(std::uint32_t v, std::size_t st, std::size_t k) {
    result_.trips[v].visits[st].end_s = now_;
    log(EventKind::EndService, v, st);
    auto& next = segs_[st + 1];
    if (next.waiters.empty() && fits(next, v)) {
      depart(v, st, k);
    } else {
      next.waiters.push_back({Waiter::Kind::BlockedServer, v, static_cast<std::uint32_t>(k)});
    }
  }

  void depart(std::uint32_t v, std::size_t st, std::size_t k) {
    auto& S = stations_[st];
    auto& L = S.lanes[k];
    result_.trips[v].visits[st].depart_s = now_;
    L.at_server.reset();
    L.used -= length_[v];
    if (L.used < 1e-9) L.used = 0.0;
    --L.count;
    if (topo_.stations[st].shared_queue) {
      S.shared_used -= length_[v];
      if (S.shared_used < 1e-9) S.shared_used = 0.0;
    }
    enter_segment(v, st + 1);
    start_next(st, k);
    try_advance(st);
  }

  /// Room appeared on a segment: admit stacked vehicles or release whoever
  /// waits for it, strictly first come first served.
  void space_freed(std::size_t seg) {
    auto& s = segs_[seg];
    if (seg == 0) {
      while (!stack_.empty() && fits(s, stack_.front())) {
        const std::uint32_t v = stack_.front();
        stack_.pop_front();
        enter_segment(v, 0);
        result_.trips[v].admit_s = now_;
        log(EventKind::AdmitFromStack, v, 0);
      }
      return;
    }
    while (!s.waiters.empty() && fits(s, s.waiters.front().vehicle)) {
      const Waiter w = s.waiters.front();
      s.waiters.pop_front();
      if (w.kind == Waiter::Kind::BlockedServer) {
        depart(w.vehicle, seg - 1, w.lane);
      } else {
        pass_through(w.vehicle, seg - 1);
        try_advance(seg - 1);
      }
    }
  }

  // -- sampling ---------------------------------------------------------------

  void take_sample() {
    std::size_t idx = 0;
    for (std::size_t st = 0; st < stations_.size(); ++st) {
      const auto& S = stations_[st];
      double upstream = segs_[st].queued_m;
      if (topo_.stations[st].shared_queue)
        for (auto v : S.shared_waiting) upstream += length_[v];
      result_.queue_series[idx++].meters.push_back(upstream);
      for (const auto& L : S.lanes) {
        double m = 0.0;
        if (topo_.stations[st].shared_queue) {
          if (L.at_server) m = length_[*L.at_server];
        } else {
          m = L.used;
        }
        result_.queue_series[idx++].meters.push_back(m);
      }
    }
    result_.stacked_series.push_back(static_cast<long long>(stack_.size()));
  }

  const ScenarioConfig& cfg_;
  const NetworkTopology& topo_;
  const PolicyKind& policy_;
  RngStreams streams_;
  RunOptions opts_;
  bool drain_ = true;
  RunResult result_;

  ArrivalSchedule schedule_;
  std::vector<double> arrival_times_;
  std::vector<double> service_;
  std::vector<double> security_;
  std::vector<double> route_u_;
  std::vector<double> profile_u_;
  std::vector<double> length_;
  std::vector<std::size_t> class_idx_;
  std::vector<bool> at_head_;
  std::vector<bool> waiting_registered_;

  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t log_seq_ = 0;
  double now_ = 0.0;
  std::vector<SegmentState> segs_;
  std::vector<StationState> stations_;
  std::deque<std::uint32_t> stack_;
};

}  // namespace detail

/// One deterministic run. Equal (scenario, policy, seed) give identical results.
inline RunResult run(const ScenarioConfig& scenario, const PolicyKind& policy, std::uint64_t seed,
                     const RunOptions& options = {}) {
  const NetworkTopology topo = build_topology(scenario);
  return detail::Simulation(scenario, topo, policy, seed, options).run();
}

using ReplicationSet = std::vector<RunResult>;

/// One run per seed, in seed order. With `threads` > 1 runs execute
/// concurrently; the output is the same as the sequential loop.
inline ReplicationSet replicate(const ScenarioConfig& scenario, const PolicyKind& policy,
                                std::span<const std::uint64_t> seeds, const RunOptions& options = {},
                                unsigned threads = 1) {
  if (seeds.empty()) throw std::invalid_argument("replicate: at least one seed is required");
  const NetworkTopology topo = build_topology(scenario);
  ReplicationSet out(seeds.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i)
      out[i] = detail::Simulation(scenario, topo, policy, seeds[i], options).run();
    return out;
  }
  std::size_t next = 0;
  while (next < seeds.size()) {
    std::vector<std::future<RunResult>> batch;
    const std::size_t first = next;
    for (unsigned t = 0; t < threads && next < seeds.size(); ++t, ++next) {
      batch.push_back(std::async(std::launch::async, [&, seed = seeds[next]] {
        return detail::Simulation(scenario, topo, policy, seed, options).run();
      }));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) out[first + i] = batch[i].get();
  }
  return out;
}

}  // namespace portsim
