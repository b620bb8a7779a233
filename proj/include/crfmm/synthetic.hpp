#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "crfmm/error.hpp"
#include "crfmm/road_network.hpp"
#include "crfmm/trajectory.hpp"
#include "crfmm/trajectory_io.hpp"

namespace crfmm {

// Parameters of the simulated city, its drivers and their GPS receivers.
struct WorldConfig {
  std::size_t grid_cols = 12;
  std::size_t grid_rows = 12;
  double spacing_m = 300.0;
  // When positive, every block edge is served by two parallel roads of equal
  // length bowed out by this many meters, one at least twin_speed_ratio_min
  // times faster than the other.
  double twin_offset_m = 0.0;
  double twin_speed_ratio_min = 2.0;
  double twin_speed_ratio_max = 3.0;
  double speed_min = 8.0;  // normal-slot m/s
  double speed_max = 16.0;
  double congestion_min = 0.4;  // peak-slot speed factor range
  double congestion_max = 1.0;

  std::size_t drivers = 10;
  std::size_t od_pairs_per_driver = 3;
  std::size_t trips_per_driver = 60;  // spread evenly over all months
  std::size_t months = 6;
  double random_trip_share = 0.2;
  double peak_share = 0.5;
  std::size_t route_alternatives = 5;
  double beta = 5.0;  // preference strength
  double gps_sigma_m = 10.0;
  std::int64_t native_interval_s = 10;
  double min_od_distance_m = 2000.0;
  std::uint64_t seed = 1;
};

struct SyntheticTrip {
  LabeledTrajectory data;
  std::size_t month = 0;
  TimeSlot slot = TimeSlot::Normal;
  Trip od;
  bool habitual = false;
  double duration_s = 0.0;
};

struct SyntheticWorld {
  RoadNetwork network;
  std::vector<SyntheticTrip> trips;  // ordered by (vehicle, trip id); trip ids are chronological
};

namespace detail {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

inline RoadNetwork make_grid(const WorldConfig& cfg, std::mt19937_64& rng) {
  if (cfg.grid_cols < 2 || cfg.grid_rows < 2) throw InputError("grid needs at least 2x2 nodes");
  if (!(cfg.spacing_m > 0.0)) throw InputError("grid spacing must be positive");
  if (!(cfg.speed_min > 0.0) || cfg.speed_max < cfg.speed_min) throw InputError("invalid speed range");
  if (!(cfg.congestion_min > 0.0) || cfg.congestion_max < cfg.congestion_min)
    throw InputError("invalid congestion range");
  if (cfg.twin_offset_m > 0.0 && (cfg.twin_speed_ratio_min < 1.0 || cfg.twin_speed_ratio_max < cfg.twin_speed_ratio_min))
    throw InputError("invalid twin speed ratio range");

  std::vector<Node> nodes;
  for (std::size_t j = 0; j < cfg.grid_rows; ++j)
    for (std::size_t i = 0; i < cfg.grid_cols; ++i)
      nodes.push_back({static_cast<NodeId>(j * cfg.grid_cols + i), static_cast<double>(i) * cfg.spacing_m,
                       static_cast<double>(j) * cfg.spacing_m});

  std::uniform_real_distribution<double> speed(cfg.speed_min, cfg.speed_max);
  std::uniform_real_distribution<double> congestion(cfg.congestion_min, cfg.congestion_max);
  std::uniform_real_distribution<double> ratio(cfg.twin_speed_ratio_min, cfg.twin_speed_ratio_max);
  std::bernoulli_distribution coin(0.5);

  std::vector<RoadSegment> segments;
  SegmentId next_id = 0;
  auto add_link = [&](const Node& a, const Node& b) {
    const double v = speed(rng);
    const double cm = congestion(rng);
    const double ce = congestion(rng);
    auto speeds = [&](double base) { return std::array<double, 3>{base * cm, base * ce, base}; };
    if (cfg.twin_offset_m <= 0.0) {
      segments.push_back(make_segment(next_id++, a.id, b.id, {a.point(), b.point()}, speeds(v)));
      segments.push_back(make_segment(next_id++, b.id, a.id, {b.point(), a.point()}, speeds(v)));
      return;
    }
    const double r = ratio(rng);
    const bool left_fast = coin(rng);
    const double dx = (b.x - a.x) / cfg.spacing_m;
    const double dy = (b.y - a.y) / cfg.spacing_m;
    const double inset = 0.15 * cfg.spacing_m;
    for (int side : {+1, -1}) {
      const double off = side * cfg.twin_offset_m;
      const Point p1{a.x + dx * inset - dy * off, a.y + dy * inset + dx * off};
      const Point p2{b.x - dx * inset - dy * off, b.y - dy * inset + dx * off};
      const bool fast = (side > 0) == left_fast;
      const auto sp = speeds(fast ? v : v / r);
      segments.push_back(make_segment(next_id++, a.id, b.id, {a.point(), p1, p2, b.point()}, sp));
      segments.push_back(make_segment(next_id++, b.id, a.id, {b.point(), p2, p1, a.point()}, sp));
    }
  };
  for (std::size_t j = 0; j < cfg.grid_rows; ++j) {
    for (std::size_t i = 0; i < cfg.grid_cols; ++i) {
      const Node& here = nodes[j * cfg.grid_cols + i];
      if (i + 1 < cfg.grid_cols) add_link(here, nodes[j * cfg.grid_cols + i + 1]);
      if (j + 1 < cfg.grid_rows) add_link(here, nodes[(j + 1) * cfg.grid_cols + i]);
    }
  }
  return RoadNetwork(std::move(nodes), std::move(segments));
}

// Segment-level graph search used for route generation: nodes are segment
// indices, entering a segment costs its full travel time.
class RouteSearch {
 public:
  RouteSearch(const RoadNetwork& net, TimeSlot slot) : net_(net), cost_(net.segment_count()) {
    for (std::size_t i = 0; i < net.segment_count(); ++i)
      cost_[i] = net.segments()[i].length / net.segments()[i].speed(slot);
  }

  double cost(std::span<const std::size_t> path) const {
    double c = 0.0;
    for (std::size_t s : path) c += cost_[s];
    return c;
  }

  // Fastest simple path src -> dst avoiding banned segments, banned moves and
  // U-turns onto the reverse of the current road.
  std::vector<std::size_t> fastest(std::size_t src, std::size_t dst, const std::vector<bool>& banned_seg,
                                   const std::set<std::pair<std::size_t, std::size_t>>& banned_move) const {
    const std::size_t n = cost_.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pred(n, n);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    dist[src] = cost_[src];
    pq.emplace(dist[src], src);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      if (u == dst) break;
      for (std::size_t v : net_.successors(u)) {
        if (banned_seg[v] || banned_move.contains({u, v}) || is_u_turn(u, v)) continue;
        const double nd = d + cost_[v];
        if (nd < dist[v]) {
          dist[v] = nd;
          pred[v] = u;
          pq.emplace(nd, v);
        }
      }
    }
    std::vector<std::size_t> path;
    if (!std::isfinite(dist[dst])) return path;
    for (std::size_t cur = dst; cur != n; cur = pred[cur]) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
  }

  // Yen's k loopless fastest paths.
  std::vector<std::vector<std::size_t>> k_fastest(std::size_t src, std::size_t dst, std::size_t k) const {
    std::vector<std::vector<std::size_t>> found;
    std::vector<bool> banned(cost_.size(), false);
    auto first = fastest(src, dst, banned, {});
    if (first.empty()) return found;
    found.push_back(std::move(first));
    std::set<std::pair<double, std::vector<std::size_t>>> pending;
    while (found.size() < k) {
      const std::vector<std::size_t>& last = found.back();
      for (std::size_t i = 0; i + 1 < last.size(); ++i) {
        std::vector<std::size_t> root(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        std::set<std::pair<std::size_t, std::size_t>> banned_move;
        for (const auto& p : found)
          if (p.size() > i + 1 && std::equal(root.begin(), root.end(), p.begin())) banned_move.insert({p[i], p[i + 1]});
        std::fill(banned.begin(), banned.end(), false);
        for (std::size_t r = 0; r < i; ++r) banned[root[r]] = true;
        auto spur = fastest(last[i], dst, banned, banned_move);
        if (spur.empty()) continue;
        std::vector<std::size_t> total(root.begin(), root.end() - 1);
        total.insert(total.end(), spur.begin(), spur.end());
        pending.emplace(cost(total), std::move(total));
      }
      while (!pending.empty() && std::find(found.begin(), found.end(), pending.begin()->second) != found.end())
        pending.erase(pending.begin());
      if (pending.empty()) break;
      found.push_back(pending.begin()->second);
      pending.erase(pending.begin());
    }
    return found;
  }

 private:
  bool is_u_turn(std::size_t u, std::size_t v) const {
    const RoadSegment& a = net_.segments()[u];
    const RoadSegment& b = net_.segments()[v];
    return a.from_node == b.to_node && a.to_node == b.from_node;
  }

  const RoadNetwork& net_;
  std::vector<double> cost_;
};

inline Timestamp draw_start(std::mt19937_64& rng, std::size_t month, const WorldConfig& cfg) {
  std::uniform_int_distribution<int> day(0, 29);
  std::bernoulli_distribution peak(cfg.peak_share);
  std::bernoulli_distribution morning(0.5);
  const std::int64_t base = (static_cast<std::int64_t>(month) * 30 + day(rng)) * kSecondsPerDay;
  std::int64_t tod = 0;
  if (peak(rng)) {
    // Start within the first 90 minutes of a peak so most of the trip stays in it.
    std::uniform_int_distribution<std::int64_t> off(0, 90 * 60 - 1);
    tod = (morning(rng) ? 7 * 3600 + 1800 : 17 * 3600 + 1800) + off(rng);
  } else {
    std::uniform_int_distribution<std::int64_t> any(6 * 3600, 23 * 3600 - 1);
    do {
      tod = any(rng);
    } while (slot_of(tod) != TimeSlot::Normal);
  }
  return base + tod;
}

}  // namespace detail

// Builds a seeded synthetic city: grid network with per-slot speeds, drivers
// with habitual origin/destination pairs, preference-driven route choice and
// noisy GPS traces with per-point ground truth.
inline SyntheticWorld generate_synthetic(const WorldConfig& cfg) {
  if (cfg.native_interval_s <= 0) throw InputError("native interval must be positive");
  if (cfg.months == 0 || cfg.route_alternatives == 0) throw InputError("months and route alternatives must be positive");
  if (cfg.drivers > 0 && cfg.od_pairs_per_driver == 0) throw InputError("drivers need at least one OD pair");
  auto net_rng = detail::make_rng(cfg.seed, 0);
  SyntheticWorld world{detail::make_grid(cfg, net_rng), {}};
  const RoadNetwork& net = world.network;
  const auto& segs = net.segments();

  auto midpoint = [&](std::size_t si) { return point_along(segs[si].polyline, 0.5 * segs[si].length); };
  std::map<std::tuple<std::size_t, std::size_t, TimeSlot>, std::vector<std::vector<std::size_t>>> route_cache;
  std::array<std::unique_ptr<detail::RouteSearch>, 3> search;
  for (TimeSlot s : kAllSlots) search[slot_index(s)] = std::make_unique<detail::RouteSearch>(net, s);
  auto routes_for = [&](std::size_t o, std::size_t d, TimeSlot slot) -> const std::vector<std::vector<std::size_t>>& {
    auto key = std::make_tuple(o, d, slot);
    auto it = route_cache.find(key);
    if (it == route_cache.end())
      it = route_cache.emplace(key, search[slot_index(slot)]->k_fastest(o, d, cfg.route_alternatives)).first;
    return it->second;
  };

  for (std::size_t d = 0; d < cfg.drivers; ++d) {
    auto rng = detail::make_rng(cfg.seed, 1000 + d);
    std::uniform_int_distribution<std::size_t> pick_seg(0, segs.size() - 1);
    auto draw_od = [&]() {
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const std::size_t o = pick_seg(rng);
        const std::size_t e = pick_seg(rng);
        if (distance(midpoint(o), midpoint(e)) < cfg.min_od_distance_m) continue;
        return std::make_pair(o, e);
      }
      throw InputError("no origin/destination pair satisfies the minimum OD distance");
    };
    std::vector<std::pair<std::size_t, std::size_t>> habitual;
    for (std::size_t k = 0; k < cfg.od_pairs_per_driver; ++k) habitual.push_back(draw_od());

    struct Planned {
      Timestamp start;
      std::size_t month;
    };
    std::vector<Planned> plan;
    for (std::size_t m = 0; m < cfg.months; ++m) {
      const std::size_t n = cfg.trips_per_driver / cfg.months + (m < cfg.trips_per_driver % cfg.months ? 1 : 0);
      for (std::size_t k = 0; k < n; ++k) plan.push_back({detail::draw_start(rng, m, cfg), m});
    }
    std::sort(plan.begin(), plan.end(), [](const Planned& a, const Planned& b) { return a.start < b.start; });
    for (std::size_t k = 1; k < plan.size(); ++k)
      if (plan[k].start <= plan[k - 1].start) plan[k].start = plan[k - 1].start + 1;

    std::map<std::vector<std::size_t>, double> route_counts;
    std::map<std::pair<std::size_t, std::size_t>, double> od_counts;
    std::bernoulli_distribution random_trip(cfg.random_trip_share);
    std::uniform_int_distribution<std::size_t> pick_od(0, habitual.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> offset_frac(0.1, 0.9);
    std::normal_distribution<double> noise(0.0, 1.0);

    for (std::size_t k = 0; k < plan.size(); ++k) {
      const bool is_random = random_trip(rng);
      const auto od = is_random ? draw_od() : habitual[pick_od(rng)];
      const TimeSlot slot = slot_of(plan[k].start);
      const auto& routes = routes_for(od.first, od.second, slot);
      if (routes.empty()) throw InputError("no route between drawn origin and destination");

      // P(route) ∝ exp(beta * share of this driver's earlier trips on the OD that used it).
      const double prior = od_counts[od];
      std::vector<double> weight(routes.size());
      double total = 0.0;
      for (std::size_t r = 0; r < routes.size(); ++r) {
        auto it = route_counts.find(routes[r]);
        const double fam = prior > 0.0 && it != route_counts.end() ? it->second / prior : 0.0;
        weight[r] = std::exp(cfg.beta * fam);
        total += weight[r];
      }
      double u = unit(rng) * total;
      std::size_t chosen = routes.size() - 1;
      for (std::size_t r = 0; r < routes.size(); ++r) {
        if (u < weight[r]) {
          chosen = r;
          break;
        }
        u -= weight[r];
      }
      const auto& route = routes[chosen];
      route_counts[route] += 1.0;
      od_counts[od] += 1.0;

      // Drive the route at slot speeds from a start offset to an end offset.
      const double start_off = offset_frac(rng) * segs[route.front()].length;
      const double end_off = offset_frac(rng) * segs[route.back()].length;
      struct Piece {
        std::size_t seg;
        double from, to, t0, speed;
      };
      std::vector<Piece> pieces;
      double clock = 0.0;
      for (std::size_t r = 0; r < route.size(); ++r) {
        const RoadSegment& s = segs[route[r]];
        const double from = r == 0 ? start_off : 0.0;
        const double to = r + 1 == route.size() ? end_off : s.length;
        const double v = s.speed(slot);
        pieces.push_back({route[r], from, to, clock, v});
        clock += (to - from) / v;
      }
      const double duration = clock;

      SyntheticTrip trip;
      trip.month = plan[k].month;
      trip.slot = slot;
      trip.od = {segs[od.first].id, segs[od.second].id};
      trip.habitual = !is_random;
      trip.duration_s = duration;
      Trajectory& traj = trip.data.trajectory;
      traj.vehicle_id = static_cast<VehicleId>(d + 1);
      traj.trip_id = static_cast<TripId>(k);
      for (std::size_t si : route) trip.data.full_path.segments.push_back(segs[si].id);
      const auto steps = static_cast<std::int64_t>(std::floor(duration / static_cast<double>(cfg.native_interval_s)));
      std::size_t piece = 0;
      for (std::int64_t i = 0; i <= steps; ++i) {
        const double tau = static_cast<double>(i * cfg.native_interval_s);
        while (piece + 1 < pieces.size() && tau >= pieces[piece + 1].t0) ++piece;
        const Piece& pc = pieces[piece];
        const double along = std::min(pc.to, pc.from + (tau - pc.t0) * pc.speed);
        const Point truth = point_along(segs[pc.seg].polyline, along);
        const double nx = cfg.gps_sigma_m * noise(rng);
        const double ny = cfg.gps_sigma_m * noise(rng);
        traj.points.push_back({truth.x + nx, truth.y + ny, plan[k].start + i * cfg.native_interval_s});
        trip.data.labels.push_back(segs[pc.seg].id);
      }
      world.trips.push_back(std::move(trip));
    }
  }
  return world;
}

// Trajectories and labeled trajectories of a trip subset.
inline std::vector<Trajectory> trajectories_of(std::span<const SyntheticTrip> trips) {
  std::vector<Trajectory> out;
  for (const SyntheticTrip& t : trips) out.push_back(t.data.trajectory);
  return out;
}

inline std::vector<LabeledTrajectory> labeled_of(std::span<const SyntheticTrip> trips) {
  std::vector<LabeledTrajectory> out;
  for (const SyntheticTrip& t : trips) out.push_back(t.data);
  return out;
}

}  // namespace crfmm
