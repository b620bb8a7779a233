#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "crfmm/crfmm.hpp"

namespace fixtures {

using namespace crfmm;

inline constexpr std::array<double, 3> kUniformSpeed{10.0, 10.0, 10.0};

// Straight two-way road along the x axis, split into `n` segments of
// `len` meters. Segment 2i+1 runs east, 2i+2 runs west.
inline RoadNetwork line_network(int n = 1, double len = 100.0) {
  std::vector<Node> nodes;
  std::vector<RoadSegment> segs;
  for (int i = 0; i <= n; ++i) nodes.push_back({i, i * len, 0.0});
  for (int i = 0; i < n; ++i) {
    const Point a{i * len, 0.0}, b{(i + 1) * len, 0.0};
    segs.push_back(make_segment(2 * i + 1, i, i + 1, {a, b}, kUniformSpeed));
    segs.push_back(make_segment(2 * i + 2, i + 1, i, {b, a}, kUniformSpeed));
  }
  return RoadNetwork(nodes, segs);
}

// Nodes 0..4: triangle 0-1-2 with a chord 1-3 and a tail 3-4, directed
// both ways except 2->0. Segment ids are 10*from + to.
inline RoadNetwork triangle_chord_network() {
  std::vector<Node> nodes{{0, 0, 0}, {1, 400, 0}, {2, 200, 300}, {3, 600, 300}, {4, 900, 350}};
  const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 0}, {1, 2}, {2, 1}, {0, 2},
                                               {1, 3}, {3, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}};
  std::vector<RoadSegment> segs;
  for (auto [a, b] : edges)
    segs.push_back(make_segment(10 * a + b, a, b, {nodes[a].point(), nodes[b].point()}, kUniformSpeed));
  return RoadNetwork(nodes, segs);
}

// Random planar-ish network: `n_nodes` scattered points, `n_segments`
// random directed links with a bent polyline.
inline RoadNetwork random_network(std::mt19937_64& rng, int n_nodes, int n_segments, double extent = 3000.0) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  std::uniform_int_distribution<int> pick(0, n_nodes - 1);
  std::uniform_real_distribution<double> bend(-80.0, 80.0);
  std::vector<Node> nodes;
  for (int i = 0; i < n_nodes; ++i) nodes.push_back({i, coord(rng), coord(rng)});
  std::vector<RoadSegment> segs;
  for (int s = 0; s < n_segments; ++s) {
    int a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    const Point pa = nodes[a].point(), pb = nodes[b].point();
    const Point mid{(pa.x + pb.x) / 2 + bend(rng), (pa.y + pb.y) / 2 + bend(rng)};
    segs.push_back(make_segment(s + 1, a, b, {pa, mid, pb}, kUniformSpeed));
  }
  return RoadNetwork(nodes, segs);
}

// Two routes from (0,0) to (3000,0) bowing to y=+40 (segments 2, 5) and
// y=-40 (segments 3, 4), with lead-in 1 and lead-out 6. Mirror images, so
// every feature of one route equals that of the other.
struct TwoRoutes {
  RoadNetwork net;
  Trajectory traj;
  Path upper{{1, 2, 5, 6}};
  Path lower{{1, 3, 4, 6}};
};

inline TwoRoutes two_routes(Timestamp start = 12 * 3600) {
  std::vector<Node> nodes{{0, -1500, 0}, {1, 0, 0}, {2, 1500, 40}, {3, 1500, -40}, {4, 3000, 0}, {5, 4500, 0}};
  auto seg = [&](SegmentId id, NodeId a, NodeId b) {
    return make_segment(id, a, b, {nodes[a].point(), nodes[b].point()}, kUniformSpeed);
  };
  std::vector<RoadSegment> segs{seg(1, 0, 1), seg(2, 1, 2), seg(5, 2, 4),
                                seg(3, 1, 3), seg(4, 3, 4), seg(6, 4, 5)};
  TwoRoutes f;
  f.net = RoadNetwork(nodes, segs);
  f.traj = {7, 1, {{-1400, 0, start}, {1500, 0, start + 300}, {4400, 0, start + 600}}};
  return f;
}

// Two equal-length routes between the same junctions, one at 60 km/h and
// the other at 30 km/h; observations sit on the shared lead-in and
// lead-out plus a midpoint equidistant from both.
struct TemporalScenario {
  RoadNetwork net;
  Trajectory traj;
  SegmentId fast_mid = 2;
  SegmentId slow_mid = 3;
};

inline TemporalScenario temporal_scenario() {
  const double fast = 60.0 / 3.6, slow = 30.0 / 3.6;
  std::vector<Node> nodes{{0, -500, 0}, {1, 0, 0}, {2, 500, 60}, {3, 500, -60}, {4, 1000, 0}, {5, 1500, 0}};
  auto seg = [&](SegmentId id, NodeId a, NodeId b, double v) {
    return make_segment(id, a, b, {nodes[a].point(), nodes[b].point()}, {v, v, v});
  };
  std::vector<RoadSegment> segs{seg(1, 0, 1, fast), seg(2, 1, 2, fast), seg(4, 2, 4, fast),
                                seg(3, 1, 3, slow), seg(5, 3, 4, slow), seg(6, 4, 5, fast)};
  TemporalScenario s{RoadNetwork(nodes, segs), {}, 2, 3};
  // Route length between the outer observations: 100 + 2*sqrt(500^2+60^2) + 400.
  const double mid_len = 2.0 * std::hypot(500.0, 60.0);
  const Timestamp t1 = static_cast<Timestamp>(std::llround((100.0 + mid_len / 2.0) / fast));
  const Timestamp t2 = static_cast<Timestamp>(std::llround((100.0 + mid_len + 400.0) / fast));
  s.traj = {3, 1, {{-100, 0, 12 * 3600}, {500, 0, 12 * 3600 + t1}, {1400, 0, 12 * 3600 + t2}}};
  return s;
}

// Lattice with random features and no network behind it. Segment ids are
// 100*layer + candidate.
inline CandidateLattice random_lattice(std::mt19937_64& rng, std::size_t layers, std::size_t max_cands,
                                       bool allow_unreachable = true) {
  std::uniform_int_distribution<std::size_t> count(1, max_cands);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CandidateLattice lat;
  for (std::size_t t = 0; t < layers; ++t) {
    std::vector<Candidate> layer(count(rng));
    for (std::size_t j = 0; j < layer.size(); ++j) {
      layer[j].projection.segment_id = static_cast<SegmentId>(100 * t + j);
      layer[j].generative = u(rng);
    }
    lat.layers.push_back(std::move(layer));
    lat.timestamps.push_back(static_cast<Timestamp>(60 * t));
  }
  for (std::size_t t = 0; t + 1 < layers; ++t) {
    TransitionBlock b;
    b.rows = lat.layers[t].size();
    b.cols = lat.layers[t + 1].size();
    const std::size_t n = b.rows * b.cols;
    for (std::size_t e = 0; e < n; ++e) {
      const bool reach = !allow_unreachable || u(rng) > 0.15;
      b.reachable.push_back(reach ? 1 : 0);
      b.spatial.push_back(reach ? u(rng) : 0.0);
      b.temporal.push_back(reach ? u(rng) : 0.0);
      b.route_m.push_back(NAN);
      b.expected_s.push_back(NAN);
    }
    lat.transitions.push_back(std::move(b));
  }
  return lat;
}

// Calls fn(assignment) for every assignment of the lattice.
inline void for_each_assignment(const CandidateLattice& lat,
                                const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> a(lat.size(), 0);
  while (true) {
    fn(a);
    bool advanced = false;
    for (std::size_t t = lat.size(); t-- > 0;) {
      if (++a[t] < lat.layers[t].size()) {
        advanced = true;
        break;
      }
      a[t] = 0;
    }
    if (!advanced) return;
  }
}

}  // namespace fixtures
