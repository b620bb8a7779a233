#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crfmm/error.hpp"
#include "crfmm/road_network.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

struct CrfParams {
  double mu = 1.0;       // generative weight
  double lambda1 = 1.0;  // spatial transition weight
  double lambda2 = 1.0;  // temporal transition weight

  friend bool operator==(const CrfParams&, const CrfParams&) = default;
};

// exp(-(d/scale)^2): 1 on the road, decreasing with projection distance.
inline double generative_feature(double d_p, double scale) {
  const double z = d_p / scale;
  return std::exp(-z * z);
}

// Squared ratio of straight-line to route distance, clamped to [0, 1].
// An unreachable pair (no route) scores 0.
inline double spatial_feature(double d_euclid, std::optional<double> d_route) {
  if (!d_route) return 0.0;
  const double dr = *d_route;
  if (dr <= 0.0) return 1.0;
  const double r = d_euclid / dr;
  return std::min(1.0, r * r);
}

// Squared ratio of observed to expected travel time (smaller over larger).
inline double temporal_feature(double dt_observed, double dt_expected) {
  if (dt_expected <= 0.0) return 1.0;
  const double lo = std::min(dt_observed, dt_expected);
  const double hi = std::max(dt_observed, dt_expected);
  if (hi <= 0.0) return 1.0;
  const double r = lo / hi;
  return r * r;
}

struct TransitionFeatures {
  double spatial = 0.0;
  double temporal = 0.0;
  std::vector<SegmentId> path_segments;
  bool reachable = false;
};

inline double combined_transition(const TransitionFeatures& tf, const CrfParams& params) {
  return params.lambda1 * tf.spatial + params.lambda2 * tf.temporal;
}

inline double combined_transition(double spatial, double temporal, const CrfParams& params) {
  return params.lambda1 * spatial + params.lambda2 * temporal;
}

struct Candidate {
  ProjectionResult projection;
  double generative = 0.0;
};

// Dense feature block between two consecutive lattice layers, row-major
// (row = earlier candidate, column = later candidate). Connecting segment
// sequences are stored flat.
struct TransitionBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  TimeSlot slot = TimeSlot::Normal;
  std::vector<double> spatial;
  std::vector<double> temporal;
  std::vector<double> route_m;      // NaN when unreachable
  std::vector<double> expected_s;   // NaN when unreachable
  std::vector<std::uint8_t> reachable;
  std::vector<std::uint32_t> path_offset;  // rows*cols + 1 entries when paths are kept
  std::vector<SegmentId> path_data;

  std::size_t at(std::size_t i, std::size_t j) const { return i * cols + j; }

  std::span<const SegmentId> path(std::size_t i, std::size_t j) const {
    if (path_offset.empty()) return {};
    const std::size_t e = at(i, j);
    return std::span<const SegmentId>(path_data).subspan(path_offset[e], path_offset[e + 1] - path_offset[e]);
  }

  TransitionFeatures features(std::size_t i, std::size_t j) const {
    const std::size_t e = at(i, j);
    auto p = path(i, j);
    return {spatial[e], temporal[e], std::vector<SegmentId>(p.begin(), p.end()), reachable[e] != 0};
  }
};

struct CandidateLattice {
  std::vector<std::vector<Candidate>> layers;
  std::vector<TransitionBlock> transitions;  // layers.size() - 1 blocks
  std::vector<Timestamp> timestamps;

  std::size_t size() const { return layers.size(); }
};

struct LatticeOptions {
  std::size_t k = 6;
  double scale_m = 20.0;
  double max_offset_m = 500.0;  // nearest candidate farther than this is off-map
  bool keep_paths = true;
};

// Features of one layer pair, computed from two observations and their candidates.
inline TransitionBlock build_transition(const RoadNetwork& net, const GpsPoint& from, const GpsPoint& to,
                                        std::span<const Candidate> from_cands, std::span<const Candidate> to_cands,
                                        bool keep_paths) {
  TransitionBlock block;
  block.rows = from_cands.size();
  block.cols = to_cands.size();
  block.slot = slot_of(from.t);
  const std::size_t n = block.rows * block.cols;
  block.spatial.assign(n, 0.0);
  block.temporal.assign(n, 0.0);
  block.route_m.assign(n, NAN);
  block.expected_s.assign(n, NAN);
  block.reachable.assign(n, 0);
  if (keep_paths) block.path_offset.assign(n + 1, 0);

  const double d_euclid = distance(from.point(), to.point());
  const double dt = static_cast<double>(to.t - from.t);
  std::vector<ProjectionResult> targets;
  targets.reserve(to_cands.size());
  for (const Candidate& c : to_cands) targets.push_back(c.projection);

  for (std::size_t i = 0; i < block.rows; ++i) {
    auto routes = net.routes_from(from_cands[i].projection, targets, block.slot, keep_paths);
    for (std::size_t j = 0; j < block.cols; ++j) {
      const std::size_t e = block.at(i, j);
      if (routes[j]) {
        block.reachable[e] = 1;
        block.route_m[e] = routes[j]->distance;
        block.expected_s[e] = routes[j]->travel_time;
        block.spatial[e] = spatial_feature(d_euclid, routes[j]->distance);
        block.temporal[e] = temporal_feature(dt, routes[j]->travel_time);
        if (keep_paths) block.path_data.insert(block.path_data.end(), routes[j]->segments.begin(), routes[j]->segments.end());
      }
      if (keep_paths) block.path_offset[e + 1] = static_cast<std::uint32_t>(block.path_data.size());
    }
  }
  return block;
}

inline std::vector<Candidate> candidates_for(const RoadNetwork& net, Point p, std::size_t point_index,
                                             const LatticeOptions& opt) {
  std::vector<Candidate> out;
  for (const ProjectionResult& r : net.nearest_segments(p, opt.k))
    out.push_back({r, generative_feature(r.distance, opt.scale_m)});
  if (out.empty()) throw OffMapError(point_index, INFINITY);
  if (out.front().projection.distance > opt.max_offset_m)
    throw OffMapError(point_index, out.front().projection.distance);
  return out;
}

inline CandidateLattice build_lattice(const Trajectory& traj, const RoadNetwork& net,
                                      const LatticeOptions& opt = {}) {
  if (traj.points.empty()) throw InputError("cannot build a lattice for an empty trajectory");
  if (opt.k == 0) throw InputError("candidate count must be at least 1");
  CandidateLattice lat;
  lat.layers.reserve(traj.points.size());
  for (std::size_t t = 0; t < traj.points.size(); ++t) {
    lat.layers.push_back(candidates_for(net, traj.points[t].point(), t, opt));
    lat.timestamps.push_back(traj.points[t].t);
  }
  for (std::size_t t = 0; t + 1 < traj.points.size(); ++t)
    lat.transitions.push_back(
        build_transition(net, traj.points[t], traj.points[t + 1], lat.layers[t], lat.layers[t + 1], opt.keep_paths));
  return lat;
}

}  // namespace crfmm
