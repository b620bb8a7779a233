#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crfmm/error.hpp"
#include "crfmm/geometry.hpp"
#include "crfmm/road_network.hpp"
#include "crfmm/time_slot.hpp"

namespace crfmm {

using VehicleId = std::int64_t;
using TripId = std::int64_t;

struct GpsPoint {
  double x = 0.0;
  double y = 0.0;
  Timestamp t = 0;

  Point point() const { return {x, y}; }
  friend bool operator==(const GpsPoint&, const GpsPoint&) = default;
};

struct Trajectory {
  VehicleId vehicle_id = 0;
  TripId trip_id = 0;
  std::vector<GpsPoint> points;  // strictly increasing t

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Ordered segment sequence traversed in one trip.
struct Path {
  std::vector<SegmentId> segments;

  bool empty() const { return segments.empty(); }
  std::size_t size() const { return segments.size(); }
  friend bool operator==(const Path&, const Path&) = default;
};

// Origin/destination pair of segments.
struct Trip {
  SegmentId origin_segment = 0;
  SegmentId destination_segment = 0;

  friend bool operator==(const Trip&, const Trip&) = default;
};

struct LabeledTrajectory {
  Trajectory trajectory;
  std::vector<SegmentId> labels;  // ground truth, one per point
  Path full_path;
};

inline void validate_trajectory(const Trajectory& traj) {
  const std::string tag =
      "trajectory " + std::to_string(traj.vehicle_id) + "/" + std::to_string(traj.trip_id) + ": ";
  if (traj.points.empty()) throw InputError(tag + "no points");
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const GpsPoint& p = traj.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError(tag + "non-finite coordinates");
    if (p.t < 0) throw InputError(tag + "negative timestamp");
    if (i > 0 && p.t <= traj.points[i - 1].t) throw InputError(tag + "timestamps not strictly increasing");
  }
}

inline void validate_labeled(const LabeledTrajectory& lt) {
  validate_trajectory(lt.trajectory);
  if (lt.labels.size() != lt.trajectory.points.size())
    throw InputError("label count does not match point count for trajectory " +
                     std::to_string(lt.trajectory.vehicle_id) + "/" + std::to_string(lt.trajectory.trip_id));
  for (SegmentId s : lt.labels) {
    bool found = false;
    for (SegmentId q : lt.full_path.segments) found = found || q == s;
    if (!found)
      throw InputError("label segment " + std::to_string(s) + " missing from the path of trajectory " +
                       std::to_string(lt.trajectory.vehicle_id) + "/" + std::to_string(lt.trajectory.trip_id));
  }
}

// Indices kept by downsample(): the first point, each point at least
// `interval` seconds after the last kept one, and always the final point.
inline std::vector<std::size_t> downsample_indices(const Trajectory& traj, double interval) {
  std::vector<std::size_t> keep;
  if (traj.points.empty()) return keep;
  keep.push_back(0);
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    if (static_cast<double>(traj.points[i].t - traj.points[keep.back()].t) >= interval) keep.push_back(i);
  }
  if (keep.back() != traj.points.size() - 1) keep.push_back(traj.points.size() - 1);
  return keep;
}

inline Trajectory downsample(const Trajectory& traj, double interval) {
  Trajectory out{traj.vehicle_id, traj.trip_id, {}};
  for (std::size_t i : downsample_indices(traj, interval)) out.points.push_back(traj.points[i]);
  return out;
}

inline LabeledTrajectory downsample(const LabeledTrajectory& lt, double interval) {
  LabeledTrajectory out;
  out.trajectory = {lt.trajectory.vehicle_id, lt.trajectory.trip_id, {}};
  out.full_path = lt.full_path;
  for (std::size_t i : downsample_indices(lt.trajectory, interval)) {
    out.trajectory.points.push_back(lt.trajectory.points[i]);
    out.labels.push_back(lt.labels[i]);
  }
  return out;
}

// Mean sampling interval in seconds.
inline double average_interval(const Trajectory& traj) {
  if (traj.points.size() < 2) throw InputError("average interval needs at least two points");
  return static_cast<double>(traj.points.back().t - traj.points.front().t) /
         static_cast<double>(traj.points.size() - 1);
}

}  // namespace crfmm
