#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crfmm/error.hpp"
#include "crfmm/geometry.hpp"
#include "crfmm/time_slot.hpp"

namespace crfmm {

using NodeId = std::int64_t;
using SegmentId = std::int64_t;

struct Node {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;

  Point point() const { return {x, y}; }
};

// Directed road segment. A two-way road is two segments.
struct RoadSegment {
  SegmentId id = 0;
  NodeId from_node = 0;
  NodeId to_node = 0;
  double length = 0.0;
  std::array<double, 3> speed_by_slot{};  // m/s, indexed by slot_index()
  std::vector<Point> polyline;

  double speed(TimeSlot s) const { return speed_by_slot[slot_index(s)]; }
};

inline RoadSegment make_segment(SegmentId id, NodeId from, NodeId to, std::vector<Point> polyline,
                                std::array<double, 3> speeds) {
  RoadSegment s;
  s.id = id;
  s.from_node = from;
  s.to_node = to;
  s.length = polyline_length(polyline);
  s.speed_by_slot = speeds;
  s.polyline = std::move(polyline);
  return s;
}

struct ProjectionResult {
  SegmentId segment_id = 0;
  Point point;
  double distance = 0.0;      // meters from the observation
  double offset_along = 0.0;  // meters from segment start
};

// A network route between two projected points.
struct Route {
  double distance = 0.0;     // meters
  double travel_time = 0.0;  // seconds at the slot speeds
  std::vector<SegmentId> segments;
};

inline ProjectionResult project_point(Point p, const RoadSegment& seg) {
  const PolylineProjection pp = project_onto_polyline(p, seg.polyline);
  double offset = pp.offset;
  if (offset > seg.length) offset = seg.length;
  return {seg.id, pp.point, pp.distance, offset};
}

// Immutable road graph with a uniform-grid spatial index. All queries are
// const and safe to call concurrently.
class RoadNetwork {
 public:
  static constexpr double kDefaultCellSize = 250.0;

  RoadNetwork() = default;

  RoadNetwork(std::vector<Node> nodes, std::vector<RoadSegment> segments,
              double cell_size = kDefaultCellSize)
      : nodes_(std::move(nodes)), segments_(std::move(segments)), cell_size_(cell_size) {
    if (!(cell_size_ > 0.0)) throw InputError("grid cell size must be positive");
    validate_and_index();
    build_grid();
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<RoadSegment>& segments() const { return segments_; }
  std::size_t segment_count() const { return segments_.size(); }
  double cell_size() const { return cell_size_; }

  bool has_segment(SegmentId id) const { return seg_index_.contains(id); }

  std::size_t segment_index(SegmentId id) const {
    auto it = seg_index_.find(id);
    if (it == seg_index_.end()) throw InputError("unknown segment id " + std::to_string(id));
    return it->second;
  }

  const RoadSegment& segment(SegmentId id) const { return segments_[segment_index(id)]; }

  const Node& node(NodeId id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) throw InputError("unknown node id " + std::to_string(id));
    return nodes_[it->second];
  }

  // Segments whose from_node is this segment's to_node.
  std::span<const std::size_t> successors(std::size_t seg_idx) const {
    return out_segments_[seg_to_[seg_idx]];
  }

  bool follows(SegmentId from, SegmentId to) const {
    return segment(from).to_node == segment(to).from_node;
  }

  // Distinct consecutive segments, each starting where the previous ends.
  bool is_complete_path(std::span<const SegmentId> path) const {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (!has_segment(path[i])) return false;
      if (i > 0 && (path[i] == path[i - 1] || !follows(path[i - 1], path[i]))) return false;
    }
    return true;
  }

  // The min(k, W) segments nearest to p, ordered by (distance, segment id).
  std::vector<ProjectionResult> nearest_segments(Point p, std::size_t k) const {
    std::vector<ProjectionResult> found;
    if (segments_.empty() || k == 0) return found;
    k = std::min(k, segments_.size());

    const auto less = [](const ProjectionResult& a, const ProjectionResult& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.segment_id < b.segment_id);
    };
    // Max-heap of the best k so far; its top is the current k-th result.
    std::vector<ProjectionResult> heap;
    heap.reserve(k + 1);
    std::vector<bool> seen(segments_.size(), false);

    const long cx = clamp_cell(static_cast<long>(std::floor((p.x - min_x_) / cell_size_)), cols_);
    const long cy = clamp_cell(static_cast<long>(std::floor((p.y - min_y_) / cell_size_)), rows_);
    const long max_ring = std::max({cx, cols_ - 1 - cx, cy, rows_ - 1 - cy});

    auto visit_cell = [&](long gx, long gy) {
      for (std::size_t si : cells_[static_cast<std::size_t>(gy * cols_ + gx)]) {
        if (seen[si]) continue;
        seen[si] = true;
        ProjectionResult r = project_point(p, segments_[si]);
        if (heap.size() < k) {
          heap.push_back(r);
          std::push_heap(heap.begin(), heap.end(), less);
        } else if (less(r, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), less);
          heap.back() = r;
          std::push_heap(heap.begin(), heap.end(), less);
        }
      }
    };

    for (long ring = 0; ring <= max_ring; ++ring) {
      for (long gy = cy - ring; gy <= cy + ring; ++gy) {
        if (gy < 0 || gy >= rows_) continue;
        const bool edge_row = (gy == cy - ring || gy == cy + ring);
        for (long gx = cx - ring; gx <= cx + ring; gx += (edge_row ? 1 : 2 * ring)) {
          if (gx >= 0 && gx < cols_) visit_cell(gx, gy);
          if (ring == 0) break;
        }
      }
      if (heap.size() < k) continue;
      // Lower bound on the distance to any cell outside the searched block.
      double bound = std::numeric_limits<double>::infinity();
      if (cx - ring > 0) bound = std::min(bound, p.x - (min_x_ + static_cast<double>(cx - ring) * cell_size_));
      if (cx + ring < cols_ - 1)
        bound = std::min(bound, (min_x_ + static_cast<double>(cx + ring + 1) * cell_size_) - p.x);
      if (cy - ring > 0) bound = std::min(bound, p.y - (min_y_ + static_cast<double>(cy - ring) * cell_size_));
      if (cy + ring < rows_ - 1)
        bound = std::min(bound, (min_y_ + static_cast<double>(cy + ring + 1) * cell_size_) - p.y);
      if (bound > heap.front().distance) break;
    }

    std::sort_heap(heap.begin(), heap.end(), less);
    return heap;
  }

  // Shortest directed route from a to b, including the partial lengths on
  // the first and last segment. nullopt when b is unreachable.
  std::optional<Route> path_distance(const ProjectionResult& a, const ProjectionResult& b,
                                     TimeSlot slot) const {
    return routes_from(a, std::span<const ProjectionResult>(&b, 1), slot).front();
  }

  // One-to-many variant of path_distance: a single search from `a` settles
  // every target.
  std::vector<std::optional<Route>> routes_from(const ProjectionResult& a,
                                                std::span<const ProjectionResult> targets,
                                                TimeSlot slot, bool want_segments = true) const {
    std::vector<std::optional<Route>> out(targets.size());
    const std::size_t sa = segment_index(a.segment_id);
    const RoadSegment& seg_a = segments_[sa];
    const double va = seg_a.speed(slot);

    std::vector<std::size_t> wanted;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const ProjectionResult& b = targets[i];
      const std::size_t sb = segment_index(b.segment_id);
      if (sb == sa && b.offset_along >= a.offset_along) {
        Route r;
        r.distance = b.offset_along - a.offset_along;
        r.travel_time = r.distance / va;
        if (want_segments) r.segments = {seg_a.id};
        out[i] = std::move(r);
      } else {
        wanted.push_back(seg_from_[sb]);
      }
    }
    if (wanted.empty()) return out;

    const std::size_t n = nodes_.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<double> time(n, 0.0);
    std::vector<std::size_t> pred(n, kNone);
    std::vector<bool> settled(n, false);
    std::vector<bool> is_target(n, false);
    std::size_t remaining = 0;
    for (std::size_t node : wanted) {
      if (!is_target[node]) {
        is_target[node] = true;
        ++remaining;
      }
    }

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    const std::size_t src = seg_to_[sa];
    dist[src] = seg_a.length - a.offset_along;
    time[src] = dist[src] / va;
    pq.emplace(dist[src], src);
    while (!pq.empty() && remaining > 0) {
      auto [d, u] = pq.top();
      pq.pop();
      if (settled[u]) continue;
      settled[u] = true;
      if (is_target[u]) --remaining;
      for (std::size_t si : out_segments_[u]) {
        const RoadSegment& s = segments_[si];
        const std::size_t v = seg_to_[si];
        const double nd = d + s.length;
        if (nd < dist[v]) {
          dist[v] = nd;
          time[v] = time[u] + s.length / s.speed(slot);
          pred[v] = si;
          pq.emplace(nd, v);
        }
      }
    }

    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (out[i]) continue;
      const ProjectionResult& b = targets[i];
      const std::size_t sb = segment_index(b.segment_id);
      const std::size_t node = seg_from_[sb];
      if (!settled[node]) continue;
      const RoadSegment& seg_b = segments_[sb];
      Route r;
      r.distance = dist[node] + b.offset_along;
      r.travel_time = time[node] + b.offset_along / seg_b.speed(slot);
      if (want_segments) {
        r.segments.push_back(seg_b.id);
        for (std::size_t cur = node; cur != src;) {
          const std::size_t si = pred[cur];
          r.segments.push_back(segments_[si].id);
          cur = seg_from_[si];
        }
        r.segments.push_back(seg_a.id);
        std::reverse(r.segments.begin(), r.segments.end());
      }
      out[i] = std::move(r);
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  static long clamp_cell(long c, long n) { return c < 0 ? 0 : (c >= n ? n - 1 : c); }

  void validate_and_index() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& nd = nodes_[i];
      if (!std::isfinite(nd.x) || !std::isfinite(nd.y))
        throw NetworkError("node " + std::to_string(nd.id) + " has non-finite coordinates");
      if (!node_index_.emplace(nd.id, i).second)
        throw NetworkError("duplicate node id " + std::to_string(nd.id));
    }
    out_segments_.assign(nodes_.size(), {});
    seg_from_.resize(segments_.size());
    seg_to_.resize(segments_.size());
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const RoadSegment& s = segments_[i];
      const std::string tag = "segment " + std::to_string(s.id) + ": ";
      if (!seg_index_.emplace(s.id, i).second) throw NetworkError(tag + "duplicate segment id");
      auto from = node_index_.find(s.from_node);
      auto to = node_index_.find(s.to_node);
      if (from == node_index_.end()) throw NetworkError(tag + "unknown from node " + std::to_string(s.from_node));
      if (to == node_index_.end()) throw NetworkError(tag + "unknown to node " + std::to_string(s.to_node));
      if (s.from_node == s.to_node) throw NetworkError(tag + "from and to node are equal");
      if (s.polyline.size() < 2) throw NetworkError(tag + "polyline needs at least two points");
      for (const Point& q : s.polyline)
        if (!std::isfinite(q.x) || !std::isfinite(q.y)) throw NetworkError(tag + "non-finite polyline point");
      const double arc = polyline_length(s.polyline);
      if (!(s.length > 0.0) || !(arc > 0.0)) throw NetworkError(tag + "length must be positive");
      if (std::abs(s.length - arc) > 1e-6 * arc)
        throw NetworkError(tag + "length does not match polyline arc length");
      if (distance(s.polyline.front(), nodes_[from->second].point()) > 1e-3 ||
          distance(s.polyline.back(), nodes_[to->second].point()) > 1e-3)
        throw NetworkError(tag + "polyline endpoints do not match its nodes");
      for (double v : s.speed_by_slot)
        if (!(v > 0.0) || !std::isfinite(v)) throw NetworkError(tag + "slot speeds must be positive");
      seg_from_[i] = from->second;
      seg_to_[i] = to->second;
      out_segments_[from->second].push_back(i);
    }
  }

  void build_grid() {
    min_x_ = min_y_ = std::numeric_limits<double>::infinity();
    double max_x = -min_x_, max_y = -min_y_;
    for (const RoadSegment& s : segments_) {
      for (const Point& q : s.polyline) {
        min_x_ = std::min(min_x_, q.x);
        min_y_ = std::min(min_y_, q.y);
        max_x = std::max(max_x, q.x);
        max_y = std::max(max_y, q.y);
      }
    }
    if (segments_.empty()) {
      min_x_ = min_y_ = max_x = max_y = 0.0;
    }
    cols_ = static_cast<long>(std::floor((max_x - min_x_) / cell_size_)) + 1;
    rows_ = static_cast<long>(std::floor((max_y - min_y_) / cell_size_)) + 1;
    cells_.assign(static_cast<std::size_t>(cols_ * rows_), {});
    for (std::size_t si = 0; si < segments_.size(); ++si) {
      const auto& line = segments_[si].polyline;
      for (std::size_t i = 1; i < line.size(); ++i) {
        const long x0 = cell_x(std::min(line[i - 1].x, line[i].x));
        const long x1 = cell_x(std::max(line[i - 1].x, line[i].x));
        const long y0 = cell_y(std::min(line[i - 1].y, line[i].y));
        const long y1 = cell_y(std::max(line[i - 1].y, line[i].y));
        for (long gy = y0; gy <= y1; ++gy) {
          for (long gx = x0; gx <= x1; ++gx) {
            auto& cell = cells_[static_cast<std::size_t>(gy * cols_ + gx)];
            if (cell.empty() || cell.back() != si) cell.push_back(si);
          }
        }
      }
    }
  }

  long cell_x(double x) const {
    return clamp_cell(static_cast<long>(std::floor((x - min_x_) / cell_size_)), cols_);
  }
  long cell_y(double y) const {
    return clamp_cell(static_cast<long>(std::floor((y - min_y_) / cell_size_)), rows_);
  }

  std::vector<Node> nodes_;
  std::vector<RoadSegment> segments_;
  double cell_size_ = kDefaultCellSize;

  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<SegmentId, std::size_t> seg_index_;
  std::vector<std::vector<std::size_t>> out_segments_;  // by node index
  std::vector<std::size_t> seg_from_;                   // node index per segment
  std::vector<std::size_t> seg_to_;

  double min_x_ = 0.0;
  double min_y_ = 0.0;
  long cols_ = 1;
  long rows_ = 1;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace crfmm
