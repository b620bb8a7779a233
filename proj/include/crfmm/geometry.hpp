#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "crfmm/error.hpp"

namespace crfmm {

// Planar coordinates in meters (x east, y north).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double polyline_length(std::span<const Point> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += distance(line[i - 1], line[i]);
  return total;
}

struct PolylineProjection {
  Point point;
  double distance = 0.0;
  double offset = 0.0;  // arc length from the first vertex
};

// Nearest point on a polyline. Ties between pieces resolve to the smaller
// arc offset.
inline PolylineProjection project_onto_polyline(Point p, std::span<const Point> line) {
  if (line.size() < 2) throw NetworkError("polyline needs at least two points");
  PolylineProjection best;
  best.distance = INFINITY;
  double walked = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Point a = line[i - 1];
    const Point b = line[i];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double len = std::sqrt(len2);
    double u = 0.0;
    if (len2 > 0.0) {
      u = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
      u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    }
    Point foot{a.x + u * dx, a.y + u * dy};
    if (u == 1.0) foot = b;
    const double d = distance(p, foot);
    if (d < best.distance) {
      best.point = foot;
      best.distance = d;
      best.offset = walked + u * len;
    }
    walked += len;
  }
  if (walked <= 0.0) throw NetworkError("polyline has zero length");
  if (best.offset > walked) best.offset = walked;
  return best;
}

// Point at arc offset `s` along the polyline (clamped to its extent).
inline Point point_along(std::span<const Point> line, double s) {
  if (s <= 0.0) return line.front();
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double len = distance(line[i - 1], line[i]);
    if (s <= len && len > 0.0) {
      const double u = s / len;
      return {line[i - 1].x + u * (line[i].x - line[i - 1].x),
              line[i - 1].y + u * (line[i].y - line[i - 1].y)};
    }
    s -= len;
  }
  return line.back();
}

}  // namespace crfmm
