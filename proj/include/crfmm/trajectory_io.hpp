#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "crfmm/error.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

struct TrajectoryKey {
  VehicleId vehicle_id = 0;
  TripId trip_id = 0;

  auto operator<=>(const TrajectoryKey&) const = default;
};

inline TrajectoryKey key_of(const Trajectory& t) { return {t.vehicle_id, t.trip_id}; }

// point index -> segment, per trajectory
using LabelTable = std::map<TrajectoryKey, std::map<std::size_t, SegmentId>>;
using PathTable = std::map<TrajectoryKey, Path>;

namespace csv {

// Shortest fixed-point rendering with at least `min_frac` fractional digits
// that parses back to exactly `v`.
inline std::string format_decimal(double v, int min_frac = 3) {
  char buf[64];
  for (int prec = min_frac; prec <= 17; ++prec) {
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, prec);
    double back = 0.0;
    std::from_chars(buf, res.ptr, back);
    if (back == v) return std::string(buf, res.ptr);
  }
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 17);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse(std::string_view field, std::size_t row, std::string_view what) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw InputError("row " + std::to_string(row) + ": malformed " + std::string(what) + " '" +
                     std::string(field) + "'");
  return value;
}

// Reads rows after the exact `header`, invoking fn(fields, row_number).
template <typename Fn>
void read_rows(std::istream& in, std::string_view header, std::size_t columns, Fn&& fn) {
  std::string line;
  std::size_t row = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != header) throw InputError("expected header '" + std::string(header) + "'");
      saw_header = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != columns)
      throw InputError("row " + std::to_string(row) + ": expected " + std::to_string(columns) + " fields");
    fn(fields, row);
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace csv

inline constexpr std::string_view kTrajectoryHeader = "vehicle_id,trip_id,x,y,t";
inline constexpr std::string_view kLabelHeader = "vehicle_id,trip_id,point_index,segment_id";
inline constexpr std::string_view kMatchHeader = "vehicle_id,trip_id,point_index,matched_segment_id";
inline constexpr std::string_view kPathHeader = "vehicle_id,trip_id,seq,segment_id";

// Groups rows by (vehicle, trip) in key order; each group sorted by time.
inline std::vector<Trajectory> load_trajectories(std::istream& in) {
  std::map<TrajectoryKey, std::vector<std::pair<GpsPoint, std::size_t>>> groups;
  csv::read_rows(in, kTrajectoryHeader, 5, [&](const auto& f, std::size_t row) {
    TrajectoryKey key{csv::parse<VehicleId>(f[0], row, "vehicle_id"), csv::parse<TripId>(f[1], row, "trip_id")};
    GpsPoint p{csv::parse<double>(f[2], row, "x"), csv::parse<double>(f[3], row, "y"),
               csv::parse<Timestamp>(f[4], row, "t")};
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw InputError("row " + std::to_string(row) + ": non-finite coordinate");
    if (p.t < 0) throw InputError("row " + std::to_string(row) + ": negative timestamp");
    groups[key].emplace_back(p, row);
  });
  std::vector<Trajectory> out;
  out.reserve(groups.size());
  for (auto& [key, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.t < b.first.t; });
    Trajectory traj{key.vehicle_id, key.trip_id, {}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].first.t == rows[i - 1].first.t)
        throw InputError("row " + std::to_string(rows[i].second) + ": duplicate timestamp " +
                         std::to_string(rows[i].first.t) + " in trip " + std::to_string(key.trip_id));
      traj.points.push_back(rows[i].first);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
  auto in = csv::open_in(path);
  try {
    return load_trajectories(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_trajectories(std::ostream& out, std::span<const Trajectory> trajs) {
  out << kTrajectoryHeader << '\n';
  for (const Trajectory& t : trajs)
    for (const GpsPoint& p : t.points)
      out << t.vehicle_id << ',' << t.trip_id << ',' << csv::format_decimal(p.x) << ','
          << csv::format_decimal(p.y) << ',' << p.t << '\n';
}

inline void save_trajectories(const std::string& path, std::span<const Trajectory> trajs) {
  auto out = csv::open_out(path);
  save_trajectories(out, trajs);
}

// Reads a label or match file (both have four integer columns).
inline LabelTable load_labels(std::istream& in, std::string_view header = kLabelHeader) {
  LabelTable table;
  csv::read_rows(in, header, 4, [&](const auto& f, std::size_t row) {
    TrajectoryKey key{csv::parse<VehicleId>(f[0], row, "vehicle_id"), csv::parse<TripId>(f[1], row, "trip_id")};
    const auto idx = csv::parse<std::size_t>(f[2], row, "point_index");
    const auto seg = csv::parse<SegmentId>(f[3], row, "segment_id");
    if (!table[key].emplace(idx, seg).second)
      throw InputError("row " + std::to_string(row) + ": duplicate point index");
  });
  return table;
}

inline LabelTable load_labels(const std::string& path, std::string_view header = kLabelHeader) {
  auto in = csv::open_in(path);
  try {
    return load_labels(in, header);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_labels(std::ostream& out, const LabelTable& table, std::string_view header = kLabelHeader) {
  out << header << '\n';
  for (const auto& [key, rows] : table)
    for (const auto& [idx, seg] : rows)
      out << key.vehicle_id << ',' << key.trip_id << ',' << idx << ',' << seg << '\n';
}

inline void save_labels(const std::string& path, const LabelTable& table, std::string_view header = kLabelHeader) {
  auto out = csv::open_out(path);
  save_labels(out, table, header);
}

inline PathTable load_paths(std::istream& in) {
  std::map<TrajectoryKey, std::map<std::size_t, SegmentId>> rows;
  csv::read_rows(in, kPathHeader, 4, [&](const auto& f, std::size_t row) {
    TrajectoryKey key{csv::parse<VehicleId>(f[0], row, "vehicle_id"), csv::parse<TripId>(f[1], row, "trip_id")};
    const auto seq = csv::parse<std::size_t>(f[2], row, "seq");
    if (!rows[key].emplace(seq, csv::parse<SegmentId>(f[3], row, "segment_id")).second)
      throw InputError("row " + std::to_string(row) + ": duplicate seq");
  });
  PathTable table;
  for (const auto& [key, seqs] : rows) {
    Path p;
    for (const auto& [seq, seg] : seqs) p.segments.push_back(seg);
    table.emplace(key, std::move(p));
  }
  return table;
}

inline PathTable load_paths(const std::string& path) {
  auto in = csv::open_in(path);
  try {
    return load_paths(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_paths(std::ostream& out, const PathTable& table) {
  out << kPathHeader << '\n';
  for (const auto& [key, path] : table)
    for (std::size_t i = 0; i < path.segments.size(); ++i)
      out << key.vehicle_id << ',' << key.trip_id << ',' << i << ',' << path.segments[i] << '\n';
}

inline void save_paths(const std::string& path, const PathTable& table) {
  auto out = csv::open_out(path);
  save_paths(out, table);
}

// Joins trajectories with their per-point labels and full paths.
inline std::vector<LabeledTrajectory> attach_labels(std::span<const Trajectory> trajs, const LabelTable& labels,
                                                    const PathTable& paths) {
  std::vector<LabeledTrajectory> out;
  out.reserve(trajs.size());
  for (const Trajectory& t : trajs) {
    const TrajectoryKey key = key_of(t);
    const std::string tag = std::to_string(t.vehicle_id) + "/" + std::to_string(t.trip_id);
    auto lit = labels.find(key);
    if (lit == labels.end()) throw InputError("no labels for trajectory " + tag);
    auto pit = paths.find(key);
    if (pit == paths.end()) throw InputError("no path for trajectory " + tag);
    LabeledTrajectory lt{t, {}, pit->second};
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      auto it = lit->second.find(i);
      if (it == lit->second.end())
        throw InputError("missing label for point " + std::to_string(i) + " of trajectory " + tag);
      lt.labels.push_back(it->second);
    }
    validate_labeled(lt);
    out.push_back(std::move(lt));
  }
  return out;
}

}  // namespace crfmm
