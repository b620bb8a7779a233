#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crfmm/error.hpp"
#include "crfmm/time_slot.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

using PathId = std::int64_t;

enum class PreferenceMode { Literal, Normalized };

// Linear map a*x + b from traversal counts onto [-5, 5], saturating at x_sat.
struct ExperienceConfig {
  double x_sat = 50.0;

  double a() const { return 10.0 / x_sat; }
  double b() const { return -5.0; }
};

inline double experience(double x, const ExperienceConfig& cfg) {
  const double z = std::clamp(cfg.a() * x + cfg.b(), -5.0, 5.0);
  return 1.0 / (1.0 + std::exp(-z));
}

inline double superpose(double delta, double h, double alpha) { return alpha * h + (1.0 - alpha) * delta; }

// Per-slot three-level index: vehicle -> segment -> path -> position of the
// segment in that path, plus the registry of stored paths.
class InvertedIndexTable {
 public:
  struct StoredPath {
    VehicleId vehicle = 0;
    TimeSlot slot = TimeSlot::Normal;
    Path path;
  };

  PathId insert_path(VehicleId vehicle, const Path& path, TimeSlot slot) {
    if (path.empty()) throw InputError("cannot index an empty path");
    const PathId id = next_id_++;
    insert_with_id(id, vehicle, path, slot);
    return id;
  }

  // Paths of `vehicle` in `slot` that contain m before n (not necessarily adjacent).
  std::size_t count_ordered(VehicleId vehicle, SegmentId m, SegmentId n, TimeSlot slot) const {
    const PathOrders* om = orders(vehicle, m, slot);
    const PathOrders* on = orders(vehicle, n, slot);
    if (!om || !on) return 0;
    std::size_t count = 0;
    if (om->size() <= on->size()) {
      for (const auto& [pid, pos] : *om) {
        auto it = on->find(pid);
        if (it != on->end() && pos < it->second) ++count;
      }
    } else {
      for (const auto& [pid, pos] : *on) {
        auto it = om->find(pid);
        if (it != om->end() && it->second < pos) ++count;
      }
    }
    return count;
  }

  // Paths of `vehicle` in `slot` containing m.
  std::size_t traversal_count(VehicleId vehicle, SegmentId m, TimeSlot slot) const {
    const PathOrders* om = orders(vehicle, m, slot);
    return om ? om->size() : 0;
  }

  std::optional<std::uint32_t> order_of(VehicleId vehicle, SegmentId m, PathId path, TimeSlot slot) const {
    const PathOrders* om = orders(vehicle, m, slot);
    if (!om) return std::nullopt;
    auto it = om->find(path);
    if (it == om->end()) return std::nullopt;
    return it->second;
  }

  const std::map<PathId, StoredPath>& registry() const { return registry_; }
  std::size_t path_count() const { return registry_.size(); }

  // One document per slot: the slot's paths and the nested index.
  nlohmann::json slot_to_json(TimeSlot slot) const {
    nlohmann::json doc;
    doc["slot"] = std::string(slot_name(slot));
    auto& paths = doc["paths"] = nlohmann::json::array();
    for (const auto& [id, sp] : registry_)
      if (sp.slot == slot) paths.push_back({{"id", id}, {"vehicle", sp.vehicle}, {"segments", sp.path.segments}});
    // Sorted numerically so the document is stable.
    auto& index = doc["index"] = nlohmann::json::array();
    const auto& table = tables_[slot_index(slot)];
    std::vector<VehicleId> vehicles;
    for (const auto& [v, _] : table) vehicles.push_back(v);
    std::sort(vehicles.begin(), vehicles.end());
    for (VehicleId v : vehicles) {
      const SegmentMap& segs = table.at(v);
      std::vector<SegmentId> ids;
      for (const auto& [s, _] : segs) ids.push_back(s);
      std::sort(ids.begin(), ids.end());
      nlohmann::json seg_entries = nlohmann::json::array();
      for (SegmentId s : ids) {
        std::vector<std::pair<PathId, std::uint32_t>> rows(segs.at(s).begin(), segs.at(s).end());
        std::sort(rows.begin(), rows.end());
        nlohmann::json path_entries = nlohmann::json::array();
        for (const auto& [pid, pos] : rows) path_entries.push_back({pid, pos});
        seg_entries.push_back({{"segment", s}, {"paths", path_entries}});
      }
      index.push_back({{"vehicle", v}, {"segments", seg_entries}});
    }
    return doc;
  }

  // Adds the paths of one slot document and checks its index against them.
  void load_slot(const nlohmann::json& doc) {
    try {
      const auto slot = parse_slot(doc.at("slot").get<std::string>());
      if (!slot) throw InputError("unknown slot in index document");
      for (const auto& p : doc.at("paths")) {
        const PathId id = p.at("id").get<PathId>();
        if (registry_.contains(id)) throw InputError("duplicate path id " + std::to_string(id));
        Path path{p.at("segments").get<std::vector<SegmentId>>()};
        if (path.empty()) throw InputError("empty path " + std::to_string(id));
        insert_with_id(id, p.at("vehicle").get<VehicleId>(), path, *slot);
        next_id_ = std::max(next_id_, id + 1);
      }
      std::size_t entries = 0;
      for (const auto& v : doc.at("index")) {
        const VehicleId vid = v.at("vehicle").get<VehicleId>();
        for (const auto& s : v.at("segments")) {
          const SegmentId sid = s.at("segment").get<SegmentId>();
          for (const auto& e : s.at("paths")) {
            ++entries;
            auto pos = order_of(vid, sid, e.at(0).get<PathId>(), *slot);
            if (!pos || *pos != e.at(1).get<std::uint32_t>())
              throw InputError("index entry for vehicle " + std::to_string(vid) + ", segment " + std::to_string(sid) +
                               " disagrees with the stored paths");
          }
        }
      }
      if (entries != entry_count(*slot)) throw InputError("index document is missing entries");
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed index document: ") + e.what());
    }
  }

  std::size_t entry_count(TimeSlot slot) const {
    std::size_t n = 0;
    for (const auto& [v, segs] : tables_[slot_index(slot)])
      for (const auto& [s, paths] : segs) n += paths.size();
    return n;
  }

 private:
  using PathOrders = std::unordered_map<PathId, std::uint32_t>;
  using SegmentMap = std::unordered_map<SegmentId, PathOrders>;

  void insert_with_id(PathId id, VehicleId vehicle, const Path& path, TimeSlot slot) {
    registry_.emplace(id, StoredPath{vehicle, slot, path});
    SegmentMap& segs = tables_[slot_index(slot)][vehicle];
    for (std::size_t i = 0; i < path.segments.size(); ++i)
      segs[path.segments[i]].try_emplace(id, static_cast<std::uint32_t>(i));  // first occurrence wins
  }

  const PathOrders* orders(VehicleId vehicle, SegmentId m, TimeSlot slot) const {
    const auto& table = tables_[slot_index(slot)];
    auto vit = table.find(vehicle);
    if (vit == table.end()) return nullptr;
    auto sit = vit->second.find(m);
    return sit == vit->second.end() ? nullptr : &sit->second;
  }

  std::array<std::unordered_map<VehicleId, SegmentMap>, 3> tables_;
  std::map<PathId, StoredPath> registry_;
  PathId next_id_ = 0;
};

inline constexpr std::array<const char*, 3> kIdtFileNames = {"idt_morning", "idt_evening", "idt_normal"};

inline void save_idt(const InvertedIndexTable& idt, const std::string& dir) {
  for (TimeSlot slot : kAllSlots) {
    const std::string path = dir + "/" + kIdtFileNames[slot_index(slot)];
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << idt.slot_to_json(slot).dump() << '\n';
  }
}

inline InvertedIndexTable load_idt(const std::string& dir) {
  InvertedIndexTable idt;
  for (TimeSlot slot : kAllSlots) {
    const std::string path = dir + "/" + kIdtFileNames[slot_index(slot)];
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("cannot parse " + path + ": " + e.what());
    }
    idt.load_slot(doc);
  }
  return idt;
}

// p_v(r_n | r_m) for every r_n in the next candidate set.
//   literal:    (Count(m->n) + 1) / (sum_j Count(m->j) + 1)
//   normalized: (Count(m->n) + 1) / (sum_j Count(m->j) + |candidates|)
inline std::vector<double> transition_probabilities(const InvertedIndexTable& idt, VehicleId vehicle, SegmentId m,
                                                    std::span<const SegmentId> next, TimeSlot slot,
                                                    PreferenceMode mode = PreferenceMode::Literal) {
  std::vector<double> counts(next.size());
  double total = 0.0;
  for (std::size_t j = 0; j < next.size(); ++j) {
    counts[j] = static_cast<double>(idt.count_ordered(vehicle, m, next[j], slot));
    total += counts[j];
  }
  const double denom = mode == PreferenceMode::Literal ? total + 1.0 : total + static_cast<double>(next.size());
  for (double& c : counts) c = (c + 1.0) / denom;
  return counts;
}

inline double transition_probability(const InvertedIndexTable& idt, VehicleId vehicle, SegmentId m,
                                     std::span<const SegmentId> next, SegmentId n, TimeSlot slot,
                                     PreferenceMode mode = PreferenceMode::Literal) {
  auto it = std::find(next.begin(), next.end(), n);
  if (it == next.end()) throw InputError("segment " + std::to_string(n) + " is not in the candidate set");
  return transition_probabilities(idt, vehicle, m, next, slot, mode)[static_cast<std::size_t>(it - next.begin())];
}

// h_v(r_m, r_n) = f_v(r_m) * p_v(r_n | r_m) for all candidates r_n.
inline std::vector<double> preference_row(const InvertedIndexTable& idt, VehicleId vehicle, SegmentId m,
                                          std::span<const SegmentId> next, TimeSlot slot,
                                          const ExperienceConfig& cfg, PreferenceMode mode = PreferenceMode::Literal) {
  const double f = experience(static_cast<double>(idt.traversal_count(vehicle, m, slot)), cfg);
  auto row = transition_probabilities(idt, vehicle, m, next, slot, mode);
  for (double& p : row) p *= f;
  return row;
}

inline double preference(const InvertedIndexTable& idt, VehicleId vehicle, SegmentId m,
                         std::span<const SegmentId> next, SegmentId n, TimeSlot slot, const ExperienceConfig& cfg,
                         PreferenceMode mode = PreferenceMode::Literal) {
  const double f = experience(static_cast<double>(idt.traversal_count(vehicle, m, slot)), cfg);
  return f * transition_probability(idt, vehicle, m, next, n, slot, mode);
}

}  // namespace crfmm
