#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crfmm/error.hpp"
#include "crfmm/road_network.hpp"

namespace crfmm {

// Network document:
//   {"nodes": [{"id", "x", "y"}],
//    "segments": [{"id", "from", "to", "polyline": [[x, y], ...],
//                  "speed": {"morning", "evening", "normal"}}]}
inline nlohmann::json network_to_json(const RoadNetwork& net) {
  nlohmann::json doc;
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (const Node& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  auto& segs = doc["segments"] = nlohmann::json::array();
  for (const RoadSegment& s : net.segments()) {
    nlohmann::json line = nlohmann::json::array();
    for (const Point& p : s.polyline) line.push_back({p.x, p.y});
    nlohmann::json speed;
    for (TimeSlot slot : kAllSlots) speed[std::string(slot_name(slot))] = s.speed(slot);
    segs.push_back({{"id", s.id}, {"from", s.from_node}, {"to", s.to_node}, {"polyline", line}, {"speed", speed}});
  }
  return doc;
}

inline RoadNetwork network_from_json(const nlohmann::json& doc,
                                     double cell_size = RoadNetwork::kDefaultCellSize) {
  std::vector<Node> nodes;
  std::vector<RoadSegment> segments;
  try {
    for (const auto& n : doc.at("nodes"))
      nodes.push_back({n.at("id").get<NodeId>(), n.at("x").get<double>(), n.at("y").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError(std::string("malformed node entry: ") + e.what());
  }
  for (const auto& s : doc.at("segments")) {
    std::string tag = "segment";
    try {
      RoadSegment seg;
      seg.id = s.at("id").get<SegmentId>();
      tag = "segment " + std::to_string(seg.id);
      seg.from_node = s.at("from").get<NodeId>();
      seg.to_node = s.at("to").get<NodeId>();
      for (const auto& p : s.at("polyline")) {
        if (!p.is_array() || p.size() != 2) throw NetworkError(tag + ": polyline points must be [x, y]");
        seg.polyline.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      const auto& speed = s.at("speed");
      for (TimeSlot slot : kAllSlots)
        seg.speed_by_slot[slot_index(slot)] = speed.at(std::string(slot_name(slot))).get<double>();
      seg.length = polyline_length(seg.polyline);
      segments.push_back(std::move(seg));
    } catch (const nlohmann::json::exception& e) {
      throw NetworkError(tag + ": " + e.what());
    }
  }
  return RoadNetwork(std::move(nodes), std::move(segments), cell_size);
}

inline RoadNetwork load_network(const std::string& path,
                                double cell_size = RoadNetwork::kDefaultCellSize) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open network file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse network file " + path + ": " + e.what());
  }
  return network_from_json(doc, cell_size);
}

inline void save_network(const RoadNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << network_to_json(net).dump(1) << '\n';
}

}  // namespace crfmm
