#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crfmm/crf.hpp"
#include "crfmm/features.hpp"
#include "crfmm/parallel.hpp"
#include "crfmm/road_network.hpp"
#include "crfmm/route_preference.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

struct PipelineConfig {
  double interval_threshold_s = 180.0;
  double alpha = 0.7;
  std::size_t candidate_k = 6;
  double scale_m = 20.0;
  double max_offset_m = 500.0;
  PreferenceMode preference_mode = PreferenceMode::Literal;
  ExperienceConfig experience;

  void validate() const {
    if (!(interval_threshold_s > 0.0)) throw InputError("interval threshold must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
    if (candidate_k < 1) throw InputError("candidate count must be at least 1");
    if (!(scale_m > 0.0)) throw InputError("distance scale must be positive");
    if (!(experience.x_sat > 0.0)) throw InputError("x_sat must be positive");
  }

  LatticeOptions lattice_options() const { return {candidate_k, scale_m, max_offset_m, true}; }
};

// Sparse trajectories (average interval at or above the threshold) take the
// preference branch when an index is available.
inline bool preference_branch(const Trajectory& traj, const InvertedIndexTable* idt, const PipelineConfig& cfg) {
  if (!idt || traj.points.size() < 2) return false;
  return average_interval(traj) >= cfg.interval_threshold_s;
}

// Replaces every transition potential with alpha*h + (1-alpha)*delta.
inline void superpose_preference(ChainPotentials& pot, const CandidateLattice& lat, VehicleId vehicle,
                                 const InvertedIndexTable& idt, TimeSlot slot, const PipelineConfig& cfg) {
  std::vector<SegmentId> next;
  for (std::size_t t = 0; t + 1 < lat.size(); ++t) {
    next.clear();
    for (const Candidate& c : lat.layers[t + 1]) next.push_back(c.projection.segment_id);
    const std::size_t cols = next.size();
    for (std::size_t i = 0; i < lat.layers[t].size(); ++i) {
      const auto h = preference_row(idt, vehicle, lat.layers[t][i].projection.segment_id, next, slot, cfg.experience,
                                    cfg.preference_mode);
      for (std::size_t j = 0; j < cols; ++j) {
        double& e = pot.edge[t][i * cols + j];
        e = superpose(e, h[j], cfg.alpha);
      }
    }
  }
}

inline MatchResult match_lattice(const CandidateLattice& lat, VehicleId vehicle, const CrfParams& params,
                                 const InvertedIndexTable* idt, bool use_preference, const PipelineConfig& cfg) {
  ChainPotentials pot = crf_potentials(lat, params);
  if (use_preference && idt) superpose_preference(pot, lat, vehicle, *idt, slot_of(lat.timestamps.front()), cfg);
  MatchResult r = to_match_result(lat, decode(pot));
  r.used_preference = use_preference && idt;
  return r;
}

inline MatchResult match_trajectory(const Trajectory& traj, const RoadNetwork& net, const CrfParams& params,
                                    const InvertedIndexTable* idt, const PipelineConfig& cfg) {
  cfg.validate();
  const CandidateLattice lat = build_lattice(traj, net, cfg.lattice_options());
  return match_lattice(lat, traj.vehicle_id, params, idt, preference_branch(traj, idt, cfg), cfg);
}

struct BatchError {
  std::size_t index = 0;
  std::string message;
};

struct BatchSummary {
  std::size_t pure_crf = 0;
  std::size_t preference = 0;
  std::size_t errors = 0;
};

struct BatchResult {
  std::vector<std::optional<MatchResult>> results;  // aligned with the input
  std::vector<BatchError> errors;
  BatchSummary summary;
};

inline BatchResult match_batch(std::span<const Trajectory> trajs, const RoadNetwork& net, const CrfParams& params,
                               const InvertedIndexTable* idt, const PipelineConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  BatchResult out;
  out.results.resize(trajs.size());
  std::vector<std::string> messages(trajs.size());
  parallel_for(trajs.size(), jobs, [&](std::size_t i) {
    try {
      out.results[i] = match_trajectory(trajs[i], net, params, idt, cfg);
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (out.results[i]) {
      ++(out.results[i]->used_preference ? out.summary.preference : out.summary.pure_crf);
    } else {
      out.errors.push_back({i, messages[i]});
      ++out.summary.errors;
    }
  }
  return out;
}

}  // namespace crfmm
