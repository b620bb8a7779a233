#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crfmm/crf.hpp"
#include "crfmm/error.hpp"
#include "crfmm/matcher.hpp"
#include "crfmm/parallel.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

namespace detail {

inline std::size_t check_aligned(std::span<const std::vector<SegmentId>> matched,
                                 std::span<const std::vector<SegmentId>> truth) {
  if (truth.empty()) throw InputError("no ground truth to evaluate against");
  if (matched.size() != truth.size()) throw InputError("result and truth trajectory counts differ");
  std::size_t points = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (matched[i].size() != truth[i].size())
      throw InputError("trajectory " + std::to_string(i) + ": matched and labeled point counts differ");
    points += truth[i].size();
  }
  return points;
}

}  // namespace detail

// Fraction of observation points matched to their labeled segment.
inline double accuracy_by_segment(std::span<const std::vector<SegmentId>> matched,
                                  std::span<const std::vector<SegmentId>> truth) {
  const std::size_t points = detail::check_aligned(matched, truth);
  if (points == 0) throw InputError("no labeled points to evaluate");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t k = 0; k < truth[i].size(); ++k) correct += matched[i][k] == truth[i][k] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(points);
}

// Fraction of trajectories matched without a single wrong point.
inline double accuracy_by_path(std::span<const std::vector<SegmentId>> matched,
                               std::span<const std::vector<SegmentId>> truth) {
  detail::check_aligned(matched, truth);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += matched[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// |set(candidate) ∩ set(history)| / |set(candidate)|. Not symmetric.
inline double repeat_ratio(const Path& candidate, const Path& history) {
  if (candidate.empty()) throw InputError("repeat ratio needs a non-empty candidate path");
  const std::set<SegmentId> c(candidate.segments.begin(), candidate.segments.end());
  const std::set<SegmentId> h(history.segments.begin(), history.segments.end());
  std::size_t common = 0;
  for (SegmentId s : c) common += h.contains(s) ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(c.size());
}

// Share of a vehicle's paths (chronological) that repeat some earlier path,
// i.e. repeat_ratio(path, earlier) > zeta.
inline double repeated_path_share(std::span<const Path> paths, double zeta = 0.8) {
  if (paths.empty()) throw InputError("repeated path share needs at least one path");
  std::size_t repeated = 0;
  for (std::size_t c = 1; c < paths.size(); ++c) {
    for (std::size_t h = 0; h < c; ++h) {
      if (repeat_ratio(paths[c], paths[h]) > zeta) {
        ++repeated;
        break;
      }
    }
  }
  return static_cast<double>(repeated) / static_cast<double>(paths.size());
}

// Weights of the HMM-style comparator: emission phi and detour delta1, unit
// weights, no temporal term and nothing learned.
inline constexpr CrfParams kHmmParams{1.0, 1.0, 0.0};

inline MatchResult hmm_baseline_match(const Trajectory& traj, const RoadNetwork& net, const PipelineConfig& cfg) {
  return viterbi(build_lattice(traj, net, cfg.lattice_options()), kHmmParams);
}

// A matcher operating on a prebuilt lattice so a sweep builds each lattice once.
struct NamedMatcher {
  std::string name;
  std::function<MatchResult(const Trajectory&, const CandidateLattice&)> match;
};

inline NamedMatcher crf_matcher(std::string name, const CrfParams& params, const InvertedIndexTable* idt,
                                const PipelineConfig& cfg) {
  return {std::move(name), [params, idt, cfg](const Trajectory& traj, const CandidateLattice& lat) {
            return match_lattice(lat, traj.vehicle_id, params, idt, preference_branch(traj, idt, cfg), cfg);
          }};
}

inline NamedMatcher hmm_matcher(std::string name = "hmm") {
  return {std::move(name), [](const Trajectory&, const CandidateLattice& lat) { return viterbi(lat, kHmmParams); }};
}

struct IntervalScore {
  double a_s = 0.0;
  double a_r = 0.0;
  std::size_t n_points = 0;
  std::size_t n_paths = 0;
};

struct EvalReport {
  std::string matcher;
  double accuracy_by_segment = 0.0;  // pooled over all intervals
  double accuracy_by_path = 0.0;
  std::size_t n_points = 0;
  std::size_t n_paths = 0;
  std::map<double, IntervalScore> per_interval;
};

// For each interval, downsample every labeled trajectory, build its lattice
// once and score every matcher against the downsampled labels.
inline std::vector<EvalReport> interval_sweep(std::span<const LabeledTrajectory> dataset, const RoadNetwork& net,
                                              std::span<const double> intervals,
                                              std::span<const NamedMatcher> matchers, const PipelineConfig& cfg,
                                              std::size_t jobs = 1) {
  for (double iv : intervals)
    if (!(iv > 0.0)) throw InputError("sweep intervals must be positive");
  const std::size_t n = dataset.size();
  // matched[interval][matcher][trajectory]
  std::vector<std::vector<std::vector<std::vector<SegmentId>>>> matched(
      intervals.size(), std::vector<std::vector<std::vector<SegmentId>>>(matchers.size(),
                                                                         std::vector<std::vector<SegmentId>>(n)));
  std::vector<std::vector<std::vector<SegmentId>>> truth(intervals.size(), std::vector<std::vector<SegmentId>>(n));
  parallel_for(intervals.size() * n, jobs, [&](std::size_t task) {
    const std::size_t iv = task / n;
    const std::size_t ti = task % n;
    const LabeledTrajectory sparse = downsample(dataset[ti], intervals[iv]);
    const CandidateLattice lat = build_lattice(sparse.trajectory, net, cfg.lattice_options());
    truth[iv][ti] = sparse.labels;
    for (std::size_t m = 0; m < matchers.size(); ++m)
      matched[iv][m][ti] = matchers[m].match(sparse.trajectory, lat).matched_segments;
  });
  std::vector<EvalReport> reports;
  for (std::size_t m = 0; m < matchers.size(); ++m) {
    EvalReport rep;
    rep.matcher = matchers[m].name;
    std::size_t correct_points = 0, correct_paths = 0;
    for (std::size_t iv = 0; iv < intervals.size(); ++iv) {
      IntervalScore s;
      s.a_s = n ? accuracy_by_segment(matched[iv][m], truth[iv]) : 0.0;
      s.a_r = n ? accuracy_by_path(matched[iv][m], truth[iv]) : 0.0;
      for (const auto& t : truth[iv]) s.n_points += t.size();
      s.n_paths = n;
      correct_points += static_cast<std::size_t>(std::llround(s.a_s * static_cast<double>(s.n_points)));
      correct_paths += static_cast<std::size_t>(std::llround(s.a_r * static_cast<double>(s.n_paths)));
      rep.n_points += s.n_points;
      rep.n_paths += s.n_paths;
      rep.per_interval[intervals[iv]] = s;
    }
    if (rep.n_points) rep.accuracy_by_segment = static_cast<double>(correct_points) / static_cast<double>(rep.n_points);
    if (rep.n_paths) rep.accuracy_by_path = static_cast<double>(correct_paths) / static_cast<double>(rep.n_paths);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace crfmm
