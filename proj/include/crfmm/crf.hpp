#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crfmm/error.hpp"
#include "crfmm/features.hpp"
#include "crfmm/lbfgs.hpp"
#include "crfmm/parallel.hpp"
#include "crfmm/trajectory.hpp"

namespace crfmm {

// Log-potentials of a linear chain: node[t][j] and edge[t][i * cols + j].
struct ChainPotentials {
  std::vector<std::vector<double>> node;
  std::vector<std::vector<double>> edge;

  std::size_t length() const { return node.size(); }
};

struct MatchResult {
  std::vector<SegmentId> matched_segments;  // one per observation
  Path stitched_path;
  double log_posterior_unnormalized = 0.0;
  std::vector<std::size_t> assignment;  // candidate index per layer
  bool complete = true;                 // stitched path is topologically connected
  bool used_preference = false;
};

struct Decoded {
  std::vector<std::size_t> assignment;
  double score = 0.0;
};

inline ChainPotentials crf_potentials(const CandidateLattice& lat, const CrfParams& params) {
  ChainPotentials pot;
  pot.node.resize(lat.size());
  for (std::size_t t = 0; t < lat.size(); ++t) {
    auto& row = pot.node[t];
    row.reserve(lat.layers[t].size());
    for (const Candidate& c : lat.layers[t]) row.push_back(params.mu * c.generative);
  }
  pot.edge.resize(lat.transitions.size());
  for (std::size_t t = 0; t < lat.transitions.size(); ++t) {
    const TransitionBlock& b = lat.transitions[t];
    auto& e = pot.edge[t];
    e.resize(b.spatial.size());
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = combined_transition(b.spatial[k], b.temporal[k], params);
  }
  return pot;
}

inline double score_of(const ChainPotentials& pot, std::span<const std::size_t> assignment) {
  double s = 0.0;
  for (std::size_t t = 0; t < pot.length(); ++t) {
    s += pot.node[t].at(assignment[t]);
    if (t + 1 < pot.length()) s += pot.edge[t].at(assignment[t] * pot.node[t + 1].size() + assignment[t + 1]);
  }
  return s;
}

// Exponent of the unnormalized chain probability for one assignment.
inline double sequence_score(const CandidateLattice& lat, std::span<const std::size_t> assignment,
                             const CrfParams& params) {
  if (assignment.size() != lat.size()) throw InputError("assignment length does not match lattice");
  double s = 0.0;
  for (std::size_t t = 0; t < lat.size(); ++t) {
    if (assignment[t] >= lat.layers[t].size()) throw InputError("assignment index out of range");
    s += params.mu * lat.layers[t][assignment[t]].generative;
    if (t + 1 < lat.size()) {
      const TransitionBlock& b = lat.transitions[t];
      if (assignment[t + 1] >= b.cols) throw InputError("assignment index out of range");
      const std::size_t e = b.at(assignment[t], assignment[t + 1]);
      s += combined_transition(b.spatial[e], b.temporal[e], params);
    }
  }
  return s;
}

// Max-sum dynamic program. Strict comparisons keep the smallest index on
// ties, so among equal-score assignments the one with the smaller index at
// the latest differing layer wins.
inline Decoded decode(const ChainPotentials& pot) {
  Decoded out;
  const std::size_t len = pot.length();
  if (len == 0) return out;
  std::vector<std::vector<std::size_t>> back(len);
  std::vector<double> best = pot.node[0];
  for (std::size_t t = 1; t < len; ++t) {
    const std::size_t rows = pot.node[t - 1].size();
    const std::size_t cols = pot.node[t].size();
    std::vector<double> next(cols);
    back[t].assign(cols, 0);
    for (std::size_t j = 0; j < cols; ++j) {
      double top = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < rows; ++i) {
        const double v = best[i] + pot.edge[t - 1][i * cols + j];
        if (v > top) {
          top = v;
          arg = i;
        }
      }
      next[j] = top + pot.node[t][j];
      back[t][j] = arg;
    }
    best.swap(next);
  }
  std::size_t arg = 0;
  for (std::size_t j = 1; j < best.size(); ++j)
    if (best[j] > best[arg]) arg = j;
  out.score = best[arg];
  out.assignment.assign(len, 0);
  out.assignment[len - 1] = arg;
  for (std::size_t t = len - 1; t > 0; --t) out.assignment[t - 1] = back[t][out.assignment[t]];
  return out;
}

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// alpha[t][j]: log-sum over prefixes ending in candidate j at layer t.
inline std::vector<std::vector<double>> forward(const ChainPotentials& pot) {
  std::vector<std::vector<double>> alpha(pot.length());
  if (pot.length() == 0) return alpha;
  alpha[0] = pot.node[0];
  std::vector<double> buf;
  for (std::size_t t = 1; t < pot.length(); ++t) {
    const std::size_t rows = pot.node[t - 1].size();
    const std::size_t cols = pot.node[t].size();
    alpha[t].resize(cols);
    buf.resize(rows);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) buf[i] = alpha[t - 1][i] + pot.edge[t - 1][i * cols + j];
      alpha[t][j] = log_sum_exp(buf) + pot.node[t][j];
    }
  }
  return alpha;
}

// beta[t][i]: log-sum over suffixes after candidate i at layer t.
inline std::vector<std::vector<double>> backward(const ChainPotentials& pot) {
  const std::size_t len = pot.length();
  std::vector<std::vector<double>> beta(len);
  if (len == 0) return beta;
  beta[len - 1].assign(pot.node[len - 1].size(), 0.0);
  std::vector<double> buf;
  for (std::size_t t = len - 1; t > 0; --t) {
    const std::size_t rows = pot.node[t - 1].size();
    const std::size_t cols = pot.node[t].size();
    beta[t - 1].resize(rows);
    buf.resize(cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) buf[j] = pot.edge[t - 1][i * cols + j] + pot.node[t][j] + beta[t][j];
      beta[t - 1][i] = log_sum_exp(buf);
    }
  }
  return beta;
}

}  // namespace detail

inline double log_partition(const ChainPotentials& pot) {
  if (pot.length() == 0) throw InputError("empty lattice");
  return detail::log_sum_exp(detail::forward(pot).back());
}

inline double log_partition(const CandidateLattice& lat, const CrfParams& params) {
  return log_partition(crf_potentials(lat, params));
}

// Concatenates the recorded connecting routes of the decoded candidates,
// dropping consecutive repeats.
inline Path stitch_path(const CandidateLattice& lat, std::span<const std::size_t> assignment, bool* complete = nullptr) {
  Path path;
  bool ok = true;
  auto push = [&](SegmentId s) {
    if (path.segments.empty() || path.segments.back() != s) path.segments.push_back(s);
  };
  for (std::size_t t = 0; t < lat.size(); ++t) {
    const SegmentId here = lat.layers[t][assignment[t]].projection.segment_id;
    if (t == 0) push(here);
    if (t + 1 == lat.size()) break;
    const TransitionBlock& b = lat.transitions[t];
    const std::size_t e = b.at(assignment[t], assignment[t + 1]);
    const SegmentId next = lat.layers[t + 1][assignment[t + 1]].projection.segment_id;
    auto route = b.path(assignment[t], assignment[t + 1]);
    if (b.reachable[e] && !route.empty()) {
      for (SegmentId s : route) push(s);
    } else {
      if (!b.reachable[e]) ok = false;
      push(next);
    }
  }
  if (complete) *complete = ok;
  return path;
}

inline MatchResult to_match_result(const CandidateLattice& lat, const Decoded& dec) {
  MatchResult r;
  r.assignment = dec.assignment;
  r.log_posterior_unnormalized = dec.score;
  for (std::size_t t = 0; t < lat.size(); ++t)
    r.matched_segments.push_back(lat.layers[t][dec.assignment[t]].projection.segment_id);
  r.stitched_path = stitch_path(lat, dec.assignment, &r.complete);
  return r;
}

inline MatchResult viterbi(const CandidateLattice& lat, const CrfParams& params) {
  if (lat.size() == 0) throw InputError("empty lattice");
  return to_match_result(lat, decode(crf_potentials(lat, params)));
}

// ---------------------------------------------------------------------------
// Training

// A lattice with the index of the true candidate in each layer.
struct TrainingExample {
  CandidateLattice lattice;
  std::vector<std::size_t> truth;
  std::size_t source = 0;  // index of the originating labeled trajectory
};

struct ObjectiveValue {
  double log_likelihood = 0.0;
  std::array<double, 3> gradient{};  // d/dmu, d/dlambda1, d/dlambda2
};

// Log-likelihood of one example and its gradient (observed minus expected
// feature sums, expectations from forward-backward marginals).
inline ObjectiveValue example_objective(const TrainingExample& ex, const CrfParams& params) {
  const CandidateLattice& lat = ex.lattice;
  const ChainPotentials pot = crf_potentials(lat, params);
  const auto alpha = detail::forward(pot);
  const auto beta = detail::backward(pot);
  const double log_z = detail::log_sum_exp(alpha.back());

  ObjectiveValue v;
  std::array<double, 3> observed{};
  for (std::size_t t = 0; t < lat.size(); ++t) {
    observed[0] += lat.layers[t][ex.truth[t]].generative;
    if (t + 1 < lat.size()) {
      const TransitionBlock& b = lat.transitions[t];
      const std::size_t e = b.at(ex.truth[t], ex.truth[t + 1]);
      observed[1] += b.spatial[e];
      observed[2] += b.temporal[e];
    }
  }
  v.log_likelihood = score_of(pot, ex.truth) - log_z;

  std::array<double, 3> expected{};
  for (std::size_t t = 0; t < lat.size(); ++t) {
    for (std::size_t j = 0; j < lat.layers[t].size(); ++j)
      expected[0] += std::exp(alpha[t][j] + beta[t][j] - log_z) * lat.layers[t][j].generative;
  }
  for (std::size_t t = 0; t + 1 < lat.size(); ++t) {
    const TransitionBlock& b = lat.transitions[t];
    for (std::size_t i = 0; i < b.rows; ++i) {
      for (std::size_t j = 0; j < b.cols; ++j) {
        const std::size_t e = b.at(i, j);
        const double p = std::exp(alpha[t][i] + pot.edge[t][e] + pot.node[t + 1][j] + beta[t + 1][j] - log_z);
        expected[1] += p * b.spatial[e];
        expected[2] += p * b.temporal[e];
      }
    }
  }
  for (std::size_t k = 0; k < 3; ++k) v.gradient[k] = observed[k] - expected[k];
  return v;
}

// Sum over examples; the parallel map writes per-example slots and the
// reduction runs in index order.
inline ObjectiveValue objective(std::span<const TrainingExample> examples, const CrfParams& params,
                                std::size_t jobs = 1) {
  if (examples.empty()) throw InputError("no usable training examples");
  std::vector<ObjectiveValue> parts(examples.size());
  parallel_for(examples.size(), jobs, [&](std::size_t i) { parts[i] = example_objective(examples[i], params); });
  ObjectiveValue total;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!std::isfinite(parts[i].log_likelihood))
      throw InputError("non-finite log-likelihood at training example " + std::to_string(i) + " (trajectory " +
                       std::to_string(examples[i].source) + ")");
    total.log_likelihood += parts[i].log_likelihood;
    for (std::size_t k = 0; k < 3; ++k) total.gradient[k] += parts[i].gradient[k];
  }
  return total;
}

inline double log_likelihood(std::span<const TrainingExample> examples, const CrfParams& params) {
  return objective(examples, params).log_likelihood;
}

inline std::array<double, 3> gradient(std::span<const TrainingExample> examples, const CrfParams& params) {
  return objective(examples, params).gradient;
}

struct TrainOptions {
  std::size_t max_iters = 200;
  double tol = 1e-6;
  std::size_t memory = 10;
  double l2 = 0.0;                       // optional ridge strength, off by default
  std::array<bool, 3> free{true, true, true};  // parameters held fixed when false
  std::size_t jobs = 1;
};

struct TrainResult {
  CrfParams params;
  std::vector<double> trace;  // log-likelihood per accepted step
  std::size_t iterations = 0;
  bool converged = false;
};

inline TrainResult train(std::span<const TrainingExample> examples, const CrfParams& init,
                         const TrainOptions& opt = {}) {
  if (examples.empty()) throw InputError("no usable training examples");
  auto unpack = [&](std::span<const double> x) {
    CrfParams p = init;
    if (opt.free[0]) p.mu = x[0];
    if (opt.free[1]) p.lambda1 = x[1];
    if (opt.free[2]) p.lambda2 = x[2];
    return p;
  };
  std::vector<double> trace;
  auto negated = [&](std::span<const double> x, std::span<double> g) {
    const CrfParams p = unpack(x);
    const ObjectiveValue v = objective(examples, p, opt.jobs);
    double f = -v.log_likelihood;
    for (std::size_t k = 0; k < 3; ++k) {
      g[k] = opt.free[k] ? -v.gradient[k] + opt.l2 * x[k] : 0.0;
      if (opt.free[k]) f += 0.5 * opt.l2 * x[k] * x[k];
    }
    return f;
  };
  LbfgsOptions lo;
  lo.memory = opt.memory;
  lo.max_iters = opt.max_iters;
  lo.tol = opt.tol;
  const LbfgsResult r = lbfgs_minimize(negated, {init.mu, init.lambda1, init.lambda2}, lo);
  TrainResult out;
  out.params = unpack(r.x);
  out.iterations = r.iterations;
  out.converged = r.converged;
  for (double f : r.trace) out.trace.push_back(-f);
  return out;
}

struct TrainingSet {
  std::vector<TrainingExample> examples;
  std::size_t skipped_points = 0;        // ground truth not among the candidates
  std::size_t skipped_trajectories = 0;  // off-map trajectories
};

// Builds lattices for labeled trajectories. Layers whose true segment is not
// among the candidates are dropped by splitting the chain around them.
inline TrainingSet make_training_set(std::span<const LabeledTrajectory> data, const RoadNetwork& net,
                                     LatticeOptions opt, std::size_t jobs = 1) {
  opt.keep_paths = false;
  struct Built {
    std::vector<TrainingExample> examples;
    std::size_t skipped = 0;
    bool off_map = false;
  };
  std::vector<Built> built(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t idx) {
    const LabeledTrajectory& lt = data[idx];
    CandidateLattice lat;
    try {
      lat = build_lattice(lt.trajectory, net, opt);
    } catch (const OffMapError&) {
      built[idx].off_map = true;
      return;
    }
    std::vector<long> truth(lat.size(), -1);
    for (std::size_t t = 0; t < lat.size(); ++t)
      for (std::size_t j = 0; j < lat.layers[t].size(); ++j)
        if (lat.layers[t][j].projection.segment_id == lt.labels[t]) truth[t] = static_cast<long>(j);
    std::size_t t = 0;
    while (t < lat.size()) {
      if (truth[t] < 0) {
        ++built[idx].skipped;
        ++t;
        continue;
      }
      std::size_t end = t;
      while (end + 1 < lat.size() && truth[end + 1] >= 0) ++end;
      TrainingExample ex;
      ex.source = idx;
      for (std::size_t u = t; u <= end; ++u) {
        ex.lattice.layers.push_back(std::move(lat.layers[u]));
        ex.lattice.timestamps.push_back(lat.timestamps[u]);
        ex.truth.push_back(static_cast<std::size_t>(truth[u]));
        if (u < end) ex.lattice.transitions.push_back(std::move(lat.transitions[u]));
      }
      built[idx].examples.push_back(std::move(ex));
      t = end + 1;
    }
  });
  TrainingSet set;
  for (Built& b : built) {
    set.skipped_points += b.skipped;
    set.skipped_trajectories += b.off_map ? 1 : 0;
    for (TrainingExample& ex : b.examples) set.examples.push_back(std::move(ex));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Params file: {"mu", "lambda1", "lambda2", "scale_m"}

inline nlohmann::json params_to_json(const CrfParams& p, double scale_m) {
  return {{"mu", p.mu}, {"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"scale_m", scale_m}};
}

struct StoredParams {
  CrfParams params;
  double scale_m = 20.0;
};

inline StoredParams params_from_json(const nlohmann::json& j) {
  StoredParams s;
  try {
    s.params = {j.at("mu").get<double>(), j.at("lambda1").get<double>(), j.at("lambda2").get<double>()};
    s.scale_m = j.at("scale_m").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed params: ") + e.what());
  }
  if (!std::isfinite(s.params.mu) || !std::isfinite(s.params.lambda1) || !std::isfinite(s.params.lambda2) ||
      !(s.scale_m > 0.0))
    throw InputError("params must be finite with a positive scale");
  return s;
}

inline void save_params(const std::string& path, const CrfParams& p, double scale_m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << params_to_json(p, scale_m).dump(1) << '\n';
}

inline StoredParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open params file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse params file " + path + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace crfmm
