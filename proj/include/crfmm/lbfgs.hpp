#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace crfmm {

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iters = 200;
  double tol = 1e-6;          // on |g|_inf / max(1, |f|)
  double ftol = 1e-12;        // on the relative decrease of f over one step
  double armijo_c = 1e-4;
  std::size_t max_backtracks = 60;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step, starting with f(x0)
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::isnan(v) ? v : std::max(m, std::abs(v));
  return m;
}

inline bool gradient_small(std::span<const double> g, double f, double tol) {
  return inf_norm(g) <= tol * std::max(1.0, std::abs(f));
}

}  // namespace detail

// Limited-memory BFGS minimization with Armijo backtracking (halving).
// `objective(x, grad)` returns f(x) and writes the gradient into grad.
template <typename Objective>
LbfgsResult lbfgs_minimize(Objective&& objective, std::vector<double> x0, const LbfgsOptions& opt = {}) {
  using detail::dot;
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), g_new(n), d(n), x_new(n);
  double f = objective(std::span<const double>(res.x), std::span<double>(g));
  res.value = f;
  res.trace.push_back(f);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> hist;
  std::vector<double> alpha(opt.memory);

  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    if (detail::gradient_small(g, f, opt.tol)) {
      res.converged = true;
      return res;
    }
    // Two-loop recursion: d = -H g.
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    for (std::size_t k = hist.size(); k-- > 0;) {
      alpha[k] = hist[k].rho * dot(hist[k].s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * hist[k].y[i];
    }
    if (!hist.empty()) {
      const auto& last = hist.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < hist.size(); ++k) {
      const double beta = hist[k].rho * dot(hist[k].y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * hist[k].s[i];
    }
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = dot(g, d);
    }

    double step = hist.empty() ? 1.0 / std::sqrt(dot(g, g)) : 1.0;
    bool accepted = false;
    double f_new = f;
    for (std::size_t bt = 0; bt < opt.max_backtracks; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * d[i];
      f_new = objective(std::span<const double>(x_new), std::span<double>(g_new));
      if (std::isfinite(f_new) && f_new <= f + opt.armijo_c * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) return res;  // no further decrease representable

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - res.x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      hist.push_back(std::move(p));
      if (hist.size() > opt.memory) hist.pop_front();
    }
    const double decrease = f - f_new;
    res.x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    res.value = f;
    res.trace.push_back(f);
    // Progress at round-off level: further steps only burn backtracks.
    if (decrease <= opt.ftol * std::max({1.0, std::abs(f), std::abs(f + decrease)})) {
      ++res.iterations;
      res.converged = true;
      return res;
    }
  }
  res.converged = detail::gradient_small(g, f, opt.tol);
  return res;
}

}  // namespace crfmm
