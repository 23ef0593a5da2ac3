#include "jobmatch/optimize.hpp"

#include "jobmatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jobmatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative resolution of objective values (sums of many rounded terms).
constexpr double kResolution = 1e-12;

struct Trial {
  double alpha = 0.0;
  double f = kInf;
  double slope = kInf;  // directional derivative
  Vector x;
  Vector g;
  bool ok = false;
};

class LineSearch {
 public:
  LineSearch(const Objective& objective, const OptimizerOptions& options, int& evaluations)
      : objective_(objective), options_(options), evaluations_(evaluations) {}

  // Strong Wolfe search along d from (x, f0, g0). Returns an accepted trial or ok == false.
  Trial search(const Vector& x, double f0, const Vector& g0, const Vector& d, double alpha0) {
    const double slope0 = g0.dot(d);
    g0_norm_ = g0.norm();
    Trial prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.slope = slope0;
    prev.ok = true;
    double alpha = alpha0;
    for (int i = 0; i < 30; ++i) {
      Trial cur = evaluate(x, d, alpha);
      if (!cur.ok) {
        // Infeasible or failed evaluation: shrink toward the last good point.
        alpha = prev.alpha + 0.25 * (alpha - prev.alpha);
        if (alpha - prev.alpha < 1e-16) break;
        continue;
      }
      if (approximate_wolfe(cur, f0, slope0)) return cur;
      if (cur.f > f0 + options_.c1 * alpha * slope0 || (i > 0 && cur.f >= prev.f)) {
        return zoom(x, f0, slope0, d, prev, cur);
      }
      if (std::abs(cur.slope) <= -options_.c2 * slope0) return cur;
      if (cur.slope >= 0.0) return zoom(x, f0, slope0, d, cur, prev);
      prev = cur;
      alpha *= 2.0;
    }
    return {};
  }

 private:
  // Near an optimum the decrease c1 * alpha * slope drops below the rounding error of f, and
  // f can no longer rank trial points. A point within that resolution of f0 is then accepted
  // when the slope flattens and the gradient shrinks.
  bool approximate_wolfe(const Trial& t, double f0, double slope0) const {
    const double roundoff = kResolution * std::max(1.0, std::abs(f0));
    return t.f <= f0 + roundoff && -options_.c1 * t.alpha * slope0 <= roundoff &&
           std::abs(t.slope) <= -options_.c2 * slope0 && t.g.norm() < g0_norm_;
  }

  Trial evaluate(const Vector& x, const Vector& d, double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = x + alpha * d;
    t.g.resize(x.size());
    ++evaluations_;
    try {
      t.f = objective_(t.x, t.g);
    } catch (const Error&) {
      return t;
    }
    if (!std::isfinite(t.f) || !t.g.allFinite()) return t;
    t.slope = t.g.dot(d);
    t.ok = true;
    return t;
  }

  Trial zoom(const Vector& x, double f0, double slope0, const Vector& d, Trial lo, Trial hi) {
    for (int i = 0; i < 40; ++i) {
      double alpha = cubic_min(lo, hi);
      const double lo_a = std::min(lo.alpha, hi.alpha);
      const double hi_a = std::max(lo.alpha, hi.alpha);
      const double width = hi_a - lo_a;
      if (!(alpha > lo_a + 0.1 * width && alpha < hi_a - 0.1 * width)) {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      if (width <= 1e-16 * std::max(1.0, hi_a)) break;
      Trial cur = evaluate(x, d, alpha);
      if (!cur.ok) {
        hi = cur;
        hi.f = kInf;
        continue;
      }
      if (approximate_wolfe(cur, f0, slope0)) return cur;
      if (cur.f > f0 + options_.c1 * alpha * slope0 || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -options_.c2 * slope0) return cur;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    // Accept the best sufficient-decrease point found, if any.
    if (lo.alpha > 0.0 && lo.f < f0) return lo;
    return {};
  }

  static double cubic_min(const Trial& a, const Trial& b) {
    if (!std::isfinite(a.f) || !std::isfinite(b.f) || !std::isfinite(a.slope) ||
        !std::isfinite(b.slope)) {
      return 0.5 * (a.alpha + b.alpha);
    }
    const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (disc < 0.0) return 0.5 * (a.alpha + b.alpha);
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    return b.alpha -
           (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  }

  const Objective& objective_;
  const OptimizerOptions& options_;
  int& evaluations_;
  double g0_norm_ = 0.0;
};

}  // namespace

OptimizerResult minimize_bfgs(const Objective& objective, Vector x0,
                              const OptimizerOptions& options, const ConvergenceTest& converged) {
  const auto dim = x0.size();
  auto is_converged = [&](const Vector& x, const Vector& g) {
    if (converged) return converged(x, g);
    return dim == 0 || g.lpNorm<Eigen::Infinity>() <= options.grad_tol;
  };

  OptimizerResult res;
  res.x = std::move(x0);
  res.grad.resize(dim);
  res.f = objective(res.x, res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !res.grad.allFinite()) {
    throw NumericError("objective is not finite at the starting point");
  }
  res.history.push_back(res.f);

  Matrix H = Matrix::Identity(dim, dim);
  bool scaled = false;
  LineSearch ls(objective, options, res.evaluations);
  int resets = 0;

  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    if (is_converged(res.x, res.grad)) {
      res.converged = true;
      res.status = "converged";
      return res;
    }
    Vector d = -H * res.grad;
    if (d.dot(res.grad) >= 0.0) {
      H.setIdentity();
      scaled = false;
      d = -res.grad;
    }
    double alpha0 = 1.0;
    if (!scaled) alpha0 = std::min(1.0, 1.0 / std::max(1e-300, d.lpNorm<Eigen::Infinity>()));

    Trial step = ls.search(res.x, res.f, res.grad, d, alpha0);
    if (!step.ok) {
      if (resets++ < 2 && scaled) {
        H.setIdentity();
        scaled = false;
        continue;
      }
      res.status = "line search failed";
      break;
    }
    const Vector s = step.x - res.x;
    const Vector y = step.g - res.grad;
    const double sy = s.dot(y);
    if (sy > 1e-300 * std::max(1.0, s.squaredNorm())) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      const double yHy = y.dot(Hy);
      H += (rho * rho * yHy + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    res.x = step.x;
    res.f = step.f;
    res.grad = step.g;
    res.history.push_back(res.f);
  }

  if (is_converged(res.x, res.grad)) {
    res.converged = true;
    res.status = "converged";
  } else if (res.status.empty()) {
    res.status = "iteration limit reached";
  }
  return res;
}

}  // namespace jobmatch
