#include "playcall/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace playcall {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

void reset_identity(std::vector<double>& h, std::size_t n) {
  std::fill(h.begin(), h.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
}

}  // namespace

std::vector<double> numeric_gradient(const Objective& f, std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = point[i];
    point[i] = original + h;
    const double up = f(point);
    point[i] = original - h;
    const double down = f(point);
    point[i] = original;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

OptimizerResult minimize_bfgs(const Objective& f, std::vector<double> x0, const OptimizerOptions& options) {
  const std::size_t n = x0.size();
  OptimizerResult result;
  result.x = std::move(x0);

  auto counted = [&](std::span<const double> x) {
    ++result.evaluations;
    return f(x);
  };
  auto gradient = [&](std::span<const double> x) {
    result.evaluations += static_cast<int>(2 * n);
    return numeric_gradient(f, x, options.gradient_step);
  };

  double fx = counted(result.x);
  result.initial_value = fx;
  result.value = fx;
  if (!std::isfinite(fx)) {
    result.message = "objective not finite at the starting point";
    return result;
  }
  if (n == 0) {
    result.converged = true;
    result.message = "no free parameters";
    return result;
  }

  std::vector<double> g = gradient(result.x);
  std::vector<double> hinv(n * n);
  reset_identity(hinv, n);
  std::vector<double> direction(n), candidate(n), step(n), g_new(n), y(n), hy(n);
  bool just_reset = true;
  int stalled = 0;

  const double tol = options.convergence_tol;
  const double step_tol = std::sqrt(tol);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    if (max_abs(g) <= tol) {
      result.converged = true;
      result.message = "gradient below tolerance";
      return result;
    }

    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s -= hinv[i * n + j] * g[j];
      direction[i] = s;
    }
    double slope = dot(direction, g);
    if (!(slope < 0.0)) {
      reset_identity(hinv, n);
      for (std::size_t i = 0; i < n; ++i) direction[i] = -g[i];
      slope = dot(direction, g);
      just_reset = true;
    }

    double alpha = 1.0;
    const double largest = max_abs(direction);
    if (largest * alpha > options.max_step) alpha = options.max_step / largest;

    bool accepted = false;
    double f_new = fx;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) candidate[i] = result.x[i] + alpha * direction[i];
      f_new = counted(candidate);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * alpha * slope && f_new < fx) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      if (!just_reset) {
        reset_identity(hinv, n);
        just_reset = true;
        continue;
      }
      // Steepest descent cannot make progress: the finite-difference gradient
      // is at noise level, so this is a stationary point to working precision.
      result.converged = max_abs(g) <= 1e-4;
      result.message = result.converged ? "no further descent at numerical precision" : "line search failed";
      return result;
    }
    just_reset = false;

    for (std::size_t i = 0; i < n; ++i) step[i] = candidate[i] - result.x[i];
    g_new = gradient(candidate);
    for (std::size_t i = 0; i < n; ++i) y[i] = g_new[i] - g[i];

    const double f_change = fx - f_new;
    const double x_change = max_abs(step);
    result.x = candidate;
    fx = f_new;
    result.value = fx;
    g.swap(g_new);

    if (f_change <= tol * (1.0 + std::abs(fx)) && x_change <= step_tol * (1.0 + max_abs(result.x))) {
      result.converged = true;
      result.message = "objective and parameter change below tolerance";
      return result;
    }
    // Flat ridges (a state that is never visited, a transition pushed to
    // certainty) let parameters drift indefinitely with no objective gain.
    const bool stall = f_change <= tol * (1.0 + std::abs(fx)) && max_abs(g) <= options.flat_gradient_tol;
    stalled = stall ? stalled + 1 : 0;
    if (stalled >= options.stall_iterations) {
      result.converged = true;
      result.message = "objective change below tolerance on a flat gradient";
      return result;
    }

    const double sy = dot(step, y);
    if (sy > 1e-12 * std::sqrt(dot(step, step) * dot(y, y))) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += hinv[i * n + j] * y[j];
        hy[i] = s;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          hinv[i * n + j] += rho * ((1.0 + rho * yhy) * step[i] * step[j] - hy[i] * step[j] - step[i] * hy[j]);
        }
      }
    }
  }
  result.message = "iteration limit reached";
  return result;
}

}  // namespace playcall
