#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace playcall {

using Objective = std::function<double(std::span<const double>)>;

struct OptimizerOptions {
  int max_iterations = 2000;
  double gradient_step = 1e-5;      // central-difference half-width
  double convergence_tol = 1.5e-8;  // on objective and parameter change
  double max_step = 5.0;            // cap on the largest coordinate move per line search
  double flat_gradient_tol = 1e-4;  // gradient level at which a stalled objective counts as converged
  int stall_iterations = 3;         // consecutive stalled iterations required
};

struct OptimizerResult {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Central-difference gradient with half-width h.
std::vector<double> numeric_gradient(const Objective& f, std::span<const double> x, double h);

// Quasi-Newton (BFGS, inverse-Hessian form) minimization with backtracking
// Armijo line search and central-difference gradients. Every accepted step
// strictly decreases the objective, so value <= initial_value on return.
OptimizerResult minimize_bfgs(const Objective& f, std::vector<double> x0, const OptimizerOptions& options);

}  // namespace playcall
