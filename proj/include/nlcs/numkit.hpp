#pragma once

#include <functional>
#include <span>
#include <utility>

#include "nlcs/types.hpp"

// Shared deterministic numerics: the quintic mollifier and its derivatives,
// radial interpolation shells, ball volumes, stable log-sum-exp, finite
// differences and symmetric operator norms.
namespace nlcs::numkit {

// Quintic C^2 ramp: 0 for z<=0, 6z^5-15z^4+10z^3 on [0,1], 1 for z>=1.
double mollify(double z);
double mollify_d1(double z);
double mollify_d2(double z);

enum class ShellMode {
  kQuadraticInR2,  // argument (||x-c||^2 - inner) / (outer - inner), inner/outer squared radii
  kLinearInR,      // argument (||x-c|| - inner) / (outer - inner), inner/outer radii
};

// Radial interpolation weight q_mol((rho - inner)/(outer - inner)) around a
// center, with rho = ||x-c||^2 or ||x-c|| depending on mode.
struct RadialShell {
  Vec center;
  double inner = 0.0;
  double outer = 1.0;
  ShellMode mode = ShellMode::kQuadraticInR2;

  RadialShell() = default;
  RadialShell(Vec c, double in, double out, ShellMode m);
};

double shell_value(const RadialShell& shell, const Vec& x);
Vec shell_grad(const RadialShell& shell, const Vec& x);
Mat shell_hess(const RadialShell& shell, const Vec& x);

// log vol(B_R) in d dimensions, exact via lgamma.
double log_ball_volume(int d, double R);

// log surface area of the (d-1)-sphere of radius R.
double log_sphere_area(int d, double R);

// Overflow-safe log sum exp; -inf entries contribute zero mass.
double log_sum_exp(std::span<const double> vals);

// Streaming log-sum-exp accumulator, mergeable across workers.
struct LogSumExpAcc {
  double max_term = -std::numeric_limits<double>::infinity();
  double sum = 0.0;  // sum of exp(term - max_term)
  std::uint64_t count = 0;

  void add(double term);
  void merge(const LogSumExpAcc& other);
  double value() const;
};

using ScalarField = std::function<double(const Vec&)>;

// Central differences; default step 1e-4 * (1 + ||x||).
double fd_step(const Vec& x);
Vec fd_gradient(const ScalarField& f, const Vec& x, double step = 0.0);
Mat fd_hessian(const ScalarField& f, const Vec& x, double step = 0.0);

// Largest-magnitude eigenvalue of a symmetric matrix via Gershgorin-shifted
// power iteration; deterministic all-ones start with one orthogonal restart.
double opnorm_sym(const Mat& H, double tol = 1e-10);

// (lambda_min, lambda_max) by the same shifted power iteration.
std::pair<double, double> eig_range_sym(const Mat& H, double tol = 1e-10);

}  // namespace nlcs::numkit
