#include "nlcs/numkit.hpp"

#include <cmath>
#include <limits>

namespace nlcs::numkit {

namespace {

void require_finite(double z, const char* what) {
  if (!std::isfinite(z)) {
    throw DomainError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

double mollify(double z) {
  require_finite(z, "mollify");
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  return ((6.0 * z - 15.0) * z + 10.0) * z * z * z;
}

double mollify_d1(double z) {
  require_finite(z, "mollify_d1");
  if (z <= 0.0 || z >= 1.0) return 0.0;
  // 30 z^2 (z-1)^2
  const double w = z * (z - 1.0);
  return 30.0 * w * w;
}

double mollify_d2(double z) {
  require_finite(z, "mollify_d2");
  if (z <= 0.0 || z >= 1.0) return 0.0;
  return ((120.0 * z - 180.0) * z + 60.0) * z;
}

RadialShell::RadialShell(Vec c, double in, double out, ShellMode m)
    : center(std::move(c)), inner(in), outer(out), mode(m) {
  if (!(outer > inner) || !(inner >= 0.0) || !std::isfinite(inner) ||
      !std::isfinite(outer)) {
    throw DomainError("RadialShell: requires 0 <= inner < outer");
  }
}

namespace {

double shell_rho(const RadialShell& s, const Vec& x, Vec& delta) {
  delta = x - s.center;
  const double n2 = delta.squaredNorm();
  return s.mode == ShellMode::kQuadraticInR2 ? n2 : std::sqrt(n2);
}

}  // namespace

double shell_value(const RadialShell& shell, const Vec& x) {
  Vec delta;
  const double rho = shell_rho(shell, x, delta);
  return mollify((rho - shell.inner) / (shell.outer - shell.inner));
}

Vec shell_grad(const RadialShell& shell, const Vec& x) {
  Vec delta;
  const double rho = shell_rho(shell, x, delta);
  const double span = shell.outer - shell.inner;
  const double z = (rho - shell.inner) / span;
  const double q1 = mollify_d1(z);
  if (shell.mode == ShellMode::kQuadraticInR2) {
    return (2.0 * q1 / span) * delta;
  }
  if (rho == 0.0) {
    if (shell.inner > 0.0) return Vec::Zero(x.size());  // q' vanishes, z < 0
    throw SingularityError("shell_grad: linear-mode gradient at center with inner=0");
  }
  if (q1 == 0.0) return Vec::Zero(x.size());
  return (q1 / (span * rho)) * delta;
}

Mat shell_hess(const RadialShell& shell, const Vec& x) {
  Vec delta;
  const double rho = shell_rho(shell, x, delta);
  const double span = shell.outer - shell.inner;
  const double z = (rho - shell.inner) / span;
  const double q1 = mollify_d1(z);
  const double q2 = mollify_d2(z);
  const int d = static_cast<int>(x.size());
  if (shell.mode == ShellMode::kQuadraticInR2) {
    Mat h = (4.0 * q2 / (span * span)) * (delta * delta.transpose());
    h.diagonal().array() += 2.0 * q1 / span;
    return h;
  }
  if (rho == 0.0) {
    if (shell.inner > 0.0) return Mat::Zero(d, d);
    throw SingularityError("shell_hess: linear-mode Hessian at center with inner=0");
  }
  if (q1 == 0.0 && q2 == 0.0) return Mat::Zero(d, d);
  const Mat proj = (delta * delta.transpose()) / (rho * rho);
  Mat h = (q2 / (span * span)) * proj;
  h += (q1 / (span * rho)) * (Mat::Identity(d, d) - proj);
  return h;
}

double log_ball_volume(int d, double R) {
  if (d < 1) throw DomainError("log_ball_volume: d must be >= 1");
  if (!(R > 0.0) || !std::isfinite(R)) {
    throw DomainError("log_ball_volume: R must be positive and finite");
  }
  const double hd = 0.5 * d;
  return hd * std::log(M_PI * R * R) - std::lgamma(hd + 1.0);
}

double log_sphere_area(int d, double R) {
  // surface of B_R is d * vol(B_R) / R
  return std::log(static_cast<double>(d)) + log_ball_volume(d, R) - std::log(R);
}

double log_sum_exp(std::span<const double> vals) {
  if (vals.empty()) throw DomainError("log_sum_exp: empty input");
  LogSumExpAcc acc;
  for (double v : vals) acc.add(v);
  return acc.value();
}

void LogSumExpAcc::add(double term) {
  ++count;
  if (term == -std::numeric_limits<double>::infinity()) return;
  if (!std::isfinite(term)) throw DomainError("log_sum_exp: non-finite term");
  if (term <= max_term) {
    sum += std::exp(term - max_term);
  } else {
    sum = sum * std::exp(max_term - term) + 1.0;
    max_term = term;
  }
}

void LogSumExpAcc::merge(const LogSumExpAcc& other) {
  count += other.count;
  if (other.sum == 0.0) return;
  if (other.max_term <= max_term) {
    sum += other.sum * std::exp(other.max_term - max_term);
  } else {
    sum = sum * std::exp(max_term - other.max_term) + other.sum;
    max_term = other.max_term;
  }
}

double LogSumExpAcc::value() const {
  if (sum == 0.0) return -std::numeric_limits<double>::infinity();
  return max_term + std::log(sum);
}

double fd_step(const Vec& x) { return 1e-4 * (1.0 + x.norm()); }

namespace {

double checked_eval(const ScalarField& f, const Vec& x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw NumericError("finite difference: non-finite evaluation");
  }
  return v;
}

}  // namespace

Vec fd_gradient(const ScalarField& f, const Vec& x, double step) {
  const double h = step > 0.0 ? step : fd_step(x);
  const int d = static_cast<int>(x.size());
  Vec g(d);
  Vec p = x;
  for (int i = 0; i < d; ++i) {
    p(i) = x(i) + h;
    const double fp = checked_eval(f, p);
    p(i) = x(i) - h;
    const double fm = checked_eval(f, p);
    p(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat fd_hessian(const ScalarField& f, const Vec& x, double step) {
  const double h = step > 0.0 ? step : fd_step(x);
  const int d = static_cast<int>(x.size());
  Mat H(d, d);
  const double f0 = checked_eval(f, x);
  Vec p = x;
  for (int i = 0; i < d; ++i) {
    p(i) = x(i) + h;
    const double fp = checked_eval(f, p);
    p(i) = x(i) - h;
    const double fm = checked_eval(f, p);
    p(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      p(i) = x(i) + h;
      p(j) = x(j) + h;
      const double fpp = checked_eval(f, p);
      p(j) = x(j) - h;
      const double fpm = checked_eval(f, p);
      p(i) = x(i) - h;
      const double fmm = checked_eval(f, p);
      p(j) = x(j) + h;
      const double fmp = checked_eval(f, p);
      p(i) = x(i);
      p(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return H;
}

namespace {

// Power iteration on the PSD matrix H + shift*Id from a fixed start vector.
// The Rayleigh quotient is a lower bound on the top eigenvalue and the
// residual norm bounds its error, so convergence is certified.
double power_top(const Mat& B, const Vec& start, double tol, double scale,
                 bool& converged) {
  Vec v = start.normalized();
  double lambda = v.dot(B * v);
  converged = false;
  const int max_iter = 3000;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = B * v;
    const double residual = (w - lambda * v).norm();
    if (residual <= tol * scale) {
      converged = true;
      return lambda;
    }
    const double n = w.norm();
    if (n == 0.0) {
      converged = true;
      return 0.0;
    }
    v = w / n;
    lambda = v.dot(B * v);
  }
  return lambda;
}

double shifted_extreme(const Mat& H, double shift, double tol, bool& converged) {
  const int d = static_cast<int>(H.rows());
  Mat B = H;
  B.diagonal().array() += shift;
  bool ok1 = false;
  const double e1 = power_top(B, Vec::Ones(d), tol, shift, ok1);
  // Second deterministic start: the all-ones vector can be orthogonal to the
  // dominant eigenvector, in which case the residual test certifies the
  // wrong eigenvalue. Both runs must converge and agree through the max.
  Vec alt(d);
  for (int i = 0; i < d; ++i) alt(i) = 1.0 + static_cast<double>(i);
  bool ok2 = false;
  const double e2 = power_top(B, alt, tol, shift, ok2);
  converged = ok1 && ok2;
  return std::max(e1, e2) - shift;
}

double gershgorin_bound(const Mat& H) {
  double bound = 0.0;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    bound = std::max(bound, H.row(i).cwiseAbs().sum());
  }
  return bound;
}

}  // namespace

std::pair<double, double> eig_range_sym(const Mat& H, double tol) {
  if (H.rows() != H.cols()) throw DomainError("eig_range_sym: square matrix required");
  if (!H.allFinite()) throw DomainError("eig_range_sym: non-finite entries");
  const double sym_err = (H - H.transpose()).cwiseAbs().maxCoeff();
  if (sym_err > 1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
    throw DomainError("eig_range_sym: matrix is not symmetric");
  }
  const double shift = gershgorin_bound(H);
  if (shift == 0.0) return {0.0, 0.0};
  bool ok_lo = false, ok_hi = false;
  const double lo = -shifted_extreme(-H, shift, tol, ok_lo);
  const double hi = shifted_extreme(H, shift, tol, ok_hi);
  if (ok_lo && ok_hi) return {lo, hi};
  // Clustered extreme eigenvalues stall the iteration; the matrices here are
  // small and dense, so fall back to a full symmetric solve.
  const Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eig_range_sym: eigenvalue iteration failed",
                           std::max(std::abs(lo), std::abs(hi)));
  }
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double opnorm_sym(const Mat& H, double tol) {
  const auto [lo, hi] = eig_range_sym(H, tol);
  return std::max(std::abs(lo), std::abs(hi));
}

}  // namespace nlcs::numkit
