#include "nlcs/quadrature.hpp"

#include <cmath>
#include <limits>

namespace nlcs::quad {

namespace {

// Kronrod-15 abscissae on [0,1] (positive half) with weights, and the
// embedded Gauss-7 weights at the shared nodes (odd Kronrod indices).
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct PanelResult {
  double integral;
  double error;
};

PanelResult gk15(const Fn1d& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(c - h * kXgk[i]);
    fv[14 - i] = f(c + h * kXgk[i]);
  }
  fv[7] = f(c);
  double resk = 0.0;
  for (int i = 0; i < 7; ++i) resk += kWgk[i] * (fv[i] + fv[14 - i]);
  resk += kWgk[7] * fv[7];
  double resg = 0.0;
  for (int i = 0; i < 3; ++i) resg += kWg[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
  resg += kWg[3] * fv[7];
  return {resk * h, std::abs(resk - resg) * h};
}

double adapt(const Fn1d& f, double a, double b, double rel_tol, double abs_tol,
             int depth, double whole_estimate) {
  const PanelResult r = gk15(f, a, b);
  if (!std::isfinite(r.integral)) {
    throw NumericError("integrate: non-finite panel value");
  }
  const double tol =
      abs_tol + rel_tol * std::max(std::abs(whole_estimate), std::abs(r.integral));
  if (r.error <= tol || depth <= 0) {
    if (depth <= 0 && r.error > 4.0 * tol) {
      throw ConvergenceError("integrate: max refinement depth reached", r.integral);
    }
    return r.integral;
  }
  const double c = 0.5 * (a + b);
  return adapt(f, a, c, rel_tol, 0.5 * abs_tol, depth - 1, whole_estimate) +
         adapt(f, c, b, rel_tol, 0.5 * abs_tol, depth - 1, whole_estimate);
}

}  // namespace

double integrate(const Fn1d& f, double a, double b, double rel_tol,
                 double abs_tol, int max_depth) {
  if (!(b > a)) throw DomainError("integrate: requires b > a");
  const PanelResult first = gk15(f, a, b);
  return adapt(f, a, b, rel_tol, abs_tol, max_depth, first.integral);
}

double integrate_log(const Fn1d& log_f, double a, double b, double rel_tol,
                     int scan_points) {
  if (!(b > a)) throw DomainError("integrate_log: requires b > a");
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= scan_points; ++i) {
    const double s = a + (b - a) * i / scan_points;
    m = std::max(m, log_f(s));
  }
  if (m == -std::numeric_limits<double>::infinity()) return m;
  const auto shifted = [&](double s) {
    const double v = log_f(s);
    return std::isfinite(v) ? std::exp(v - m) : 0.0;
  };
  const double integral = integrate(shifted, a, b, rel_tol, 0.0);
  if (integral <= 0.0) return -std::numeric_limits<double>::infinity();
  return m + std::log(integral);
}

}  // namespace nlcs::quad
