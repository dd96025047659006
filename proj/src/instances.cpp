#include "nlcs/instances.hpp"

#include <cmath>
#include <memory>

#include "nlcs/numkit.hpp"
#include "nlcs/quadrature.hpp"
#include "nlcs/rng.hpp"

namespace nlcs {

using numkit::mollify;
using numkit::mollify_d1;
using numkit::mollify_d2;

LowerBoundParams LowerBoundParams::create(int d, double L, double M,
                                          double eps) {
  if (d < 1) throw DomainError("lower-bound params: d >= 1 violated");
  if (!(L > 0.0) || !(M > 0.0)) {
    throw DomainError("lower-bound params: L > 0, M > 0 violated");
  }
  if (!(eps > 0.0 && eps < 1.0 / 200.0)) {
    throw DomainError("lower-bound params: eps in (0, 1/200) violated");
  }
  if (L * M < d) {
    throw DomainError("lower-bound params: LM >= d violated");
  }
  LowerBoundParams p;
  p.d = d;
  p.L = L;
  p.M = M;
  p.eps = eps;
  p.R = std::sqrt(M / eps);
  p.r1 = std::sqrt(d / L * std::log(L * M / (d * eps)));
  p.r2 = std::sqrt(2.0) * p.r1;
  p.h1 = numkit::log_ball_volume(d, 3.0 * p.R) + std::log(1.0 / eps);
  if (4.0 * p.r2 > p.R) {
    throw DomainError("lower-bound params: 4 r2 <= R violated");
  }
  return p;
}

double LowerBoundParams::h0(const Vec& x) const {
  return d * x.squaredNorm() / (2.0 * M) +
         0.5 * d * std::log(2.0 * M_PI * M / d);
}

Vec LowerBoundParams::h0_grad(const Vec& x) const { return (d / M) * x; }

namespace {

// The base potential is radial: f0(x) = F(||x||^2). Scalar profile with two
// derivatives in the squared-radius variable s.
struct BaseProfile {
  LowerBoundParams p;
  double a_lo, span_lo;  // inner shell: s in [R^2/16, R^2/4]
  double a_hi, span_hi;  // outer shell: s in [R^2, 4R^2]
  double c0;             // h0 additive constant

  explicit BaseProfile(const LowerBoundParams& params) : p(params) {
    const double R2 = p.R * p.R;
    a_lo = R2 / 16.0;
    span_lo = R2 / 4.0 - R2 / 16.0;
    a_hi = R2;
    span_hi = 3.0 * R2;
    c0 = 0.5 * p.d * std::log(2.0 * M_PI * p.M / p.d);
  }

  double value(double s) const {
    const double h0 = p.d * s / (2.0 * p.M) + c0;
    const double ga = mollify((s - a_lo) / span_lo);
    const double gb = mollify((s - a_hi) / span_hi);
    const double mid = ga * p.h1 + (1.0 - ga) * h0;
    return gb * h0 + (1.0 - gb) * mid;
  }

  // F'(s)
  double d1(double s) const {
    const double h0 = p.d * s / (2.0 * p.M) + c0;
    const double h0p = p.d / (2.0 * p.M);
    const double za = (s - a_lo) / span_lo;
    const double zb = (s - a_hi) / span_hi;
    const double ga = mollify(za), gap = mollify_d1(za) / span_lo;
    const double gb = mollify(zb), gbp = mollify_d1(zb) / span_hi;
    const double mid = ga * p.h1 + (1.0 - ga) * h0;
    const double midp = gap * (p.h1 - h0) + (1.0 - ga) * h0p;
    return gbp * (h0 - mid) + gb * h0p + (1.0 - gb) * midp;
  }

  // F''(s)
  double d2(double s) const {
    const double h0 = p.d * s / (2.0 * p.M) + c0;
    const double h0p = p.d / (2.0 * p.M);
    const double za = (s - a_lo) / span_lo;
    const double zb = (s - a_hi) / span_hi;
    const double ga = mollify(za), gap = mollify_d1(za) / span_lo;
    const double gapp = mollify_d2(za) / (span_lo * span_lo);
    const double gb = mollify(zb), gbp = mollify_d1(zb) / span_hi;
    const double gbpp = mollify_d2(zb) / (span_hi * span_hi);
    const double mid = ga * p.h1 + (1.0 - ga) * h0;
    const double midp = gap * (p.h1 - h0) + (1.0 - ga) * h0p;
    const double midpp = gapp * (p.h1 - h0) - 2.0 * gap * h0p;
    return gbpp * (h0 - mid) + 2.0 * gbp * (h0p - midp) + (1.0 - gb) * midpp;
  }
};

}  // namespace

BaseInstance build_base(const LowerBoundParams& params) {
  auto prof = std::make_shared<BaseProfile>(params);
  PotentialOracle o;
  o.dim = params.d;
  o.kind = "lb_base";
  o.value_fn = [prof](const Vec& x) { return prof->value(x.squaredNorm()); };
  o.grad_fn = [prof](const Vec& x) {
    return Vec(2.0 * prof->d1(x.squaredNorm()) * x);
  };
  o.hess_fn = [prof](const Vec& x) {
    const double s = x.squaredNorm();
    Mat h = 4.0 * prof->d2(s) * (x * x.transpose());
    h.diagonal().array() += 2.0 * prof->d1(s);
    return h;
  };
  return {params, std::move(o)};
}

namespace {

// log of integral_{B_{r2}(v)} (e^{-f_v} - e^{-h1}) dx for the radial profile
// f_v(s) = h1 - (1 - g(s)) gamma. Exact in any dimension: 1-d quadrature in
// the radius times the sphere surface factor.
double log_perturbation_mass(const LowerBoundParams& p, double gamma) {
  const double span = p.r2 * p.r2 - p.r1 * p.r1;
  const auto log_integrand = [&](double s) -> double {
    const double g = mollify((s * s - p.r1 * p.r1) / span);
    const double a = (1.0 - g) * gamma;  // f_v deficit below h1
    double log_em1;                      // log(e^a - 1)
    if (a <= 0.0) return -std::numeric_limits<double>::infinity();
    if (a > 1e-8) {
      log_em1 = a + std::log1p(-std::exp(-a));
    } else {
      log_em1 = std::log(std::expm1(a));
    }
    const double log_s = s > 0.0 ? std::log(s)
                                 : -std::numeric_limits<double>::infinity();
    return (p.d - 1) * log_s + log_em1;
  };
  const double log_radial = quad::integrate_log(log_integrand, 0.0, p.r2, 1e-12);
  return numkit::log_sphere_area(p.d, 1.0) - p.h1 + log_radial;
}

void check_center(const LowerBoundParams& p, const Vec& v) {
  if (static_cast<int>(v.size()) != p.d) {
    throw DomainError("perturbation center: dimension mismatch");
  }
  const double want = 0.75 * p.R;
  if (std::abs(v.norm() - want) > 1e-9 * want) {
    throw DomainError("perturbation center: ||v|| must equal 3R/4");
  }
}

}  // namespace

double perturbation_mass(const LowerBoundParams& params, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("perturbation_mass: gamma must be > 0");
  return std::exp(log_perturbation_mass(params, gamma));
}

double solve_gamma(const BaseInstance& base, const Vec& v, double tol) {
  const LowerBoundParams& p = base.params;
  check_center(p, v);
  const double target = std::log(9.0 * p.eps);
  // Analytic bracket; the integral is continuous and increasing in gamma.
  double lo = std::log(9.0) + p.d * std::log(3.0 * p.R / p.r2);
  double hi = std::log(18.0) + p.d * std::log(3.0 * p.R / p.r1);
  for (int i = 0; i < 200 && log_perturbation_mass(p, lo) > target; ++i) lo *= 0.5;
  for (int i = 0; i < 200 && log_perturbation_mass(p, hi) < target; ++i) hi *= 2.0;
  if (log_perturbation_mass(p, lo) > target ||
      log_perturbation_mass(p, hi) < target) {
    throw NumericError("solve_gamma: bracket expansion failed");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    mid = 0.5 * (lo + hi);
    const double val = log_perturbation_mass(p, mid);
    if (std::abs(std::expm1(val - target)) <= tol) return mid;
    (val < target ? lo : hi) = mid;
  }
  throw ConvergenceError("solve_gamma: bisection did not converge", mid);
}

PerturbedInstance build_perturbed(const BaseInstance& base, const Vec& v,
                                  double gamma) {
  const LowerBoundParams p = base.params;
  check_center(p, v);
  if (!(gamma > 0.0)) throw DomainError("build_perturbed: gamma must be > 0");
  struct State {
    PotentialOracle f0;
    Vec v;
    double h2, r1sq, span;
    int d;
  };
  auto st = std::make_shared<State>();
  st->f0 = base.potential;
  st->v = v;
  st->h2 = p.h1 - gamma;
  st->r1sq = p.r1 * p.r1;
  st->span = p.r2 * p.r2 - p.r1 * p.r1;
  st->d = p.d;

  PotentialOracle o;
  o.dim = p.d;
  o.kind = "lb_perturbed";
  o.value_fn = [st](const Vec& x) {
    const double s = (x - st->v).squaredNorm();
    const double g = mollify((s - st->r1sq) / st->span);
    if (g >= 1.0) return st->f0.value(x);
    return g * st->f0.value(x) + (1.0 - g) * st->h2;
  };
  o.grad_fn = [st](const Vec& x) {
    const Vec delta = x - st->v;
    const double s = delta.squaredNorm();
    const double z = (s - st->r1sq) / st->span;
    const double g = mollify(z);
    if (g >= 1.0) return st->f0.grad(x);
    Vec grad = g > 0.0 ? Vec(g * st->f0.grad(x)) : Vec(Vec::Zero(st->d));
    const double q1 = mollify_d1(z);
    if (q1 != 0.0) {
      grad += (2.0 * q1 / st->span) * (st->f0.value(x) - st->h2) * delta;
    }
    return grad;
  };
  o.hess_fn = [st](const Vec& x) {
    const Vec delta = x - st->v;
    const double s = delta.squaredNorm();
    const double z = (s - st->r1sq) / st->span;
    const double g = mollify(z);
    if (g >= 1.0) return st->f0.hess(x);
    Mat h = g > 0.0 ? Mat(g * st->f0.hess(x)) : Mat(Mat::Zero(st->d, st->d));
    const double q1 = mollify_d1(z);
    const double q2 = mollify_d2(z);
    if (q1 != 0.0 || q2 != 0.0) {
      const Vec dg = (2.0 * q1 / st->span) * delta;
      const Vec f0g = st->f0.grad(x);
      const double diff = st->f0.value(x) - st->h2;
      h += dg * f0g.transpose() + f0g * dg.transpose();
      h += (4.0 * q2 / (st->span * st->span) * diff) * (delta * delta.transpose());
      h.diagonal().array() += 2.0 * q1 / st->span * diff;
    }
    return h;
  };

  PerturbedInstance inst;
  inst.params = p;
  inst.v = v;
  inst.gamma = gamma;
  inst.h2 = st->h2;
  inst.potential = std::move(o);
  return inst;
}

std::vector<Vec> pack_caps(const LowerBoundParams& params, int want,
                           std::uint64_t seed) {
  if (want < 1) throw DomainError("pack_caps: want >= 1 required");
  RngStream rng(seed, "pack_caps", 0);
  const double radius = 0.75 * params.R;
  const double min_dist = 2.0 * params.r2;
  std::vector<Vec> centers;
  const long attempts = std::max<long>(20000, 2000L * want);
  for (long a = 0; a < attempts && static_cast<int>(centers.size()) < want; ++a) {
    Vec cand = radius * rng.uniform_sphere(params.d);
    bool ok = true;
    for (const Vec& c : centers) {
      if ((cand - c).norm() <= min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(cand));
  }
  if (want >= 2 && centers.size() < 2) {
    throw PackingError("pack_caps: could not place two disjoint caps");
  }
  return centers;
}

PotentialOracle build_stitched(const Vec& u) {
  const int d = static_cast<int>(u.size());
  const double nu = u.norm();
  if (nu * nu < 100.0 * d) {
    throw DomainError("build_stitched: requires ||u||^2 >= 100 d");
  }
  struct State {
    Vec u;
    double nu;
    int d;
  };
  auto st = std::make_shared<State>();
  st->u = u;
  st->nu = nu;
  st->d = d;
  const auto weight = [](const State& s, double rho) {
    return mollify(10.0 * (rho / s.nu - 0.4));
  };
  PotentialOracle o;
  o.dim = d;
  o.kind = "stitched";
  o.value_fn = [st, weight](const Vec& x) {
    const double rho2 = (x - st->u).squaredNorm();
    const double g = weight(*st, std::sqrt(rho2));
    if (g >= 1.0) return 0.5 * x.squaredNorm();
    if (g <= 0.0) return 0.5 * rho2;
    return 0.5 * (g * x.squaredNorm() + (1.0 - g) * rho2);
  };
  o.grad_fn = [st](const Vec& x) {
    const Vec delta = x - st->u;
    const double rho = delta.norm();
    const double z = 10.0 * (rho / st->nu - 0.4);
    const double g = mollify(z);
    Vec grad = g * x + (1.0 - g) * delta;
    const double q1 = mollify_d1(z);
    if (q1 != 0.0) {
      const double big_d = 0.5 * (x.squaredNorm() - rho * rho);
      grad += (10.0 * q1 / (st->nu * rho) * big_d) * delta;
    }
    return grad;
  };
  o.hess_fn = [st](const Vec& x) {
    const Vec delta = x - st->u;
    const double rho = delta.norm();
    const double z = 10.0 * (rho / st->nu - 0.4);
    Mat h = Mat::Identity(st->d, st->d);
    const double q1 = mollify_d1(z);
    const double q2 = mollify_d2(z);
    if (q1 == 0.0 && q2 == 0.0) return h;
    const double span = 0.1 * st->nu;
    const Vec dg = (q1 / (span * rho)) * delta;
    const double big_d = 0.5 * (x.squaredNorm() - rho * rho);
    h += dg * st->u.transpose() + st->u * dg.transpose();
    const Mat proj = (delta * delta.transpose()) / (rho * rho);
    h += big_d * (q2 / (span * span) * proj +
                  q1 / (span * rho) * (Mat::Identity(st->d, st->d) - proj));
    return h;
  };
  return o;
}

double opt_bump_radius(double L, double eps) {
  return std::sqrt((2.0 * M_PI * M_PI + M_PI) * eps / L);
}

OptInstance build_opt_instance(const Vec& center, double L, double m, double R,
                               double eps) {
  const int d = static_cast<int>(center.size());
  if (!(L >= 2.0 * m) || !(m > 0.0)) {
    throw DomainError("opt instance: requires L >= 2m > 0");
  }
  if (!(eps > 0.0) || !(R > 0.0)) {
    throw DomainError("opt instance: requires eps > 0 and R > 0");
  }
  const double r = opt_bump_radius(L, eps);
  if (!(r < 0.5 * R)) {
    throw DomainError("opt instance: bump radius must satisfy r < R/2 (eps too large)");
  }
  if (center.norm() > 0.5 * R - r + 1e-12) {
    throw DomainError("opt instance: center must lie in B_{R/2 - r}");
  }
  struct State {
    Vec center;
    double L, m, R, eps, r;
    int d;
  };
  auto st = std::make_shared<State>();
  st->center = center;
  st->L = L;
  st->m = m;
  st->R = R;
  st->eps = eps;
  st->r = r;
  st->d = d;
  PotentialOracle o;
  o.dim = d;
  o.kind = "opt";
  o.value_fn = [st](const Vec& x) {
    const double rho2 = (x - st->center).squaredNorm();
    const double r2 = st->r * st->r;
    if (rho2 <= r2) {
      return 0.5 * st->eps * std::cos(M_PI * (rho2 - r2) / r2) - 0.5 * st->eps;
    }
    const double n = x.norm();
    if (n <= 0.5 * st->R) return 0.0;
    const double t = n - 0.5 * st->R;
    return st->m * t * t;
  };
  o.grad_fn = [st](const Vec& x) {
    const Vec delta = x - st->center;
    const double rho2 = delta.squaredNorm();
    const double r2 = st->r * st->r;
    if (rho2 <= r2) {
      const double theta = M_PI * (rho2 - r2) / r2;
      return Vec(-(st->eps * M_PI / r2) * std::sin(theta) * delta);
    }
    const double n = x.norm();
    if (n <= 0.5 * st->R) return Vec(Vec::Zero(st->d));
    return Vec(2.0 * st->m * (1.0 - 0.5 * st->R / n) * x);
  };
  o.hess_fn = [st](const Vec& x) {
    const Vec delta = x - st->center;
    const double rho2 = delta.squaredNorm();
    const double r2 = st->r * st->r;
    if (rho2 <= r2) {
      const double theta = M_PI * (rho2 - r2) / r2;
      Mat h = -(2.0 * st->eps * M_PI * M_PI / (r2 * r2)) * std::cos(theta) *
              (delta * delta.transpose());
      h.diagonal().array() += -(st->eps * M_PI / r2) * std::sin(theta);
      return h;
    }
    const double n = x.norm();
    if (n <= 0.5 * st->R) return Mat(Mat::Zero(st->d, st->d));
    const Mat proj = (x * x.transpose()) / (n * n);
    return Mat(2.0 * st->m * proj +
               2.0 * st->m * (1.0 - 0.5 * st->R / n) *
                   (Mat::Identity(st->d, st->d) - proj));
  };
  OptInstance inst;
  inst.center = center;
  inst.L = L;
  inst.m = m;
  inst.R = R;
  inst.eps = eps;
  inst.r = r;
  inst.potential = std::move(o);
  return inst;
}

std::vector<Vec> pack_opt_centers(double R, double r, int d) {
  if (!(r > 0.0) || !(R > 0.0) || d < 1) {
    throw DomainError("pack_opt_centers: invalid parameters");
  }
  const double reach = 0.5 * R - r;
  std::vector<Vec> centers;
  if (reach < 0.0) return centers;
  const double pitch = 2.0 * r;
  const int k_max = static_cast<int>(std::floor(reach / pitch));
  std::vector<int> k(d, -k_max);
  while (true) {
    Vec c(d);
    for (int j = 0; j < d; ++j) c(j) = pitch * k[j];
    if (c.norm() <= reach) centers.push_back(std::move(c));
    int j = d - 1;
    while (j >= 0 && k[j] == k_max) {
      k[j] = -k_max;
      --j;
    }
    if (j < 0) break;
    ++k[j];
  }
  return centers;
}

}  // namespace nlcs
