#include "nlcs/oudiag.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "nlcs/instances.hpp"
#include "nlcs/numkit.hpp"
#include "nlcs/rng.hpp"

namespace nlcs::oudiag {

OuTime OuTime::from_t(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DomainError("OuTime: t must be finite and >= 0");
  }
  OuTime out;
  out.t = t;
  out.shrink = std::exp(-t);
  out.var = -std::expm1(-2.0 * t);
  return out;
}

OuTime OuTime::from_e2t(double e2t) {
  if (!(e2t > 0.0 && e2t <= 1.0)) {
    throw DomainError("OuTime: e^{-2t} must lie in (0, 1]");
  }
  OuTime out;
  out.t = -0.5 * std::log(e2t);
  out.shrink = std::sqrt(e2t);
  out.var = 1.0 - e2t;
  return out;
}

MixtureSpec evolve_mixture(const MixtureSpec& spec, const OuTime& t) {
  spec.validate();
  MixtureSpec out;
  out.weights = spec.weights;
  const int d = spec.dim();
  const double e2t = spec.covs.empty() ? 0.0 : t.shrink * t.shrink;
  for (int i = 0; i < spec.components(); ++i) {
    out.means.push_back(t.shrink * spec.means[i]);
    out.covs.push_back(e2t * spec.covs[i] + t.var * Mat::Identity(d, d));
  }
  return out;
}

Mat mixture_log_hessian(const MixtureSpec& spec, const Vec& x) {
  // make_mixture's potential is -log p, so negate its Hessian
  return Mat(-make_mixture(spec).hess(x));
}

namespace {

struct TiltedCov {
  Vec mean;
  Mat cov;
  double ess = 0.0;
  // per-batch Hessians for the batch-means stderr
  std::vector<Mat> batch_hessians;
  double ball_mass = 0.0;  // weighted fraction inside the probe ball, if set
};

TiltedCov tilted_covariance(const PotentialOracle& potential, const OuTime& t,
                            const Vec& x0, int n, std::uint64_t seed,
                            const std::function<bool(const Vec&)>& in_ball) {
  const int d = potential.dim;
  const double v = t.var;
  RngStream rng(seed, "tilted_cov", 0);
  const double sd = std::sqrt(v);
  std::vector<Vec> ys(n);
  std::vector<double> lw(n);
  double max_lw = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    ys[i] = x0 + sd * rng.normal_vec(d);
    lw[i] = -potential.value(ys[i] / t.shrink);
    max_lw = std::max(max_lw, lw[i]);
  }
  double sw = 0.0, sw2 = 0.0, ball = 0.0;
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(lw[i] - max_lw);
    sw += w;
    sw2 += w * w;
    mean += w * ys[i];
    if (in_ball && in_ball(ys[i])) ball += w;
  }
  TiltedCov out;
  out.ess = sw * sw / sw2;
  if (out.ess < 50.0) {
    throw DegeneracyError(
        "score_hessian_via_cov: effective sample size below 50; increase n "
        "or move x0");
  }
  out.mean = mean / sw;
  Mat cov = Mat::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(lw[i] - max_lw);
    const Vec delta = ys[i] - out.mean;
    cov += w * (delta * delta.transpose());
  }
  out.cov = cov / sw;
  out.ball_mass = ball / sw;

  const int batches = 16;
  for (int b = 0; b < batches; ++b) {
    const int lo = static_cast<int>(static_cast<long>(n) * b / batches);
    const int hi = static_cast<int>(static_cast<long>(n) * (b + 1) / batches);
    double bw = 0.0;
    Vec bm = Vec::Zero(d);
    for (int i = lo; i < hi; ++i) {
      const double w = std::exp(lw[i] - max_lw);
      bw += w;
      bm += w * ys[i];
    }
    if (bw <= 0.0) continue;
    bm /= bw;
    Mat bc = Mat::Zero(d, d);
    for (int i = lo; i < hi; ++i) {
      const double w = std::exp(lw[i] - max_lw);
      const Vec delta = ys[i] - bm;
      bc += w * (delta * delta.transpose());
    }
    bc /= bw;
    out.batch_hessians.push_back(bc / (v * v) - Mat::Identity(d, d) / v);
  }
  return out;
}

}  // namespace

HessianProbe score_hessian_via_cov(const PotentialOracle& potential,
                                   const OuTime& t, const Vec& x0, int n,
                                   std::uint64_t seed) {
  if (t.var <= 1e-8) {
    throw DomainError("score_hessian_via_cov: t too small, tilted measure degenerate");
  }
  if (n < 1000) throw DomainError("score_hessian_via_cov: n >= 10^3 required");
  const int d = potential.dim;
  const TiltedCov tc = tilted_covariance(potential, t, x0, n, seed, nullptr);
  HessianProbe probe;
  probe.point = x0;
  probe.t = t;
  probe.hessian = tc.cov / (t.var * t.var) - Mat::Identity(d, d) / t.var;
  probe.opnorm = numkit::opnorm_sym(probe.hessian);
  probe.method = "covariance-identity";

  if (tc.batch_hessians.size() >= 2) {
    Mat mean_h = Mat::Zero(d, d);
    for (const Mat& b : tc.batch_hessians) mean_h += b;
    mean_h /= static_cast<double>(tc.batch_hessians.size());
    double s2 = 0.0;
    for (const Mat& b : tc.batch_hessians) {
      const double dev = numkit::opnorm_sym(Mat(b - mean_h));
      s2 += dev * dev;
    }
    const double nb = static_cast<double>(tc.batch_hessians.size());
    probe.mc_stderr = std::sqrt(s2 / (nb - 1.0) / nb);
  }
  return probe;
}

StitchedBlowupResult stitched_blowup_probe(const Vec& u, const OuTime& t,
                                           int n, std::uint64_t seed) {
  const double e2t = t.shrink * t.shrink;
  if (!(e2t < 0.1)) {
    throw DomainError("stitched_blowup_probe: requires e^{-2t} < 0.1");
  }
  const PotentialOracle f = build_stitched(u);  // validates ||u||^2 >= 100 d
  const Vec x0 = 0.5 * t.shrink * u;
  if (t.var <= 1e-8 || n < 1000) {
    throw DomainError("stitched_blowup_probe: invalid t or n");
  }
  const Vec ball_center = t.shrink * u;
  const double ball_radius = 0.5 * t.shrink * u.norm();
  const auto in_ball = [&](const Vec& y) {
    return (y - ball_center).norm() <= ball_radius;
  };
  const TiltedCov tc = tilted_covariance(f, t, x0, n, seed, in_ball);
  const int d = f.dim;

  StitchedBlowupResult out;
  out.probe.point = x0;
  out.probe.t = t;
  out.probe.hessian = tc.cov / (t.var * t.var) - Mat::Identity(d, d) / t.var;
  out.probe.opnorm = numkit::opnorm_sym(out.probe.hessian);
  out.probe.method = "covariance-identity";
  if (tc.batch_hessians.size() >= 2) {
    Mat mean_h = Mat::Zero(d, d);
    for (const Mat& b : tc.batch_hessians) mean_h += b;
    mean_h /= static_cast<double>(tc.batch_hessians.size());
    double s2 = 0.0;
    for (const Mat& b : tc.batch_hessians) {
      const double dev = numkit::opnorm_sym(Mat(b - mean_h));
      s2 += dev * dev;
    }
    const double nb = static_cast<double>(tc.batch_hessians.size());
    out.probe.mc_stderr = std::sqrt(s2 / (nb - 1.0) / nb);
  }
  out.bound = e2t * u.squaredNorm() - 1.0;
  out.ratio = out.bound != 0.0 ? out.probe.opnorm / out.bound : 0.0;

  // delta_t from the mixture decomposition: the tilted measure splits into a
  // Gaussian term outside the shifted ball and a remainder inside; correct
  // the ball mass by the Gaussian's own (tiny) contribution there.
  RngStream rng(seed, "delta_t", 1);
  const double sigma_t = t.shrink * std::sqrt(t.var);
  const Vec n1_center = 0.5 * t.shrink * e2t * u;
  int hits = 0;
  const int n1_draws = std::max(2000, n / 8);
  for (int i = 0; i < n1_draws; ++i) {
    const Vec y = n1_center + sigma_t * rng.normal_vec(d);
    if (in_ball(y)) ++hits;
  }
  const double p_n1 = static_cast<double>(hits) / n1_draws;
  out.delta_t = std::clamp((tc.ball_mass - p_n1) / (1.0 - p_n1), 0.0, 1.0);
  return out;
}

std::pair<double, double> hs_evolution_bounds(const Mat& J, const Vec& h,
                                              const OuTime& t, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw DomainError("hs_evolution_bounds: delta must lie in (0, 1/2)");
  }
  if (J.rows() != h.size() || J.cols() != h.size()) {
    throw DomainError("hs_evolution_bounds: J/h dimension mismatch");
  }
  const auto [lo_eig, hi_eig] = numkit::eig_range_sym(J);
  const double tol = 1e-9 * std::max(1.0, std::abs(hi_eig));
  if (lo_eig < delta - tol || hi_eig > 1.0 - delta + tol) {
    throw DomainError("hs_evolution_bounds: J spectrum violates delta Id <= J <= (1-delta) Id");
  }
  const double e2t = t.shrink * t.shrink;
  const double lo = 1.0 / (1.0 + (1.0 - 2.0 * delta) / delta * e2t);
  const double hi = 1.0 / (1.0 - (1.0 - delta) * e2t);
  return {lo, hi};
}

MixtureSpec two_gaussian_unequal_cov_spec(const Vec& u1, const Vec& u2) {
  const int d = static_cast<int>(u1.size());
  if (u2.size() != d) throw DomainError("two-gaussian probe: dimension mismatch");
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  spec.means = {u1, u2};
  spec.covs = {0.5 * Mat::Identity(d, d), Mat::Identity(d, d)};
  return spec;
}

Vec two_gaussian_probe_point(const Vec& u1, const Vec& u2) {
  const int d = static_cast<int>(u1.size());
  const Vec c = 2.0 * u1 - u2;
  const double rho =
      std::sqrt(d * std::log(2.0) + 2.0 * (u1 - u2).squaredNorm());
  Vec dir;
  if (c.norm() > 1e-12) {
    dir = c.normalized();
  } else {
    dir = Vec::Zero(d);
    dir(0) = 1.0;
  }
  return c + rho * dir;
}

double two_gaussian_unequal_cov_probe(const Vec& u1, const Vec& u2) {
  const MixtureSpec spec = two_gaussian_unequal_cov_spec(u1, u2);
  const Vec x = two_gaussian_probe_point(u1, u2);
  return numkit::opnorm_sym(mixture_log_hessian(spec, x));
}

}  // namespace nlcs::oudiag
