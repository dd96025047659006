#include "nlcs/sampler.hpp"

#include <cmath>
#include <thread>

#include "nlcs/metrics.hpp"
#include "nlcs/numkit.hpp"
#include "nlcs/rng.hpp"

namespace nlcs {

using numkit::mollify;
using numkit::mollify_d1;

GridSpec GridSpec::create(int d, double L, double M, double eps) {
  if (d < 1 || !(L > 0.0) || !(M > 0.0) || !(eps > 0.0 && eps < 1.0)) {
    throw DomainError("grid spec: requires d >= 1, L, M > 0, eps in (0,1)");
  }
  GridSpec g;
  g.d = d;
  g.ell = std::sqrt(d * eps / (L * L * M)) / 64.0;
  g.R = std::sqrt(32.0 * M / eps);
  g.R0 = 2.0 * g.R + std::sqrt(static_cast<double>(d)) * g.ell;
  return g;
}

namespace {

struct SweepAcc {
  double min_j = std::numeric_limits<double>::infinity();
  numkit::LogSumExpAcc lse;
  std::uint64_t cubes = 0;

  void merge(const SweepAcc& o) {
    min_j = std::min(min_j, o.min_j);
    lse.merge(o.lse);
    cubes += o.cubes;
  }
};

// Odometer sweep over integer cube corners k with all cube vertices inside
// B_{R0}; per-dimension admissible ranges are derived from the remaining
// radius budget, so no index is visited and discarded.
class CubeSweep {
 public:
  CubeSweep(const PotentialOracle& f, const GridSpec& spec)
      : f_(f), spec_(spec), r0_sq_(spec.R0 * spec.R0),
        r2r_sq_(4.0 * spec.R * spec.R) {}

  // k0 restricted to [k0_lo, k0_hi); full range is [-K, K-1] with
  // K = floor(R0/ell).
  int outer_limit() const {
    return static_cast<int>(std::floor(spec_.R0 / spec_.ell));
  }

  void run(int k0_lo, int k0_hi, SweepAcc& acc) {
    center_.resize(spec_.d);
    acc_ = &acc;
    descend(0, 0.0, 0.0, k0_lo, k0_hi);
  }

 private:
  void descend(int dim, double vert_sum, double near_sum, int k0_lo, int k0_hi) {
    const double budget = r0_sq_ - vert_sum;
    if (budget < 0.0) return;
    const int kb = static_cast<int>(std::floor(std::sqrt(budget) / spec_.ell));
    int lo = -kb, hi = kb - 1;
    if (dim == 0) {
      lo = std::max(lo, k0_lo);
      hi = std::min(hi, k0_hi - 1);
    }
    for (int k = lo; k <= hi; ++k) {
      const double far = spec_.ell * std::max(std::abs(k), std::abs(k + 1));
      const double near = spec_.ell * (k >= 0 ? k : -(k + 1));
      center_(dim) = spec_.ell * (k + 0.5);
      if (dim + 1 == spec_.d) {
        const double fv = f_.value(center_);
        acc_->lse.add(-fv);
        ++acc_->cubes;
        if (near_sum + near * near <= r2r_sq_ && fv < acc_->min_j) {
          acc_->min_j = fv;
        }
      } else {
        descend(dim + 1, vert_sum + far * far, near_sum + near * near, 0, 0);
      }
    }
  }

  const PotentialOracle& f_;
  GridSpec spec_;
  double r0_sq_, r2r_sq_;
  Vec center_;
  SweepAcc* acc_ = nullptr;
};

}  // namespace

GridEstimates estimate_grid(const PotentialOracle& f_mu, double L, double M,
                            double eps, int d, const GridOptions& opts) {
  if (f_mu.dim != d) throw DomainError("estimate_grid: dimension mismatch");
  const GridSpec spec = GridSpec::create(d, L, M, eps);

  const double projected =
      std::exp(numkit::log_ball_volume(d, spec.R0) - d * std::log(spec.ell));
  const double formula = std::pow(1024.0 * 5.0 * L * M / (d * eps), d);
  if (!(projected <= opts.budget)) {
    throw BudgetError(
        "estimate_grid: projected cube count " + std::to_string(projected) +
            " exceeds budget " + std::to_string(opts.budget) +
            " (analytic cube-count bound " + std::to_string(formula) + ")",
        projected);
  }

  const int threads = std::max(1, opts.threads);
  const int k_outer = static_cast<int>(std::floor(spec.R0 / spec.ell));
  std::vector<SweepAcc> accs(threads);
  if (threads == 1) {
    CubeSweep sweep(f_mu, spec);
    sweep.run(-k_outer, k_outer, accs[0]);
  } else {
    const long span = 2L * k_outer;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      const int lo = static_cast<int>(-k_outer + span * t / threads);
      const int hi = static_cast<int>(-k_outer + span * (t + 1) / threads);
      pool.emplace_back([&f_mu, &spec, lo, hi, &accs, t] {
        CubeSweep sweep(f_mu, spec);
        sweep.run(lo, hi, accs[t]);
      });
    }
    for (auto& th : pool) th.join();
    for (int t = 1; t < threads; ++t) accs[0].merge(accs[t]);
  }
  const SweepAcc& acc = accs[0];
  if (acc.cubes == 0 || !std::isfinite(acc.min_j)) {
    throw NumericError("estimate_grid: sweep produced no usable cubes");
  }
  GridEstimates est;
  est.cubes_visited = acc.cubes;
  est.f_hat_star = acc.min_j + 0.5 * d;
  est.log_Z_hat = acc.lse.value() + d * std::log(spec.ell) - 0.5 * d;
  if (opts.ledger) opts.ledger->value_queries += acc.cubes;
  return est;
}

double TruncatedPotential::f_gamma(const Vec& x) const {
  return eps * d * x.squaredNorm() / (2.0 * M) +
         0.5 * d * std::log(2.0 * M_PI * M / (d * eps));
}

Vec TruncatedPotential::f_gamma_grad(const Vec& x) const {
  return (eps * d / M) * x;
}

PotentialOracle TruncatedPotential::f_gamma_oracle() const {
  PotentialOracle o;
  o.dim = d;
  o.kind = "f_gamma";
  const double scale = eps * d / M;
  const double cst = 0.5 * d * std::log(2.0 * M_PI * M / (d * eps));
  const int dim = d;
  o.value_fn = [scale, cst](const Vec& x) {
    return 0.5 * scale * x.squaredNorm() + cst;
  };
  o.grad_fn = [scale](const Vec& x) { return Vec(scale * x); };
  o.hess_fn = [scale, dim](const Vec&) {
    return Mat(scale * Mat::Identity(dim, dim));
  };
  return o;
}

TruncatedPotential build_truncated(const PotentialOracle& f_mu,
                                   const GridEstimates& est, double L, double M,
                                   double eps,
                                   std::shared_ptr<QueryLedger> ledger) {
  const int d = f_mu.dim;
  if (!(L * M / (d * eps) > 1.0)) {
    throw DomainError("build_truncated: requires LM/(d eps) > 1");
  }
  TruncatedPotential t;
  t.d = d;
  t.L = L;
  t.M = M;
  t.eps = eps;
  t.grid = est;
  t.R = std::sqrt(32.0 * M / eps);
  t.h1 = est.f_hat_star + numkit::log_ball_volume(d, 2.0 * t.R) +
         0.5 * d * std::log(L) + std::log(4.0 / eps);
  t.h2 = t.h1 + 0.5 * d * std::log(L * M / (d * eps));
  t.ledger = ledger ? std::move(ledger) : std::make_shared<QueryLedger>();

  struct State {
    PotentialOracle mu;  // counted
    double h1, h2, log_z_hat, log_eps;
    double r_sq, gamma_scale, gamma_cst;
    int d;

    double fg(double s) const { return 0.5 * gamma_scale * s + gamma_cst; }
  };
  auto st = std::make_shared<State>();
  st->mu = counted(f_mu, t.ledger);
  st->h1 = t.h1;
  st->h2 = t.h2;
  st->log_z_hat = est.log_Z_hat;
  st->log_eps = std::log(eps);
  st->r_sq = t.R * t.R;
  st->gamma_scale = eps * d / M;
  st->gamma_cst = 0.5 * d * std::log(2.0 * M_PI * M / (d * eps));
  st->d = d;

  PotentialOracle pi;
  pi.dim = d;
  pi.kind = "f_pi";
  pi.value_fn = [st](const Vec& x) {
    const double s = x.squaredNorm();
    if (s >= 4.0 * st->r_sq) return st->fg(s) - st->log_eps;
    const double fmu = st->mu.value(x);
    const double zh = (st->h2 - fmu) / (st->h2 - st->h1);
    const double gh = mollify(zh);
    const double fle = gh * fmu + (1.0 - gh) * st->h2 + st->log_z_hat;
    const double zb = (s - st->r_sq) / (3.0 * st->r_sq);
    if (zb <= 0.0) return fle;
    const double gb = mollify(zb);
    return (1.0 - gb) * fle + gb * (st->fg(s) - st->log_eps);
  };
  pi.grad_fn = [st](const Vec& x) {
    const double s = x.squaredNorm();
    if (s >= 4.0 * st->r_sq) return Vec(st->gamma_scale * x);
    const double fmu = st->mu.value(x);
    const Vec gmu = st->mu.grad(x);
    const double zh = (st->h2 - fmu) / (st->h2 - st->h1);
    // d f_le / d f_mu = q(z) + q'(z) z
    const double chain = mollify(zh) + mollify_d1(zh) * zh;
    Vec g = chain * gmu;
    const double zb = (s - st->r_sq) / (3.0 * st->r_sq);
    if (zb <= 0.0) return g;
    const double gb = mollify(zb);
    const double fle =
        mollify(zh) * fmu + (1.0 - mollify(zh)) * st->h2 + st->log_z_hat;
    g = (1.0 - gb) * g + gb * st->gamma_scale * x;
    g += (mollify_d1(zb) * 2.0 / (3.0 * st->r_sq)) *
         ((st->fg(s) - st->log_eps) - fle) * x;
    return g;
  };
  t.f_pi = std::move(pi);
  return t;
}

double k0_bound(double L_pi, double gap, double first_moment, int d) {
  const double k0 = 2.0 + L_pi + gap +
                    0.5 * d * std::log(4.0 * first_moment * first_moment * L_pi);
  return std::max(k0, 0.0);
}

double estimate_K0(const TruncatedPotential& trunc, double L_pi, double M,
                   const K0Options& opts) {
  const int d = trunc.d;
  const double f0 = trunc.f_pi.value(Vec::Zero(d));
  const double min_floor = trunc.grid.f_hat_star - d + trunc.grid.log_Z_hat;
  const double gap = std::max(0.0, f0 - min_floor);

  // first moment of pi by importance sampling under the Gaussian tail
  RngStream rng(opts.seed, "k0_moment", 0);
  const double sigma = std::sqrt(M / (trunc.eps * d));
  double max_lw = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(opts.mc_samples), nrm(opts.mc_samples);
  Vec x(d);
  for (int i = 0; i < opts.mc_samples; ++i) {
    x = sigma * rng.normal_vec(d);
    lw[i] = trunc.f_gamma(x) - trunc.f_pi.value(x);
    nrm[i] = x.norm();
    max_lw = std::max(max_lw, lw[i]);
  }
  double sw = 0.0, swh = 0.0;
  for (int i = 0; i < opts.mc_samples; ++i) {
    const double w = std::exp(lw[i] - max_lw);
    sw += w;
    swh += w * nrm[i];
  }
  const double first_moment = std::max(swh / sw, 1e-12);
  return k0_bound(L_pi, gap, first_moment, d);
}

double LmcConfig::auto_step(double K0, double L_pi, int d, std::int64_t N) {
  if (!(K0 > 0.0) || !(L_pi > 0.0) || N < 1) {
    throw DomainError("lmc: auto step requires K0 > 0, L_pi > 0, N >= 1");
  }
  return std::sqrt(K0) / (2.0 * L_pi * std::sqrt(static_cast<double>(d) * N));
}

LmcResult lmc_run(const PotentialOracle& f, const LmcConfig& cfg) {
  if (cfg.N < 1 || !(cfg.h > 0.0) || cfg.n_samples < 1 || !(cfg.L_pi > 0.0)) {
    throw DomainError("lmc: invalid config");
  }
  const int d = f.dim;
  LmcResult out;
  out.samples.reserve(cfg.n_samples);
  auto ledger = std::make_shared<QueryLedger>();
  const PotentialOracle target = counted(f, ledger);
  const double init_sd = 1.0 / std::sqrt(2.0 * cfg.L_pi);
  const double total_time = static_cast<double>(cfg.N) * cfg.h;

  for (int i = 0; i < cfg.n_samples; ++i) {
    RngStream rng(cfg.seed, "lmc", static_cast<std::uint64_t>(i));
    Vec x = init_sd * rng.normal_vec(d);
    const double t0 = rng.u01() * total_time;
    std::int64_t k0 = static_cast<std::int64_t>(std::floor(t0 / cfg.h));
    k0 = std::min(k0, cfg.N - 1);
    const auto advance = [&](double dt, std::int64_t step) {
      x -= dt * target.grad(x);
      x += std::sqrt(2.0 * dt) * rng.normal_vec(d);
      if (!x.allFinite() || x.norm() > cfg.divergence_radius) {
        throw DivergenceError("lmc: chain diverged (sample " +
                                  std::to_string(i) + ", step " +
                                  std::to_string(step) + ")",
                              step);
      }
    };
    for (std::int64_t k = 0; k < k0; ++k) advance(cfg.h, k);
    advance(t0 - static_cast<double>(k0) * cfg.h, k0);
    out.samples.push_back(std::move(x));
  }
  out.ledger = *ledger;
  return out;
}

SampleRun sample_nonlogconcave(const PotentialOracle& f_mu, double L, double M,
                               double eps, int n_samples,
                               const SamplerOverrides& ov) {
  const int d = f_mu.dim;
  auto ledger = std::make_shared<QueryLedger>();

  GridOptions gopts;
  gopts.budget = ov.grid_budget;
  gopts.threads = ov.threads;
  gopts.ledger = ledger;
  const GridEstimates est = estimate_grid(f_mu, L, M, eps, d, gopts);
  TruncatedPotential trunc = build_truncated(f_mu, est, L, M, eps, ledger);

  SamplerReport rep;
  rep.f_hat_star = est.f_hat_star;
  rep.log_Z_hat = est.log_Z_hat;
  rep.cubes_visited = est.cubes_visited;
  rep.h1 = trunc.h1;
  rep.h2 = trunc.h2;
  const double width = trunc.h2 - trunc.h1;
  rep.L_pi_formula = L * L * L * std::pow(trunc.R, 4) / (width * width);

  double L_pi;
  if (ov.L_pi) {
    L_pi = *ov.L_pi;
  } else {
    metrics::ProbeRegion region{Vec::Zero(d), 2.0 * trunc.R};
    std::vector<Vec> extras = {Vec::Zero(d)};
    L_pi = std::max(L, metrics::smoothness_probe(trunc.f_pi, region,
                                                 ov.probe_points, ov.seed,
                                                 extras));
  }
  rep.L_pi = L_pi;

  const double K0 =
      ov.K0 ? *ov.K0 : estimate_K0(trunc, L_pi, M, {ov.k0_mc_samples, ov.seed});
  rep.K0 = K0;

  std::int64_t N;
  if (ov.N) {
    N = *ov.N;
    rep.N_formula = 0.0;
  } else {
    // desk-scale default: the analytic step-count formula at the numeric Poincare
    // comparison bound, clamped by n_cap (the raw formula is reported)
    const std::vector<Vec> probes =
        metrics::halton_ball({Vec::Zero(d), 3.0 * trunc.R}, 256, ov.seed);
    rep.poincare_lower = metrics::poincare_comparison_bound(
        trunc.f_pi, trunc.f_gamma_oracle(), M, eps, d, probes, 2000, ov.seed);
    const double delta = 0.5 * eps;
    const double alpha = ov.alpha_knob * rep.poincare_lower;
    const double n1 = 1024.0 * L_pi * L_pi * d * std::max(K0, 1e-12) /
                      (alpha * alpha * std::pow(delta, 4));
    const double n2 = 9.0 * K0 / d;
    rep.N_formula = std::max(n1, n2);
    N = static_cast<std::int64_t>(
        std::min(std::ceil(std::max(rep.N_formula, 1.0)),
                 static_cast<double>(ov.n_cap)));
  }
  rep.N = N;

  const double h =
      ov.h ? *ov.h : LmcConfig::auto_step(std::max(K0, 1e-6), L_pi, d, N);
  rep.h = h;

  LmcConfig cfg;
  cfg.N = N;
  cfg.h = h;
  cfg.K0 = K0;
  cfg.L_pi = L_pi;
  cfg.seed = ov.seed;
  cfg.n_samples = n_samples;
  cfg.divergence_radius = 1e6 * trunc.R;
  LmcResult lmc = lmc_run(trunc.f_pi, cfg);

  rep.value_queries = ledger->value_queries;
  rep.grad_queries = ledger->grad_queries;

  SampleRun run;
  run.samples = std::move(lmc.samples);
  run.report = rep;
  return run;
}

}  // namespace nlcs
