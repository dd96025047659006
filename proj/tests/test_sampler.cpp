#include <doctest.h>

#include <cmath>

#include "nlcs/numkit.hpp"
#include "nlcs/rng.hpp"
#include "nlcs/quadrature.hpp"
#include "nlcs/sampler.hpp"
#include "testutil.hpp"

using namespace nlcs;
using testutil::vec1;

namespace {

PotentialOracle std_normal_1d() {
  return make_gaussian(Vec::Zero(1), Mat::Identity(1, 1));
}

MixtureSpec bimodal_1d(double a, double s2) {
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  spec.means = {vec1(-a), vec1(a)};
  spec.covs = {Mat::Constant(1, 1, s2), Mat::Constant(1, 1, s2)};
  return spec;
}

}  // namespace

TEST_CASE("grid spec formulas") {
  const GridSpec g = GridSpec::create(2, 3.0, 1.5, 0.25);
  CHECK(g.ell == doctest::Approx(std::sqrt(2.0 * 0.25 / (9.0 * 1.5)) / 64.0));
  CHECK(g.R == doctest::Approx(std::sqrt(32.0 * 1.5 / 0.25)));
  CHECK(g.R0 == doctest::Approx(2.0 * g.R + std::sqrt(2.0) * g.ell));
}

TEST_CASE("grid estimator sandwich on the standard gaussian") {
  const PotentialOracle f = std_normal_1d();
  auto ledger = std::make_shared<QueryLedger>();
  GridOptions opts;
  opts.ledger = ledger;
  const GridEstimates est = estimate_grid(f, 1.0, 1.0, 0.05, 1, opts);

  // truth: Z = 1 exactly, f* = value at 0 (minimum over B_{2R})
  const double f_star = f.value(Vec::Zero(1));
  CHECK(est.f_hat_star >= f_star);
  CHECK(est.f_hat_star <= f_star + 1.0);
  CHECK(est.log_Z_hat <= 0.0 + 1e-12);
  CHECK(est.log_Z_hat >= std::log(0.5) - 1.0);
  CHECK(est.cubes_visited <= std::pow(1024.0 * 5.0 * 1.0 / 0.05, 1.0));
  CHECK(ledger->value_queries == est.cubes_visited);
}

TEST_CASE("grid sweep: threaded run matches single-threaded") {
  const PotentialOracle f = make_mixture(bimodal_1d(2.0, 1.0));
  GridOptions one;
  const GridEstimates a = estimate_grid(f, 2.0, 5.0, 0.2, 1, one);
  GridOptions two;
  two.threads = 2;
  const GridEstimates b = estimate_grid(f, 2.0, 5.0, 0.2, 1, two);
  CHECK(a.cubes_visited == b.cubes_visited);
  CHECK(a.f_hat_star == doctest::Approx(b.f_hat_star).epsilon(1e-14));
  CHECK(a.log_Z_hat == doctest::Approx(b.log_Z_hat).epsilon(1e-12));
}

TEST_CASE("grid budget error carries the projected count") {
  const PotentialOracle f = make_gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  GridOptions opts;
  opts.budget = 1000.0;
  try {
    estimate_grid(f, 1.0, 1.0, 0.05, 2, opts);
    FAIL("expected BudgetError");
  } catch (const BudgetError& e) {
    CHECK(e.projected > 1000.0);
  }
}

TEST_CASE("truncated potential piecewise contract") {
  // narrow bimodal: deep valley between the modes gives f_mu > h2 points
  const MixtureSpec spec = bimodal_1d(6.0, 0.25);
  const PotentialOracle f_mu = make_mixture(spec);
  const double L = 9.0, M = 37.0, eps = 0.2;
  auto ledger = std::make_shared<QueryLedger>();
  GridOptions gopts;
  gopts.ledger = ledger;
  const GridEstimates est = estimate_grid(f_mu, L, M, eps, 1, gopts);
  const TruncatedPotential trunc = build_truncated(f_mu, est, L, M, eps, ledger);

  CHECK(trunc.h2 - trunc.h1 ==
        doctest::Approx(0.5 * std::log(L * M / eps)).epsilon(1e-12));

  // low-potential region: f_pi = f_mu + log Z_hat
  const Vec near_mode = vec1(6.0);
  CHECK(f_mu.value(near_mode) < trunc.h1);
  CHECK(trunc.f_pi.value(near_mode) ==
        doctest::Approx(f_mu.value(near_mode) + est.log_Z_hat).epsilon(1e-12));

  // far outside: exactly the gaussian tail minus log eps
  const Vec far = vec1(2.5 * trunc.R);
  CHECK(trunc.f_pi.value(far) ==
        doctest::Approx(trunc.f_gamma(far) - std::log(eps)).epsilon(1e-12));

  // capped region: f_mu >= h2 inside B_R -> f_pi = h2 + log Z_hat
  Vec capped = vec1(0.0);
  bool found = false;
  for (double x = 0.0; x < trunc.R; x += 0.5) {
    if (f_mu.value(vec1(x)) >= trunc.h2 + 1.0) {
      capped = vec1(x);
      found = true;
      break;
    }
  }
  REQUIRE(found);
  CHECK(trunc.f_pi.value(capped) ==
        doctest::Approx(trunc.h2 + est.log_Z_hat).epsilon(1e-12));

  // gradient vanishes at the origin by construction
  CHECK(trunc.f_pi.grad(Vec::Zero(1)).norm() <= 1e-12);

  // C^1 across the seams: analytic gradient matches finite differences
  for (double x : {0.3, 5.0, 7.0, 11.0, trunc.R - 0.1, trunc.R + 0.1,
                   1.5 * trunc.R, 2.0 * trunc.R + 0.1}) {
    const Vec p = vec1(x);
    const Vec g = trunc.f_pi.grad(p);
    const Vec fd = numkit::fd_gradient(
        [&](const Vec& y) { return trunc.f_pi.value(y); }, p);
    CHECK((g - fd).norm() <= 2e-4 * std::max(1.0, g.norm()));
  }

  // query accounting: one value query per evaluation inside B_{2R},
  // value+grad per gradient, nothing outside
  const auto before = *trunc.ledger;
  trunc.f_pi.value(vec1(1.0));
  CHECK(trunc.ledger->value_queries == before.value_queries + 1);
  trunc.f_pi.grad(vec1(1.0));
  CHECK(trunc.ledger->value_queries == before.value_queries + 2);
  CHECK(trunc.ledger->grad_queries == before.grad_queries + 1);
  trunc.f_pi.value(far);
  trunc.f_pi.grad(far);
  CHECK(trunc.ledger->value_queries == before.value_queries + 2);
}

TEST_CASE("k0 bound formula") {
  // gap = 0 reduces to the closed-form initialization bound
  CHECK(k0_bound(4.0, 0.0, 1.5, 2) ==
        doctest::Approx(2.0 + 4.0 + std::log(4.0 * 1.5 * 1.5 * 4.0)));
  CHECK(k0_bound(1.0, 0.0, 1e-9, 3) == 0.0);  // clamped at the KL floor
}

TEST_CASE("estimate_K0 finite and nonnegative on a bimodal target") {
  const PotentialOracle f_mu = make_mixture(bimodal_1d(3.0, 1.0));
  const double L = 9.0, M = 10.0, eps = 0.1;
  const GridEstimates est = estimate_grid(f_mu, L, M, eps, 1, {});
  const TruncatedPotential trunc = build_truncated(f_mu, est, L, M, eps);
  const double k0 = estimate_K0(trunc, 20.0, M, {2000, 7});
  CHECK(k0 >= 0.0);
  CHECK(std::isfinite(k0));
  // bound shape: 2 + L_pi + gap + (d/2) log(4 m^2 L_pi) with gap <= ~2d here
  CHECK(k0 <= 2.0 + 20.0 + 4.0 + 0.5 * std::log(4.0 * 25.0 * 20.0));
}

TEST_CASE("lmc on a stationary gaussian recovers the variance") {
  LmcConfig cfg;
  cfg.N = 2000;
  cfg.h = 1e-2;
  cfg.L_pi = 1.0;
  cfg.K0 = 1.0;
  cfg.seed = 2024;
  cfg.n_samples = 1500;
  const LmcResult res = lmc_run(std_normal_1d(), cfg);
  double mean = 0.0, var = 0.0;
  for (const Vec& s : res.samples) mean += s(0);
  mean /= res.samples.size();
  for (const Vec& s : res.samples) var += (s(0) - mean) * (s(0) - mean);
  var /= (res.samples.size() - 1.0);
  CHECK(std::abs(mean) < 0.12);
  CHECK(var > 0.85);
  CHECK(var < 1.15);
  CHECK(res.ledger.value_queries == 0);
}

TEST_CASE("lmc accounting: grad queries are sum of k0 + 1") {
  LmcConfig cfg;
  cfg.N = 100;
  cfg.h = 5e-3;
  cfg.L_pi = 1.0;
  cfg.seed = 99;
  cfg.n_samples = 40;
  const LmcResult res = lmc_run(std_normal_1d(), cfg);

  // replay the per-sample streams to predict each k0
  std::uint64_t expected = 0;
  for (int i = 0; i < cfg.n_samples; ++i) {
    RngStream rng(cfg.seed, "lmc", i);
    rng.normal_vec(1);  // initial draw
    const double t0 = rng.u01() * cfg.N * cfg.h;
    std::int64_t k0 = static_cast<std::int64_t>(std::floor(t0 / cfg.h));
    k0 = std::min(k0, cfg.N - 1);
    expected += static_cast<std::uint64_t>(k0 + 1);
  }
  CHECK(res.ledger.grad_queries == expected);
}

TEST_CASE("lmc determinism and divergence") {
  LmcConfig cfg;
  cfg.N = 50;
  cfg.h = 1e-2;
  cfg.seed = 5;
  cfg.n_samples = 10;
  const LmcResult a = lmc_run(std_normal_1d(), cfg);
  const LmcResult b = lmc_run(std_normal_1d(), cfg);
  for (int i = 0; i < cfg.n_samples; ++i) {
    CHECK(a.samples[i](0) == b.samples[i](0));
  }

  // h L > 2 makes the Euler chain explode on a gaussian
  LmcConfig bad = cfg;
  bad.h = 3.0;
  bad.N = 4000;
  bad.n_samples = 5;
  bad.divergence_radius = 1e6;
  CHECK_THROWS_AS(lmc_run(std_normal_1d(), bad), DivergenceError);
}

TEST_CASE("pipeline accounting with full overrides") {
  const PotentialOracle f_mu = std_normal_1d();
  SamplerOverrides ov;
  ov.N = 50;
  ov.h = 0.01;
  ov.K0 = 2.0;
  ov.L_pi = 1.5;
  ov.seed = 42;
  const SampleRun run = sample_nonlogconcave(f_mu, 1.0, 1.0, 0.05, 25, ov);
  CHECK(run.samples.size() == 25);
  // every mu-query is either a grid center or comes from an LMC gradient
  // evaluation (1 value + 1 grad each)
  CHECK(run.report.value_queries ==
        run.report.cubes_visited + run.report.grad_queries);
  CHECK(run.report.grad_queries > 0);
  CHECK(run.report.N == 50);
  CHECK(run.report.h == 0.01);

  // determinism of the full pipeline
  const SampleRun again = sample_nonlogconcave(f_mu, 1.0, 1.0, 0.05, 25, ov);
  for (size_t i = 0; i < run.samples.size(); ++i) {
    CHECK(run.samples[i](0) == again.samples[i](0));
  }
}

TEST_CASE("f_pi smoothness and gap stay inside the formula envelopes") {
  const PotentialOracle f_mu = make_mixture(bimodal_1d(3.0, 1.0));
  const double L = 9.0, M = 10.0, eps = 0.1;
  const GridEstimates est = estimate_grid(f_mu, L, M, eps, 1, {});
  const TruncatedPotential tr = build_truncated(f_mu, est, L, M, eps);
  const double width = tr.h2 - tr.h1;
  const double formula4 = L * L * L * std::pow(tr.R, 4) / (width * width);

  RngStream rng(77, "fpismooth", 0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec x = vec1((2.0 * tr.R) * (2.0 * rng.u01() - 1.0));
    const Mat h = numkit::fd_hessian(
        [&](const Vec& y) { return tr.f_pi.value(y); }, x);
    worst = std::max(worst, std::abs(h(0, 0)));
  }
  CHECK(worst <= formula4);

  const double formula6 = formula4 * tr.R * tr.R;
  double min_fpi = std::numeric_limits<double>::infinity();
  for (double x = -2.0 * tr.R; x <= 2.0 * tr.R; x += tr.R / 2000.0) {
    min_fpi = std::min(min_fpi, tr.f_pi.value(vec1(x)));
  }
  const double gap = tr.f_pi.value(Vec::Zero(1)) - min_fpi;
  CHECK(gap >= 0.0);
  CHECK(gap <= formula6);
}

TEST_CASE("K0 dominates the quadrature KL of the initial gaussian") {
  const PotentialOracle f_mu = make_mixture(bimodal_1d(3.0, 1.0));
  const double L = 9.0, M = 10.0, eps = 0.1;
  const GridEstimates est = estimate_grid(f_mu, L, M, eps, 1, {});
  const TruncatedPotential tr = build_truncated(f_mu, est, L, M, eps);
  const double L_pi = 20.0;
  const double k0 = estimate_K0(tr, L_pi, M, {4000, 3});

  // independent oracle: KL(N(0, 1/(2 L_pi)) || pi) by 1-d quadrature
  const double s2 = 1.0 / (2.0 * L_pi);
  const auto log_p0 = [&](double x) {
    return -0.5 * x * x / s2 - 0.5 * std::log(2.0 * M_PI * s2);
  };
  const double z_pi = quad::integrate(
      [&](double x) { return std::exp(-tr.f_pi.value(vec1(x))); }, -3.0 * tr.R,
      3.0 * tr.R, 1e-10);
  const double kl = quad::integrate(
      [&](double x) {
        const double lp0 = log_p0(x);
        const double lpi = -tr.f_pi.value(vec1(x)) - std::log(z_pi);
        return std::exp(lp0) * (lp0 - lpi);
      },
      -2.0, 2.0, 1e-10);
  CHECK(kl >= 0.0);
  CHECK(kl <= k0);
}
