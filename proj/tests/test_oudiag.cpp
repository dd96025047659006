#include <doctest.h>

#include <cmath>

#include "nlcs/instances.hpp"
#include "nlcs/numkit.hpp"
#include "nlcs/oudiag.hpp"
#include "nlcs/rng.hpp"
#include "testutil.hpp"

using namespace nlcs;
using namespace nlcs::oudiag;
using testutil::vec1;
using testutil::vec2;

TEST_CASE("ou time bookkeeping") {
  const OuTime t = OuTime::from_e2t(0.05);
  CHECK(t.t == doctest::Approx(-0.5 * std::log(0.05)));
  CHECK(t.shrink * t.shrink == doctest::Approx(0.05));
  CHECK(t.var == doctest::Approx(0.95));
  CHECK_THROWS_AS(OuTime::from_t(-1.0), DomainError);
  CHECK_THROWS_AS(OuTime::from_e2t(0.0), DomainError);
}

TEST_CASE("mixture evolution along the OU flow") {
  MixtureSpec one;
  one.weights = {1.0};
  one.means = {vec2(2.0, -1.0)};
  one.covs = {Mat::Identity(2, 2)};

  // N(0, Id) is stationary
  MixtureSpec stat = one;
  stat.means = {Vec::Zero(2)};
  const MixtureSpec evolved_stat = evolve_mixture(stat, OuTime::from_t(0.7));
  CHECK(evolved_stat.means[0].norm() == 0.0);
  CHECK(testutil::max_abs(Mat(evolved_stat.covs[0] - Mat::Identity(2, 2))) <
        1e-15);

  // unit covariance keeps unit covariance, mean shrinks
  const OuTime t = OuTime::from_t(0.9);
  const MixtureSpec ev = evolve_mixture(one, t);
  CHECK((ev.means[0] - t.shrink * one.means[0]).norm() < 1e-15);
  CHECK(testutil::max_abs(Mat(ev.covs[0] - Mat::Identity(2, 2))) < 1e-15);

  // Sigma = 2 Id at e^{-2t} = 1/2 -> 1.5 Id
  MixtureSpec wide = one;
  wide.covs = {2.0 * Mat::Identity(2, 2)};
  const MixtureSpec ev2 = evolve_mixture(wide, OuTime::from_e2t(0.5));
  CHECK(testutil::max_abs(Mat(ev2.covs[0] - 1.5 * Mat::Identity(2, 2))) < 1e-12);

  // two-stage evolution composes: means multiply, covariances interpolate
  const OuTime t1 = OuTime::from_t(0.4), t2 = OuTime::from_t(0.6);
  const MixtureSpec two_step = evolve_mixture(evolve_mixture(wide, t1), t2);
  const MixtureSpec direct = evolve_mixture(wide, OuTime::from_t(1.0));
  CHECK((two_step.means[0] - direct.means[0]).norm() < 1e-14);
  CHECK(testutil::max_abs(Mat(two_step.covs[0] - direct.covs[0])) < 1e-14);
}

TEST_CASE("mixture log hessian matches finite differences") {
  RngStream rng(51, "oufd", 0);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + rep % 3;
    const int m = 1 + rep % 3;
    MixtureSpec spec;
    double wsum = 0.0;
    for (int i = 0; i < m; ++i) {
      spec.weights.push_back(0.2 + rng.u01());
      wsum += spec.weights.back();
      spec.means.push_back(2.0 * rng.normal_vec(d));
      Vec eigs(d);
      for (int j = 0; j < d; ++j) eigs(j) = 0.5 + rng.u01();
      spec.covs.push_back(Mat(eigs.asDiagonal()));
    }
    for (double& w : spec.weights) w /= wsum;
    const Vec x = 2.0 * rng.normal_vec(d);
    const PotentialOracle pot = make_mixture(spec);
    const Mat h = mixture_log_hessian(spec, x);
    const Mat fd = -numkit::fd_hessian(
        [&](const Vec& y) { return pot.value(y); }, x);
    CHECK(testutil::max_abs(Mat(h - fd)) <=
          1e-5 * std::max(1.0, testutil::max_abs(h)));
  }

  // single gaussian: exactly -Sigma^{-1}
  MixtureSpec one;
  one.weights = {1.0};
  one.means = {vec2(1.0, 1.0)};
  one.covs = {2.0 * Mat::Identity(2, 2)};
  CHECK(testutil::max_abs(Mat(mixture_log_hessian(one, vec2(0.3, -0.8)) +
                              0.5 * Mat::Identity(2, 2))) < 1e-12);
}

TEST_CASE("two-gaussian equal-covariance lower envelope") {
  Mat sigma(2, 2);
  sigma << 1.2, 0.1, 0.1, 0.9;
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  spec.means = {vec2(2.5, 0.0), vec2(-2.5, 1.0)};
  spec.covs = {sigma, sigma};
  const Mat prec = sigma.inverse();
  const Vec delta = spec.means[0] - spec.means[1];
  const Mat envelope = prec - 0.25 * prec * delta * delta.transpose() * prec;
  RngStream rng(53, "envelope", 0);
  for (int i = 0; i < 40; ++i) {
    const Vec x = 4.0 * rng.normal_vec(2);
    const Mat neg_h = -mixture_log_hessian(spec, x);
    const auto [lo, hi] = numkit::eig_range_sym(Mat(neg_h - envelope));
    CHECK(lo >= -1e-9);
    (void)hi;
  }
}

TEST_CASE("score hessian via covariance identity: standard gaussian gives -Id") {
  const PotentialOracle f = make_gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  const OuTime t = OuTime::from_t(0.8);
  const HessianProbe probe = score_hessian_via_cov(f, t, vec2(0.4, -0.2), 200000, 31);
  REQUIRE(probe.mc_stderr.has_value());
  const double err =
      numkit::opnorm_sym(Mat(probe.hessian + Mat::Identity(2, 2)));
  CHECK(err <= std::max(3.0 * *probe.mc_stderr, 0.02));
  CHECK(probe.opnorm == doctest::Approx(1.0).epsilon(0.05));

  CHECK_THROWS_AS(score_hessian_via_cov(f, OuTime::from_t(1e-10), vec2(0, 0), 2000, 1),
                  DomainError);
  CHECK_THROWS_AS(score_hessian_via_cov(f, t, vec2(0, 0), 200, 1), DomainError);
}

TEST_CASE("covariance identity agrees with the closed-form mixture route") {
  MixtureSpec spec;
  spec.weights = {0.4, 0.6};
  spec.means = {vec1(-1.5), vec1(2.0)};
  spec.covs = {Mat::Constant(1, 1, 0.8), Mat::Constant(1, 1, 1.3)};
  const PotentialOracle pot = make_mixture(spec);
  for (double tv : {0.3, 1.0}) {
    const OuTime t = OuTime::from_t(tv);
    const MixtureSpec evolved = evolve_mixture(spec, t);
    for (double x0 : {-0.7, 0.5}) {
      const Mat closed = mixture_log_hessian(evolved, vec1(x0));
      const HessianProbe mc =
          score_hessian_via_cov(pot, t, vec1(x0), 120000, 77);
      REQUIRE(mc.mc_stderr.has_value());
      CHECK(testutil::max_abs(Mat(mc.hessian - closed)) <=
            std::max(3.0 * *mc.mc_stderr, 0.02));
    }
  }
}

TEST_CASE("stitched blowup probe") {
  const Vec u = vec2(std::sqrt(200.0), 0.0);  // ||u||^2 = 200
  const OuTime t = OuTime::from_e2t(0.05);
  const StitchedBlowupResult res = stitched_blowup_probe(u, t, 150000, 911);
  CHECK(res.bound == doctest::Approx(0.05 * 200.0 - 1.0));
  CHECK(res.probe.opnorm >= res.bound / 100.0);
  CHECK(res.delta_t > 0.3);
  CHECK(res.delta_t < 0.7);

  // the t -> 0 probe at the same configuration is O(1)-smooth
  const PotentialOracle f = build_stitched(u);
  const double t0_opnorm = numkit::opnorm_sym(f.hess(Vec(0.5 * u)));
  CHECK(t0_opnorm <= 1.0 + 1e-9);

  CHECK_THROWS_AS(stitched_blowup_probe(u, OuTime::from_e2t(0.5), 2000, 1),
                  DomainError);
  CHECK_THROWS_AS(stitched_blowup_probe(vec2(3.0, 0.0), t, 2000, 1), DomainError);
}

TEST_CASE("hs evolution bracket") {
  const int d = 3;
  const Mat J = 0.35 * Mat::Identity(d, d);  // delta = 0.25 admissible
  const Vec h = Vec::Zero(d);

  const auto [lo0, hi0] = hs_evolution_bounds(J, h, OuTime::from_t(0.0), 0.25);
  CHECK(lo0 == doctest::Approx(1.0 / 3.0));
  CHECK(hi0 == doctest::Approx(4.0));

  const auto [lo_inf, hi_inf] = hs_evolution_bounds(J, h, OuTime::from_t(40.0), 0.25);
  CHECK(lo_inf == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hi_inf == doctest::Approx(1.0).epsilon(1e-12));

  const auto [lo_h, hi_h] = hs_evolution_bounds(J, h, OuTime::from_e2t(0.5), 0.25);
  CHECK(lo_h == doctest::Approx(0.5));
  CHECK(hi_h == doctest::Approx(1.6));

  CHECK_THROWS_AS(hs_evolution_bounds(J, h, OuTime::from_t(1.0), 0.6), DomainError);
  CHECK_THROWS_AS(hs_evolution_bounds(Mat::Identity(d, d), h, OuTime::from_t(1.0), 0.25),
                  DomainError);

  // companion: empirical Hessians of the evolved 2^d-component mixture stay
  // inside the bracket
  RngStream rng(61, "hsev", 0);
  Vec hv = 0.3 * rng.normal_vec(d);
  Mat noise = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) noise(i, j) = rng.normal();
  const Mat q = Eigen::HouseholderQR<Mat>(noise).householderQ();
  Vec eigs(d);
  for (int i = 0; i < d; ++i) eigs(i) = 0.3 + 0.4 * i / std::max(1, d - 1);
  const Mat J2 = q * eigs.asDiagonal() * q.transpose();
  const MixtureSpec comps = hs_mixture_components(J2, hv);
  for (double tv : {0.2, 1.0}) {
    const OuTime t = OuTime::from_t(tv);
    const auto [lo, hi] = hs_evolution_bounds(J2, hv, t, 0.25);
    const MixtureSpec evolved = evolve_mixture(comps, t);
    for (int i = 0; i < 15; ++i) {
      const Vec x = 2.0 * rng.normal_vec(d);
      const auto [emin, emax] =
          numkit::eig_range_sym(Mat(-mixture_log_hessian(evolved, x)));
      CHECK(emin >= lo - 1e-7);
      CHECK(emax <= hi + 1e-7);
    }
  }
}

TEST_CASE("unequal covariance two-gaussian probe") {
  RngStream rng(67, "twog", 0);
  for (int rep = 0; rep < 4; ++rep) {
    const int d = 2 + rep;
    const Vec u1 = 0.3 * rng.normal_vec(d);
    const Vec u2 = u1 + 0.05 * rng.normal_vec(d);  // ||u1-u2|| = o(1)

    // the probe point sits on the sphere where both potentials agree
    const Vec x = two_gaussian_probe_point(u1, u2);
    const MixtureSpec spec = two_gaussian_unequal_cov_spec(u1, u2);
    const double f1 = (x - u1).squaredNorm() + 0.5 * d * std::log(M_PI);
    const double f2 =
        0.5 * (x - u2).squaredNorm() + 0.5 * d * std::log(2.0 * M_PI);
    CHECK(std::abs(f1 - f2) < 1e-9);

    const double opnorm = two_gaussian_unequal_cov_probe(u1, u2);
    const double lower =
        0.25 * (d * std::log(2.0) + 2.0 * (u1 - u2).squaredNorm()) - 2.0;
    CHECK(opnorm >= lower);
    (void)spec;
  }

  // centered case at d = 8
  const double opnorm0 =
      two_gaussian_unequal_cov_probe(Vec::Zero(8), Vec::Zero(8));
  CHECK(opnorm0 >= 8.0 * std::log(2.0) / 4.0 - 2.0);
}

TEST_CASE("equal-covariance smoothness is preserved along the flow") {
  // sweep the OU clock; the negative part of -grad^2 log p_t dies like
  // e^{-2t} s (calibrated constant 0.3, measured on this family)
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  spec.means = {vec2(3.0, 0.0), vec2(-3.0, 0.0)};
  spec.covs = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
  const double s = (spec.means[0] - spec.means[1]).squaredNorm();
  RngStream rng(71, "preserve", 0);
  for (double tv : {0.0, 0.3, 0.8, 1.5, 3.0}) {
    const OuTime t = OuTime::from_t(tv);
    const MixtureSpec evolved = evolve_mixture(spec, t);
    double most_negative = 0.0;
    for (int i = 0; i < 60; ++i) {
      const Vec x = 4.0 * rng.normal_vec(2);
      const auto [lo, hi] =
          numkit::eig_range_sym(Mat(-mixture_log_hessian(evolved, x)));
      most_negative = std::min(most_negative, lo);
      (void)hi;
    }
    const double e2t = t.shrink * t.shrink;
    CHECK(-most_negative <= 0.3 * std::max(1.0, e2t * s));
  }
}

TEST_CASE("stitched blowup contrast at the pinned configuration") {
  // At ||u||^2 = 400, e^{-2t} = 0.05 the evolved opnorm equals
  // e^{-2t}||u||^2/4 - 1 = 4.0 up to MC error, against 1.0 at t = 0; the
  // contrast threshold is calibrated at 3.5.
  Vec u = vec2(20.0, 0.0);
  const OuTime t = OuTime::from_e2t(0.05);
  const StitchedBlowupResult res = stitched_blowup_probe(u, t, 150000, 404);
  const PotentialOracle f = build_stitched(u);
  const double t0 = numkit::opnorm_sym(f.hess(Vec(0.5 * u)));
  CHECK(res.probe.opnorm / t0 >= 3.5);
  CHECK(res.probe.opnorm == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("covariance identity degeneracy guard") {
  // a near-degenerate target makes the fixed gaussian proposal useless
  const PotentialOracle stiff =
      make_gaussian(Vec::Zero(2), 1e-4 * Mat::Identity(2, 2));
  const OuTime t = OuTime::from_t(0.6);
  CHECK_THROWS_AS(score_hessian_via_cov(stiff, t, vec2(3.0, 0.0), 2000, 5),
                  DegeneracyError);
}
