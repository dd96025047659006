#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "nlcs/oracle.hpp"
#include "nlcs/types.hpp"

namespace nlcs::oudiag {

// Time point of the OU process dX = -X dt + sqrt(2) dB; a distribution
// N(u, S) evolves to N(e^{-t} u, e^{-2t} S + (1 - e^{-2t}) Id).
struct OuTime {
  double t = 0.0;
  double shrink = 1.0;  // e^{-t}
  double var = 0.0;     // 1 - e^{-2t}

  static OuTime from_t(double t);
  static OuTime from_e2t(double e2t);  // supplies e^{-2t} directly
};

MixtureSpec evolve_mixture(const MixtureSpec& spec, const OuTime& t);

// grad^2 log p for a Gaussian mixture, via the responsibility-weighted
// pairwise score-difference decomposition (log-domain responsibilities).
Mat mixture_log_hessian(const MixtureSpec& spec, const Vec& x);

struct HessianProbe {
  Vec point;
  OuTime t;
  Mat hessian;
  double opnorm = 0.0;
  std::string method;  // closed-form | finite-difference | covariance-identity
  std::optional<double> mc_stderr;
};

// grad^2 log p_t(x0) through the tilted-measure covariance identity:
//   grad^2 log p_t(x0) = Cov_{Y~nu_t}[Y]/(1-e^{-2t})^2 - Id/(1-e^{-2t}),
// nu_t(y) ∝ p(y/e^{-t}) exp(-||x0-y||^2 / (2(1-e^{-2t}))).
// Self-normalized importance sampling with the Gaussian factor as proposal;
// stderr from 16 batch means, guarded by an effective-sample-size floor.
HessianProbe score_hessian_via_cov(const PotentialOracle& potential,
                                   const OuTime& t, const Vec& x0, int n,
                                   std::uint64_t seed);

struct StitchedBlowupResult {
  HessianProbe probe;
  double bound = 0.0;  // e^{-2t} ||u||^2 - 1
  double ratio = 0.0;  // opnorm / bound
  double delta_t = 0.0;  // tilted-measure mass fraction in the shifted ball
};

// Covariance-identity probe of the stitched Gaussian at x0 = e^{-t} u / 2,
// the configuration where the evolved log-density loses smoothness.
StitchedBlowupResult stitched_blowup_probe(const Vec& u, const OuTime& t,
                                           int n, std::uint64_t seed);

// Analytic bracket for the evolved Hubbard-Stratonovich mixture:
//   1/(1 + (1-2 delta)/delta e^{-2t}) <= -grad^2 log p_t <= 1/(1-(1-delta)e^{-2t}).
// Requires delta Id <= J <= (1-delta) Id for the supplied delta in (0, 1/2).
std::pair<double, double> hs_evolution_bounds(const Mat& J, const Vec& h,
                                              const OuTime& t, double delta);

// Deterministic probe point for the unequal-covariance two-Gaussian mixture
// (components N(u1, Id/2) and N(u2, Id), weights 1/2): the sphere around
// 2u1 - u2 where the two component potentials agree.
Vec two_gaussian_probe_point(const Vec& u1, const Vec& u2);

// opnorm of grad^2 log p at that point; grows like (d log 2 + 2||u1-u2||^2)/4.
double two_gaussian_unequal_cov_probe(const Vec& u1, const Vec& u2);

// The two-Gaussian unequal-covariance mixture itself (exposed for tests).
MixtureSpec two_gaussian_unequal_cov_spec(const Vec& u1, const Vec& u2);

}  // namespace nlcs::oudiag
