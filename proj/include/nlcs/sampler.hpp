#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "nlcs/oracle.hpp"
#include "nlcs/types.hpp"

namespace nlcs {

// Cube sweep geometry: side ell = (1/64) sqrt(d eps / (L^2 M)),
// R = sqrt(32 M / eps), R0 = 2R + sqrt(d) ell.
struct GridSpec {
  double ell = 0.0;
  double R = 0.0;
  double R0 = 0.0;
  int d = 0;

  static GridSpec create(int d, double L, double M, double eps);
};

struct GridEstimates {
  double f_hat_star = 0.0;
  double log_Z_hat = 0.0;
  std::uint64_t cubes_visited = 0;
};

struct GridOptions {
  double budget = 2e8;  // max cubes the sweep may stream
  int threads = 1;
  std::shared_ptr<QueryLedger> ledger;  // optional accounting sink
};

// Streams every cube of side ell whose vertices lie in B_{R0} (odometer
// order, memory O(d)). f_hat_star minimizes center values over cubes meeting
// B_{2R}, plus d/2; log_Z_hat log-sum-exps vol(C) exp(-f(center) - d/2) over
// all streamed cubes. Query count equals the number of distinct centers.
GridEstimates estimate_grid(const PotentialOracle& f_mu, double L, double M,
                            double eps, int d, const GridOptions& opts = {});

// The smooth truncation f_pi of f_mu:
//   inside B_R:    soft cap of f_mu between h1 and h2, shifted by log Z_hat
//   on [R, 2R]:    mollifier blend into the Gaussian tail
//   outside B_2R:  f_gamma - log eps   (f_gamma the N(0, M/(eps d)) potential)
// with h1 = f_hat_star + log vol(B_2R) + (d/2) log L + log(4/eps) and
// h2 = h1 + (d/2) log(LM/(d eps)).
struct TruncatedPotential {
  int d = 0;
  double L = 0.0, M = 0.0, eps = 0.0;
  double h1 = 0.0, h2 = 0.0;
  double R = 0.0;
  GridEstimates grid;
  std::shared_ptr<QueryLedger> ledger;  // mu-queries made through f_pi
  PotentialOracle f_pi;

  double f_gamma(const Vec& x) const;
  Vec f_gamma_grad(const Vec& x) const;
  PotentialOracle f_gamma_oracle() const;
};

TruncatedPotential build_truncated(const PotentialOracle& f_mu,
                                   const GridEstimates& est, double L, double M,
                                   double eps,
                                   std::shared_ptr<QueryLedger> ledger = {});

// Initialization bound for mu_0 = N(0, Id/(2 L_pi)):
//   K0 = 2 + L_pi + gap + (d/2) log(4 m^2 L_pi), clamped at 0.
double k0_bound(double L_pi, double gap, double first_moment, int d);

struct K0Options {
  int mc_samples = 4000;
  std::uint64_t seed = 0;
};

// Evaluates k0_bound with gap measured from f_pi(0) against the grid floor
// f_hat_star - d + log Z_hat, and the first moment of pi estimated by
// importance sampling with the Gaussian tail as proposal.
double estimate_K0(const TruncatedPotential& trunc, double L_pi, double M,
                   const K0Options& opts = {});

struct LmcConfig {
  std::int64_t N = 1000;
  double h = 1e-2;
  double K0 = 1.0;
  double L_pi = 1.0;  // smoothness used for the N(0, Id/(2 L_pi)) start
  std::uint64_t seed = 0;
  int n_samples = 1;
  double divergence_radius = 1e12;

  // h = sqrt(K0) / (2 L_pi sqrt(d N))
  static double auto_step(double K0, double L_pi, int d, std::int64_t N);
};

struct LmcResult {
  std::vector<Vec> samples;
  QueryLedger ledger;  // queries against the supplied potential
};

// Averaged/interpolated Langevin Monte Carlo: per sample draw
// X0 ~ N(0, Id/(2 L_pi)), t0 ~ U[0, Nh], run floor(t0/h) Euler-Maruyama
// steps X <- X - h grad f(X) + sqrt(2h) xi, then one partial step of length
// t0 - k0 h with an exact Brownian increment, and output X_{t0}.
// Samples are independent with per-sample seed streams.
LmcResult lmc_run(const PotentialOracle& f, const LmcConfig& cfg);

struct SamplerOverrides {
  std::optional<std::int64_t> N;
  std::optional<double> h;
  std::optional<double> K0;
  std::optional<double> L_pi;
  std::uint64_t seed = 0;
  int threads = 1;
  double grid_budget = 2e8;
  double alpha_knob = 1.0;       // unstated universal constant in the N formula
  std::int64_t n_cap = 50000;    // clamp for the auto-derived step count
  int k0_mc_samples = 4000;
  int probe_points = 80;         // smoothness probe size for the L_pi default
};

struct SamplerReport {
  double f_hat_star = 0.0;
  double log_Z_hat = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  double L_pi = 0.0;
  double K0 = 0.0;
  std::int64_t N = 0;
  double h = 0.0;
  std::uint64_t value_queries = 0;  // total mu-oracle queries, all stages
  std::uint64_t grad_queries = 0;
  std::uint64_t cubes_visited = 0;
  double L_pi_formula = 0.0;   // L^3 R^4 / (h2 - h1)^2
  double N_formula = 0.0;      // analytic step-count formula at the numeric PI bound
  double poincare_lower = 0.0;
};

struct SampleRun {
  std::vector<Vec> samples;
  SamplerReport report;
};

// Full pipeline: estimate_grid -> build_truncated -> estimate_K0 ->
// derive (N, h) -> lmc_run. Every stage honors the overrides; the report
// echoes all intermediate constants and the exact query totals.
SampleRun sample_nonlogconcave(const PotentialOracle& f_mu, double L, double M,
                               double eps, int n_samples,
                               const SamplerOverrides& overrides = {});

}  // namespace nlcs
