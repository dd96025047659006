#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nlcs/types.hpp"

namespace nlcs {

// Black-box access to a potential f with density p ∝ exp(-f). The Hessian is
// an optional capability: analytic constructors expose it, counted wrappers
// deliberately do not (the query model grants value and gradient only).
struct PotentialOracle {
  int dim = 0;
  std::string kind;
  std::function<double(const Vec&)> value_fn;
  std::function<Vec(const Vec&)> grad_fn;
  std::function<Mat(const Vec&)> hess_fn;  // empty when not exposed

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  bool has_hessian() const { return static_cast<bool>(hess_fn); }
  Mat hess(const Vec& x) const;
};

// Exact query accounting; per-worker ledgers merge by summation.
struct QueryLedger {
  std::uint64_t value_queries = 0;
  std::uint64_t grad_queries = 0;

  void merge(const QueryLedger& other) {
    value_queries += other.value_queries;
    grad_queries += other.grad_queries;
  }
};

// Wraps an oracle so every value/gradient call increments the ledger.
// Hessian access is stripped.
PotentialOracle counted(const PotentialOracle& oracle,
                        std::shared_ptr<QueryLedger> ledger);

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<Vec> means;
  std::vector<Mat> covs;

  int dim() const;
  int components() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

// f(x) = (x-u)' Sigma^{-1} (x-u)/2 + log((2 pi)^d |Sigma|)/2, so exp(-f)
// integrates to one.
PotentialOracle make_gaussian(const Vec& u, const Mat& sigma);

// Potential of p(x) = sum_i w_i exp(-f_i(x)) with normalized Gaussian
// components; gradient through responsibilities, Hessian through the
// pairwise score-difference decomposition.
PotentialOracle make_mixture(const MixtureSpec& spec);

// Hubbard-Stratonovich 2^d-component mixture in closed form:
// f(x) = x'J^{-1}x/2 - h'J^{-1}x - sum_i log(e^{x_i} + e^{-x_i}).
PotentialOracle make_hs_mixture(const Mat& J, const Vec& h);

// Domain rescaling x -> f(x / sqrt(L)); maps an (L_f, M_f) potential onto
// smoothness L_f/L and second moment L*M_f.
PotentialOracle scale_potential(const PotentialOracle& oracle, double L);

// Explicit component representation of the HS mixture (means h + J*sigma,
// covariance J, weights ∝ exp(sigma'h + sigma'J sigma/2)); only sensible at
// small d, used by the OU diagnostics.
MixtureSpec hs_mixture_components(const Mat& J, const Vec& h);

}  // namespace nlcs
