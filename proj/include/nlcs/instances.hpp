#pragma once

#include <cstdint>
#include <vector>

#include "nlcs/oracle.hpp"
#include "nlcs/types.hpp"

namespace nlcs {

// Parameters of the lower-bound family. Derived quantities:
//   R  = sqrt(M/eps)                       placement radius
//   r1 = sqrt((d/L) log(LM/(d eps)))       inner perturbation radius
//   r2 = sqrt(2) r1                        outer perturbation radius
//   h1 = log vol(B_{3R}) + log(1/eps)      plateau height
//   h0(x) = d||x||^2/(2M) + (d/2) log(2 pi M / d)
struct LowerBoundParams {
  int d = 0;
  double L = 0.0;
  double M = 0.0;
  double eps = 0.0;
  double R = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double h1 = 0.0;

  static LowerBoundParams create(int d, double L, double M, double eps);
  double h0(const Vec& x) const;
  Vec h0_grad(const Vec& x) const;
};

// Plateau instance: h0 inside B_{R/4}, interpolated up to the constant h1 on
// [R/4, R/2], flat h1 on [R/2, R], interpolated back on [R, 2R], h0 outside.
struct BaseInstance {
  LowerBoundParams params;
  PotentialOracle potential;
};

BaseInstance build_base(const LowerBoundParams& params);

struct PerturbedInstance {
  LowerBoundParams params;
  Vec v;
  double gamma = 0.0;
  double h2 = 0.0;  // h1 - gamma
  PotentialOracle potential;
};

// Solves for gamma such that the excess mass in B_{r2}(v) equals 9 eps:
//   integral_{B_{r2}(v)} (e^{-f_v} - e^{-h1}) dx = 9 eps.
// Inside B_{r2}(v) the base potential is constant h1, so the integral
// reduces to a 1-d radial quadrature times the sphere surface factor;
// bisection over gamma with the bracket seeded from the analytic bounds
// 9 (3R/r2)^d <= e^gamma <= 18 (3R/r1)^d.
double solve_gamma(const BaseInstance& base, const Vec& v, double tol = 1e-8);

// Defining integral at a given gamma (used by the solver and as its own check).
double perturbation_mass(const LowerBoundParams& params, double gamma);

PerturbedInstance build_perturbed(const BaseInstance& base, const Vec& v,
                                  double gamma);

// Greedy rejection packing of centers on the sphere ||v|| = 3R/4 with
// pairwise distance > 2 r2. Best effort: returns min(want, achieved).
std::vector<Vec> pack_caps(const LowerBoundParams& params, int want,
                           std::uint64_t seed);

// Two unit-covariance Gaussians glued by a radial mollifier shell around u:
// f(x) = g_u(x) ||x||^2/2 + (1-g_u(x)) ||x-u||^2/2 with
// g_u(x) = q_mol(10(||x-u||/||u|| - 0.4)). Requires ||u||^2 >= 100 d.
PotentialOracle build_stitched(const Vec& u);

// Planted cosine-bump instance:
//   f(x) = eps/2 cos(pi/r^2 (||x-x_i||^2 - r^2)) - eps/2   on ||x-x_i|| <= r
//        = 0                                                on the flat region
//        = m (||x|| - R/2)^2                                outside B_{R/2}
// with r = sqrt((2 pi^2 + pi) eps / L).
struct OptInstance {
  Vec center;
  double L = 0.0;
  double m = 0.0;
  double R = 0.0;
  double eps = 0.0;
  double r = 0.0;
  PotentialOracle potential;
};

double opt_bump_radius(double L, double eps);
OptInstance build_opt_instance(const Vec& center, double L, double m, double R,
                               double eps);

// Rectangular lattice of pitch 2r intersected with B_{R/2 - r}; the planted
// balls B_r(x_i) are pairwise disjoint and stay inside B_{R/2}.
std::vector<Vec> pack_opt_centers(double R, double r, int d);

}  // namespace nlcs
