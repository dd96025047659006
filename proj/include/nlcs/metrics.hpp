#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nlcs/oracle.hpp"
#include "nlcs/types.hpp"

namespace nlcs::metrics {

// Tensor-product quadrature box for d in {1, 2}; trapezoid weights per axis.
struct QuadratureGrid {
  int d = 0;
  Vec lo, hi;
  int resolution = 0;  // nodes per axis

  static QuadratureGrid box1d(double lo, double hi, int resolution);
  static QuadratureGrid box2d(const Vec& lo, const Vec& hi, int resolution);
};

struct TvResult {
  double tv = 0.0;
  double mass_defect = 0.0;
  std::string method;
};

// Normalizes both densities on the grid in the log domain and returns
// (1/2) sum |p1 - p2| cellvol. The mass defect extrapolates the outermost
// cell layer geometrically; > 1e-3 raises a grid-too-small error.
TvResult tv_quadrature(const PotentialOracle& f1, const PotentialOracle& f2,
                       const QuadratureGrid& grid);

// log integral of exp(-f) over the grid (trapezoid) -- the normalizer used
// by tv_quadrature, exposed for Z checks.
double log_partition(const PotentialOracle& f, const QuadratureGrid& grid);

// E ||X||^2 under exp(-f)/Z restricted to the grid.
double second_moment_quadrature(const PotentialOracle& f,
                                const QuadratureGrid& grid);

struct HistOptions {
  int bins = 0;  // 0 -> Freedman-Diaconis per axis
  std::optional<Vec> lo, hi;  // default: sample range padded by 5%
  int refine = 8;             // sub-cells per axis for true bin masses
};

// TV between the sample histogram and the binned true density. The true
// density is normalized by quadrature over an enlarged box; its mass outside
// the histogram range counts toward the distance.
TvResult tv_histogram(const std::vector<Vec>& samples,
                      const PotentialOracle& density, HistOptions opts = {});

struct McMoment {
  double value = 0.0;
  double stderr_ = 0.0;
  double ess = 0.0;
};

// Self-normalized importance sampling with a uniform-ball + Gaussian-tail
// proposal; suited to targets that are flat on a ball with sub-Gaussian tails.
struct McProposal {
  double ball_radius = 1.0;
  double tail_sigma = 1.0;
  double p_ball = 0.5;
  int n = 100000;
  std::uint64_t seed = 0;
};

McMoment second_moment_mc(const PotentialOracle& f, const McProposal& prop);

struct ProbeRegion {
  Vec center;
  double radius = 1.0;
};

// Max operator norm of the Hessian over quasi-random points in the region
// plus caller-supplied adversarial points; analytic Hessian when the oracle
// exposes one, finite differences otherwise.
double smoothness_probe(const PotentialOracle& f, const ProbeRegion& region,
                        int n_points, std::uint64_t seed,
                        const std::vector<Vec>& extra_points = {});

// Halton points in a ball, the probe sets used across the repo.
std::vector<Vec> halton_ball(const ProbeRegion& region, int n_points,
                             std::uint64_t seed);

// Poincare comparison against gamma = N(0, (M/(eps d)) Id):
//   C_PI(gamma) * min(r) / max(r)^2,  r = p_pi / p_gamma over the probes,
// with C_PI(gamma) = 2 d eps / M and Z_pi estimated by importance sampling
// under gamma. A numeric lower bound on C_PI(pi) up to probe coverage.
double poincare_comparison_bound(const PotentialOracle& f_pi,
                                 const PotentialOracle& f_gamma, double M,
                                 double eps, int d,
                                 const std::vector<Vec>& probes,
                                 int z_mc_samples = 4000,
                                 std::uint64_t seed = 0);

}  // namespace nlcs::metrics
