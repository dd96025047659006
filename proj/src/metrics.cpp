#include "nlcs/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nlcs/numkit.hpp"
#include "nlcs/rng.hpp"

namespace nlcs::metrics {

QuadratureGrid QuadratureGrid::box1d(double lo, double hi, int resolution) {
  if (resolution < 64) throw DomainError("quadrature grid: resolution >= 64");
  if (!(hi > lo)) throw DomainError("quadrature grid: hi must exceed lo");
  QuadratureGrid g;
  g.d = 1;
  g.lo = Vec::Constant(1, lo);
  g.hi = Vec::Constant(1, hi);
  g.resolution = resolution;
  return g;
}

QuadratureGrid QuadratureGrid::box2d(const Vec& lo, const Vec& hi,
                                     int resolution) {
  if (resolution < 64) throw DomainError("quadrature grid: resolution >= 64");
  if (lo.size() != 2 || hi.size() != 2 || !(hi(0) > lo(0)) || !(hi(1) > lo(1))) {
    throw DomainError("quadrature grid: invalid 2-d box");
  }
  QuadratureGrid g;
  g.d = 2;
  g.lo = lo;
  g.hi = hi;
  g.resolution = resolution;
  return g;
}

namespace {

struct GridGeom {
  int d, n;
  Vec lo;
  Vec step;
  double log_cellvol;

  explicit GridGeom(const QuadratureGrid& g) : d(g.d), n(g.resolution), lo(g.lo) {
    step = (g.hi - g.lo) / (n - 1);
    log_cellvol = 0.0;
    for (int j = 0; j < d; ++j) log_cellvol += std::log(step(j));
  }

  // trapezoid weight (product of per-axis 1 or 1/2 at the ends)
  double weight(int i, int j) const {
    double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    if (d == 2) w *= (j == 0 || j == n - 1) ? 0.5 : 1.0;
    return w;
  }

  // ring index from the box boundary: 0 = outermost node layer
  int ring(int i, int j) const {
    int r = std::min(i, n - 1 - i);
    if (d == 2) r = std::min(r, std::min(j, n - 1 - j));
    return r;
  }
};

template <typename Body>
void for_each_node(const GridGeom& g, Body&& body) {
  Vec x(g.d);
  if (g.d == 1) {
    for (int i = 0; i < g.n; ++i) {
      x(0) = g.lo(0) + g.step(0) * i;
      body(i, 0, x);
    }
    return;
  }
  for (int i = 0; i < g.n; ++i) {
    x(0) = g.lo(0) + g.step(0) * i;
    for (int j = 0; j < g.n; ++j) {
      x(1) = g.lo(1) + g.step(1) * j;
      body(i, j, x);
    }
  }
}

double log_partition_impl(const PotentialOracle& f, const GridGeom& g) {
  numkit::LogSumExpAcc acc;
  for_each_node(g, [&](int i, int j, const Vec& x) {
    acc.add(-f.value(x) + std::log(g.weight(i, j)));
  });
  return acc.value() + g.log_cellvol;
}

// Tail estimate: mass on the outermost node layer, extrapolated by the decay
// ratio against the next layer in.
double edge_defect(double edge, double inner) {
  if (edge <= 0.0) return 0.0;
  if (inner <= 0.0 || edge >= inner) return 1.0;  // no decay: cannot bound
  const double q = edge / inner;
  return edge * q / (1.0 - q);
}

}  // namespace

double log_partition(const PotentialOracle& f, const QuadratureGrid& grid) {
  if (grid.d != f.dim) throw DomainError("log_partition: dimension mismatch");
  return log_partition_impl(f, GridGeom(grid));
}

TvResult tv_quadrature(const PotentialOracle& f1, const PotentialOracle& f2,
                       const QuadratureGrid& grid) {
  if (grid.d > 2) throw DomainError("tv_quadrature: d <= 2 only");
  if (f1.dim != grid.d || f2.dim != grid.d) {
    throw DomainError("tv_quadrature: dimension mismatch");
  }
  const GridGeom g(grid);
  const double lz1 = log_partition_impl(f1, g);
  const double lz2 = log_partition_impl(f2, g);
  double tv = 0.0;
  double edge1 = 0.0, ring1_1 = 0.0, edge2 = 0.0, ring1_2 = 0.0;
  for_each_node(g, [&](int i, int j, const Vec& x) {
    const double w = g.weight(i, j) * std::exp(g.log_cellvol);
    const double p1 = std::exp(-f1.value(x) - lz1) * w;
    const double p2 = std::exp(-f2.value(x) - lz2) * w;
    tv += std::abs(p1 - p2);
    const int r = g.ring(i, j);
    if (r == 0) {
      edge1 += p1;
      edge2 += p2;
    } else if (r == 1) {
      ring1_1 += p1;
      ring1_2 += p2;
    }
  });
  TvResult res;
  res.tv = 0.5 * tv;
  res.mass_defect =
      std::max(edge_defect(edge1, ring1_1), edge_defect(edge2, ring1_2));
  res.method = "quadrature";
  if (res.mass_defect > 1e-3) {
    throw GridRangeError("tv_quadrature: grid too small, tail defect " +
                         std::to_string(res.mass_defect));
  }
  return res;
}

double second_moment_quadrature(const PotentialOracle& f,
                                const QuadratureGrid& grid) {
  if (grid.d != f.dim) throw DomainError("second_moment: dimension mismatch");
  const GridGeom g(grid);
  const double lz = log_partition_impl(f, g);
  double m2 = 0.0;
  for_each_node(g, [&](int i, int j, const Vec& x) {
    m2 += x.squaredNorm() * g.weight(i, j) * std::exp(-f.value(x) - lz);
  });
  return m2 * std::exp(g.log_cellvol);
}

namespace {

double iqr(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto q = [&](double p) {
    const double idx = p * (v.size() - 1);
    const size_t i0 = static_cast<size_t>(idx);
    const size_t i1 = std::min(i0 + 1, v.size() - 1);
    return v[i0] + (idx - i0) * (v[i1] - v[i0]);
  };
  return q(0.75) - q(0.25);
}

}  // namespace

TvResult tv_histogram(const std::vector<Vec>& samples,
                      const PotentialOracle& density, HistOptions opts) {
  if (samples.size() < 1000) {
    throw DomainError("tv_histogram: need at least 10^3 samples");
  }
  const int d = static_cast<int>(samples.front().size());
  if (d > 2) throw DomainError("tv_histogram: d <= 2 only");
  const double n = static_cast<double>(samples.size());

  Vec lo(d), hi(d);
  std::vector<int> bins_per_axis(d);
  for (int j = 0; j < d; ++j) {
    std::vector<double> coord(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) coord[i] = samples[i](j);
    const auto [mn, mx] = std::minmax_element(coord.begin(), coord.end());
    const double pad = 0.05 * std::max(*mx - *mn, 1e-12);
    lo(j) = opts.lo ? (*opts.lo)(j) : *mn - pad;
    hi(j) = opts.hi ? (*opts.hi)(j) : *mx + pad;
    if (opts.bins > 0) {
      bins_per_axis[j] = opts.bins;
    } else {
      const double width = 2.0 * iqr(coord) * std::pow(n, -1.0 / 3.0);
      int b = width > 0.0
                  ? static_cast<int>(std::ceil((hi(j) - lo(j)) / width))
                  : 64;
      bins_per_axis[j] = std::clamp(b, 8, d == 1 ? 512 : 128);
    }
  }

  const int bx = bins_per_axis[0];
  const int by = d == 2 ? bins_per_axis[1] : 1;
  std::vector<double> emp(static_cast<size_t>(bx) * by, 0.0);
  double emp_out = 0.0;
  for (const Vec& s : samples) {
    int ix = static_cast<int>((s(0) - lo(0)) / (hi(0) - lo(0)) * bx);
    int iy = d == 2 ? static_cast<int>((s(1) - lo(1)) / (hi(1) - lo(1)) * by) : 0;
    if (ix < 0 || ix >= bx || iy < 0 || iy >= by) {
      emp_out += 1.0 / n;
      continue;
    }
    emp[static_cast<size_t>(ix) * by + iy] += 1.0 / n;
  }
  if (emp_out > 0.5) {
    throw GridRangeError("tv_histogram: more than half the samples fall outside the bin range");
  }

  // True bin masses by refined midpoint sums; normalizer over a box enlarged
  // by 50% per side so the defect outside the bins is accounted for.
  const int refine = std::max(1, opts.refine);
  const auto cell_mass = [&](const Vec& cell_lo, const Vec& cell_step) {
    numkit::LogSumExpAcc acc;
    Vec x(d);
    const int rx = refine, ry = d == 2 ? refine : 1;
    for (int a = 0; a < rx; ++a) {
      x(0) = cell_lo(0) + cell_step(0) * (a + 0.5) / rx;
      for (int b = 0; b < ry; ++b) {
        if (d == 2) x(1) = cell_lo(1) + cell_step(1) * (b + 0.5) / ry;
        acc.add(-density.value(x));
      }
    }
    double log_sub = std::log(cell_step(0) / rx);
    if (d == 2) log_sub += std::log(cell_step(1) / ry);
    return acc.value() + log_sub;
  };

  numkit::LogSumExpAcc total_acc;
  std::vector<double> log_true(static_cast<size_t>(bx) * by);
  Vec step(d);
  step(0) = (hi(0) - lo(0)) / bx;
  if (d == 2) step(1) = (hi(1) - lo(1)) / by;
  for (int ix = 0; ix < bx; ++ix) {
    for (int iy = 0; iy < by; ++iy) {
      Vec cl(d);
      cl(0) = lo(0) + step(0) * ix;
      if (d == 2) cl(1) = lo(1) + step(1) * iy;
      const double lm = cell_mass(cl, step);
      log_true[static_cast<size_t>(ix) * by + iy] = lm;
      total_acc.add(lm);
    }
  }
  const double log_in_range = total_acc.value();

  // extend the normalizer outside the histogram range
  numkit::LogSumExpAcc norm_acc = total_acc;
  const int ext_cells = std::max(4, bx / 2);
  const auto extend_axis = [&](int axis) {
    for (int side = 0; side < 2; ++side) {
      for (int k = 0; k < ext_cells; ++k) {
        Vec cl = lo;
        Vec cs = step;
        if (d == 2 && axis == 0) {
          // axis-0 strips take the full enlarged cross extent; axis-1 strips
          // keep the original extent so the corner blocks are counted once
          cs(1) = (hi(1) - lo(1)) + 2.0 * ext_cells * step(1);
          cl(1) = lo(1) - ext_cells * step(1);
        } else if (d == 2) {
          cs(0) = hi(0) - lo(0);
          cl(0) = lo(0);
        }
        cl(axis) = side == 0 ? lo(axis) - (k + 1) * step(axis)
                             : hi(axis) + k * step(axis);
        norm_acc.add(cell_mass(cl, cs));
      }
    }
  };
  extend_axis(0);
  if (d == 2) extend_axis(1);
  const double log_z = norm_acc.value();

  const double true_out = -std::expm1(log_in_range - log_z);  // 1 - in/Z
  double tv = 0.0;
  for (size_t i = 0; i < emp.size(); ++i) {
    tv += std::abs(emp[i] - std::exp(log_true[i] - log_z));
  }
  TvResult res;
  res.tv = 0.5 * (tv + true_out + emp_out);
  res.mass_defect = true_out;
  res.method = "histogram";
  return res;
}

McMoment second_moment_mc(const PotentialOracle& f, const McProposal& prop) {
  if (prop.n < 100) throw DomainError("second_moment_mc: n too small");
  const int d = f.dim;
  RngStream rng(prop.seed, "moment_mc", 0);
  const double log_vball = numkit::log_ball_volume(d, prop.ball_radius);
  const double log_area = numkit::log_sphere_area(d, 1.0);
  const double sig = prop.tail_sigma;

  // proposal log-density: mixture of uniform ball and a radial half-normal
  // shell pushed out from the ball surface
  const auto log_q = [&](double radius) {
    numkit::LogSumExpAcc acc;
    if (radius <= prop.ball_radius) {
      acc.add(std::log(prop.p_ball) - log_vball);
    }
    if (radius > prop.ball_radius) {
      const double s = radius - prop.ball_radius;
      const double log_half_normal = std::log(2.0) -
                                     0.5 * std::log(2.0 * M_PI * sig * sig) -
                                     0.5 * s * s / (sig * sig);
      acc.add(std::log1p(-prop.p_ball) + log_half_normal - log_area -
              (d - 1) * std::log(radius));
    }
    return acc.value();
  };

  double sum_wh = 0.0, sum_w = 0.0, sum_w2 = 0.0;
  double max_logw = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(prop.n), h(prop.n);
  for (int i = 0; i < prop.n; ++i) {
    Vec x;
    if (rng.u01() < prop.p_ball) {
      x = rng.uniform_ball(d, prop.ball_radius);
    } else {
      const double radius = prop.ball_radius + sig * std::abs(rng.normal());
      x = radius * rng.uniform_sphere(d);
    }
    logw[i] = -f.value(x) - log_q(x.norm());
    h[i] = x.squaredNorm();
    max_logw = std::max(max_logw, logw[i]);
  }
  for (int i = 0; i < prop.n; ++i) {
    const double w = std::exp(logw[i] - max_logw);
    sum_w += w;
    sum_wh += w * h[i];
    sum_w2 += w * w;
  }
  McMoment out;
  out.value = sum_wh / sum_w;
  out.ess = sum_w * sum_w / sum_w2;
  if (out.ess < 50.0) {
    throw DegeneracyError("second_moment_mc: effective sample size below 50");
  }
  double var = 0.0;
  for (int i = 0; i < prop.n; ++i) {
    const double w = std::exp(logw[i] - max_logw);
    var += w * w * (h[i] - out.value) * (h[i] - out.value);
  }
  out.stderr_ = std::sqrt(var) / sum_w;
  return out;
}

namespace {

double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

constexpr int kPrimes[8] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

std::vector<Vec> halton_ball(const ProbeRegion& region, int n_points,
                             std::uint64_t seed) {
  const int d = static_cast<int>(region.center.size());
  if (d > 8) throw DomainError("halton_ball: d <= 8");
  std::vector<Vec> pts;
  pts.reserve(n_points);
  std::uint64_t index = 1 + (seed % 65537) * 31;  // seeded sequence offset
  while (static_cast<int>(pts.size()) < n_points) {
    Vec x(d);
    for (int j = 0; j < d; ++j) {
      x(j) = 2.0 * halton(index, kPrimes[j]) - 1.0;
    }
    ++index;
    if (x.norm() <= 1.0) {
      pts.push_back(region.center + region.radius * x);
    }
  }
  return pts;
}

double smoothness_probe(const PotentialOracle& f, const ProbeRegion& region,
                        int n_points, std::uint64_t seed,
                        const std::vector<Vec>& extra_points) {
  std::vector<Vec> pts = halton_ball(region, n_points, seed);
  pts.insert(pts.end(), extra_points.begin(), extra_points.end());
  double worst = 0.0;
  for (const Vec& x : pts) {
    Mat H = f.has_hessian()
                ? f.hess(x)
                : numkit::fd_hessian([&](const Vec& y) { return f.value(y); }, x);
    if (!H.allFinite()) {
      throw NumericError("smoothness_probe: non-finite Hessian entry at probe point");
    }
    H = 0.5 * (H + H.transpose());
    worst = std::max(worst, numkit::opnorm_sym(H, 1e-8));
  }
  return worst;
}

double poincare_comparison_bound(const PotentialOracle& f_pi,
                                 const PotentialOracle& f_gamma, double M,
                                 double eps, int d,
                                 const std::vector<Vec>& probes,
                                 int z_mc_samples, std::uint64_t seed) {
  if (probes.empty()) throw DomainError("poincare_comparison_bound: no probes");
  // Z_pi = E_gamma[exp(f_gamma - f_pi)], bounded weights by construction.
  RngStream rng(seed, "poincare_z", 0);
  const double sigma = std::sqrt(M / (eps * d));
  numkit::LogSumExpAcc z_acc;
  for (int i = 0; i < z_mc_samples; ++i) {
    const Vec x = sigma * rng.normal_vec(d);
    z_acc.add(f_gamma.value(x) - f_pi.value(x));
  }
  const double log_z_pi = z_acc.value() - std::log(static_cast<double>(z_mc_samples));

  double min_lr = std::numeric_limits<double>::infinity();
  double max_lr = -std::numeric_limits<double>::infinity();
  for (const Vec& x : probes) {
    const double lr = f_gamma.value(x) - f_pi.value(x) - log_z_pi;
    min_lr = std::min(min_lr, lr);
    max_lr = std::max(max_lr, lr);
  }
  const double c_gamma = 2.0 * d * eps / M;
  return c_gamma * std::exp(min_lr - 2.0 * max_lr);
}

}  // namespace nlcs::metrics
