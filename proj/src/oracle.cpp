#include "nlcs/oracle.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <utility>

#include "nlcs/numkit.hpp"

namespace nlcs {

namespace {

void check_dim(int expected, const Vec& x, const char* what) {
  if (static_cast<int>(x.size()) != expected) {
    throw DomainError(std::string(what) + ": dimension mismatch");
  }
}

// log(e^x + e^{-x}) without overflow.
double log_2cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a));
}

struct GaussianCore {
  Vec mean;
  Eigen::LLT<Mat> llt;
  Mat precision;
  double log_norm;  // log((2 pi)^d |Sigma|) / 2

  GaussianCore(const Vec& u, const Mat& sigma) : mean(u) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != u.size()) {
      throw DomainError("gaussian: covariance/mean dimension mismatch");
    }
    const double sym =
        (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (sym > 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
      throw DomainError("gaussian: covariance is not symmetric");
    }
    llt.compute(sigma);
    if (llt.info() != Eigen::Success) {
      throw NumericError("gaussian: covariance factorization failed (not PD)");
    }
    const int d = static_cast<int>(u.size());
    precision = llt.solve(Mat::Identity(d, d));
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += std::log(llt.matrixL()(i, i));
    logdet *= 2.0;
    log_norm = 0.5 * (d * std::log(2.0 * M_PI) + logdet);
  }

  double potential(const Vec& x) const {
    const Vec delta = x - mean;
    return 0.5 * delta.dot(llt.solve(delta)) + log_norm;
  }

  Vec grad(const Vec& x) const { return llt.solve(x - mean); }
};

}  // namespace

double PotentialOracle::value(const Vec& x) const {
  check_dim(dim, x, "oracle value");
  return value_fn(x);
}

Vec PotentialOracle::grad(const Vec& x) const {
  check_dim(dim, x, "oracle grad");
  return grad_fn(x);
}

Mat PotentialOracle::hess(const Vec& x) const {
  check_dim(dim, x, "oracle hess");
  if (!hess_fn) {
    throw CapabilityError("oracle '" + kind + "' does not expose a Hessian");
  }
  return hess_fn(x);
}

PotentialOracle counted(const PotentialOracle& oracle,
                        std::shared_ptr<QueryLedger> ledger) {
  PotentialOracle wrapped;
  wrapped.dim = oracle.dim;
  wrapped.kind = oracle.kind + "/counted";
  wrapped.value_fn = [inner = oracle.value_fn, ledger](const Vec& x) {
    ++ledger->value_queries;
    return inner(x);
  };
  wrapped.grad_fn = [inner = oracle.grad_fn, ledger](const Vec& x) {
    ++ledger->grad_queries;
    return inner(x);
  };
  return wrapped;
}

int MixtureSpec::dim() const {
  return means.empty() ? 0 : static_cast<int>(means.front().size());
}

void MixtureSpec::validate() const {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != covs.size()) {
    throw DomainError("mixture: weights/means/covs size mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DomainError("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("mixture: weights must sum to 1 within 1e-12");
  }
  const int d = dim();
  for (const Vec& u : means) {
    if (static_cast<int>(u.size()) != d) {
      throw DomainError("mixture: inconsistent mean dimension");
    }
  }
  for (const Mat& c : covs) {
    if (c.rows() != d || c.cols() != d) {
      throw DomainError("mixture: inconsistent covariance dimension");
    }
    Eigen::LLT<Mat> llt(c);
    if (llt.info() != Eigen::Success) {
      throw DomainError("mixture: covariance is not positive definite");
    }
  }
}

PotentialOracle make_gaussian(const Vec& u, const Mat& sigma) {
  auto core = std::make_shared<GaussianCore>(u, sigma);
  PotentialOracle o;
  o.dim = static_cast<int>(u.size());
  o.kind = "gaussian";
  o.value_fn = [core](const Vec& x) { return core->potential(x); };
  o.grad_fn = [core](const Vec& x) { return core->grad(x); };
  o.hess_fn = [core](const Vec&) { return core->precision; };
  return o;
}

PotentialOracle make_mixture(const MixtureSpec& spec) {
  spec.validate();
  struct State {
    std::vector<GaussianCore> cores;
    std::vector<double> log_w;
    int d = 0;

    // responsibilities r_i ∝ w_i exp(-f_i(x)) and the mixture potential
    double responsibilities(const Vec& x, std::vector<double>& r) const {
      const int m = static_cast<int>(cores.size());
      r.resize(m);
      numkit::LogSumExpAcc acc;
      for (int i = 0; i < m; ++i) {
        r[i] = log_w[i] - cores[i].potential(x);
        acc.add(r[i]);
      }
      const double log_p = acc.value();
      for (int i = 0; i < m; ++i) r[i] = std::exp(r[i] - log_p);
      return -log_p;
    }
  };
  auto st = std::make_shared<State>();
  st->d = spec.dim();
  for (int i = 0; i < spec.components(); ++i) {
    st->cores.emplace_back(spec.means[i], spec.covs[i]);
    st->log_w.push_back(std::log(spec.weights[i]));
  }
  PotentialOracle o;
  o.dim = st->d;
  o.kind = spec.components() == 1 ? "gaussian" : "mixture";
  o.value_fn = [st](const Vec& x) {
    numkit::LogSumExpAcc acc;
    for (size_t i = 0; i < st->cores.size(); ++i) {
      acc.add(st->log_w[i] - st->cores[i].potential(x));
    }
    return -acc.value();
  };
  o.grad_fn = [st](const Vec& x) {
    std::vector<double> r;
    st->responsibilities(x, r);
    Vec g = Vec::Zero(st->d);
    for (size_t i = 0; i < st->cores.size(); ++i) {
      if (r[i] > 0.0) g += r[i] * st->cores[i].grad(x);
    }
    return g;
  };
  o.hess_fn = [st](const Vec& x) {
    const int m = static_cast<int>(st->cores.size());
    std::vector<double> r;
    st->responsibilities(x, r);
    std::vector<Vec> grads(m);
    for (int i = 0; i < m; ++i) grads[i] = st->cores[i].grad(x);
    Mat h = Mat::Zero(st->d, st->d);
    for (int i = 0; i < m; ++i) {
      if (r[i] > 0.0) h += r[i] * st->cores[i].precision;
    }
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const double rij = r[i] * r[j];
        if (rij == 0.0) continue;
        const Vec diff = grads[i] - grads[j];
        h -= rij * (diff * diff.transpose());
      }
    }
    return h;
  };
  return o;
}

PotentialOracle make_hs_mixture(const Mat& J, const Vec& h) {
  const int d = static_cast<int>(h.size());
  if (J.rows() != d || J.cols() != d) {
    throw DomainError("hs_mixture: J/h dimension mismatch");
  }
  Eigen::LLT<Mat> llt(J);
  if (llt.info() != Eigen::Success) {
    throw NumericError("hs_mixture: J factorization failed (not PD)");
  }
  struct State {
    Mat j_inv;
    Vec j_inv_h;
    int d;
  };
  auto st = std::make_shared<State>();
  st->d = d;
  st->j_inv = llt.solve(Mat::Identity(d, d));
  st->j_inv_h = llt.solve(h);
  PotentialOracle o;
  o.dim = d;
  o.kind = "hs";
  o.value_fn = [st](const Vec& x) {
    double v = 0.5 * x.dot(st->j_inv * x) - st->j_inv_h.dot(x);
    for (int i = 0; i < st->d; ++i) v -= log_2cosh(x(i));
    return v;
  };
  o.grad_fn = [st](const Vec& x) {
    Vec g = st->j_inv * x - st->j_inv_h;
    for (int i = 0; i < st->d; ++i) g(i) -= std::tanh(x(i));
    return g;
  };
  o.hess_fn = [st](const Vec& x) {
    Mat h2 = st->j_inv;
    for (int i = 0; i < st->d; ++i) {
      const double t = std::tanh(x(i));
      h2(i, i) -= 1.0 - t * t;
    }
    return h2;
  };
  return o;
}

PotentialOracle scale_potential(const PotentialOracle& oracle, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw DomainError("scale_potential: L must be positive");
  }
  const double s = std::sqrt(L);
  PotentialOracle o;
  o.dim = oracle.dim;
  o.kind = oracle.kind + "/scaled";
  o.value_fn = [inner = oracle.value_fn, s](const Vec& x) {
    return inner(x / s);
  };
  o.grad_fn = [inner = oracle.grad_fn, s](const Vec& x) {
    return Vec(inner(x / s) / s);
  };
  if (oracle.hess_fn) {
    o.hess_fn = [inner = oracle.hess_fn, s, L](const Vec& x) {
      return Mat(inner(x / s) / L);
    };
  }
  return o;
}

MixtureSpec hs_mixture_components(const Mat& J, const Vec& h) {
  const int d = static_cast<int>(h.size());
  if (d > 20) throw DomainError("hs_mixture_components: 2^d blowup, d too large");
  const std::uint64_t m = 1ULL << d;
  std::vector<double> log_w(m);
  numkit::LogSumExpAcc acc;
  MixtureSpec spec;
  for (std::uint64_t mask = 0; mask < m; ++mask) {
    Vec sigma(d);
    for (int i = 0; i < d; ++i) sigma(i) = (mask >> i) & 1 ? 1.0 : -1.0;
    spec.means.push_back(h + J * sigma);
    spec.covs.push_back(J);
    log_w[mask] = sigma.dot(h) + 0.5 * sigma.dot(J * sigma);
    acc.add(log_w[mask]);
  }
  const double log_total = acc.value();
  for (std::uint64_t mask = 0; mask < m; ++mask) {
    spec.weights.push_back(std::exp(log_w[mask] - log_total));
  }
  // renormalize the tiny rounding residue
  double total = 0.0;
  for (double w : spec.weights) total += w;
  for (double& w : spec.weights) w /= total;
  spec.validate();
  return spec;
}

}  // namespace nlcs
