#include "nlcs/spec_io.hpp"

#include <cmath>

#include "nlcs/numkit.hpp"
#include "nlcs/rng.hpp"
#include "nlcs/sampler.hpp"

namespace nlcs {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name, const std::string& path) {
  if (!j.is_object() || !j.contains(name)) {
    throw SpecError("missing field '" + path + "'", path);
  }
  return j.at(name);
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw SpecError("'" + path + "' must be a number", path);
  return j.get<double>();
}

int int_at(const json& j, const std::string& path) {
  if (!j.is_number_integer()) {
    throw SpecError("'" + path + "' must be an integer", path);
  }
  return j.get<int>();
}

Vec vec_at(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw SpecError("'" + path + "' must be a nonempty array", path);
  }
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v(i) = number_at(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Mat mat_at(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw SpecError("'" + path + "' must be a nonempty array of rows", path);
  }
  const size_t rows = j.size();
  const Vec first = vec_at(j[0], path + "[0]");
  Mat m(rows, first.size());
  m.row(0) = first;
  for (size_t i = 1; i < rows; ++i) {
    const Vec row = vec_at(j[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != first.size()) {
      throw SpecError("'" + path + "' rows have inconsistent length", path);
    }
    m.row(i) = row;
  }
  return m;
}

}  // namespace

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_to_json(m.row(i)));
  return a;
}

InstanceSpec parse_instance_spec(const json& j) {
  InstanceSpec spec;
  const json& kind = field(j, "kind", "kind");
  if (!kind.is_string()) throw SpecError("'kind' must be a string", "kind");
  spec.kind = kind.get<std::string>();
  static const char* kinds[] = {"gaussian", "mixture", "hs",  "stitched",
                                "lb_base",  "lb_perturbed", "opt"};
  bool known = false;
  for (const char* k : kinds) known = known || spec.kind == k;
  if (!known) throw SpecError("unknown instance kind '" + spec.kind + "'", "kind");
  spec.params = field(j, "params", "params");
  if (!spec.params.is_object()) {
    throw SpecError("'params' must be an object", "params");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer()) {
      throw SpecError("'seed' must be an integer", "seed");
    }
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  return spec;
}

json instance_spec_to_json(const InstanceSpec& spec) {
  return json{{"kind", spec.kind}, {"params", spec.params}, {"seed", spec.seed}};
}

namespace {

void rethrow_domain_as_spec(const DomainError& e, const std::string& path) {
  throw SpecError(std::string(e.what()), path);
}

BuiltInstance build_gaussian(const InstanceSpec& spec) {
  const Vec mean = vec_at(field(spec.params, "mean", "params.mean"), "params.mean");
  const Mat cov = mat_at(field(spec.params, "cov", "params.cov"), "params.cov");
  BuiltInstance b;
  b.spec = spec;
  MixtureSpec mix;
  mix.weights = {1.0};
  mix.means = {mean};
  mix.covs = {cov};
  try {
    mix.validate();
    b.oracle = make_gaussian(mean, cov);
  } catch (const DomainError& e) {
    rethrow_domain_as_spec(e, "params.cov");
  }
  b.mixture = mix;
  b.derived = json{{"d", mean.size()}};
  return b;
}

BuiltInstance build_mixture(const InstanceSpec& spec) {
  MixtureSpec mix;
  const json& jw = field(spec.params, "weights", "params.weights");
  const json& jm = field(spec.params, "means", "params.means");
  const json& jc = field(spec.params, "covs", "params.covs");
  if (!jw.is_array() || !jm.is_array() || !jc.is_array()) {
    throw SpecError("mixture params must be arrays", "params");
  }
  for (size_t i = 0; i < jw.size(); ++i) {
    mix.weights.push_back(number_at(jw[i], "params.weights[" + std::to_string(i) + "]"));
  }
  for (size_t i = 0; i < jm.size(); ++i) {
    mix.means.push_back(vec_at(jm[i], "params.means[" + std::to_string(i) + "]"));
  }
  for (size_t i = 0; i < jc.size(); ++i) {
    mix.covs.push_back(mat_at(jc[i], "params.covs[" + std::to_string(i) + "]"));
  }
  BuiltInstance b;
  b.spec = spec;
  try {
    mix.validate();
    b.oracle = make_mixture(mix);
  } catch (const DomainError& e) {
    rethrow_domain_as_spec(e, "params");
  }
  b.mixture = mix;
  b.derived = json{{"d", mix.dim()}, {"components", mix.components()}};
  return b;
}

BuiltInstance build_hs(const InstanceSpec& spec) {
  const Mat J = mat_at(field(spec.params, "J", "params.J"), "params.J");
  const Vec h = vec_at(field(spec.params, "h", "params.h"), "params.h");
  BuiltInstance b;
  b.spec = spec;
  try {
    b.oracle = make_hs_mixture(J, h);
  } catch (const Error& e) {
    throw SpecError(std::string(e.what()), "params.J");
  }
  b.hs = std::make_pair(J, h);
  const auto [lo, hi] = numkit::eig_range_sym(J);
  b.derived = json{{"d", h.size()},
                   {"J_eig_min", lo},
                   {"J_eig_max", hi},
                   {"delta", std::min(lo, 1.0 - hi)}};
  return b;
}

BuiltInstance build_stitched_inst(const InstanceSpec& spec) {
  const Vec u = vec_at(field(spec.params, "u", "params.u"), "params.u");
  BuiltInstance b;
  b.spec = spec;
  try {
    b.oracle = build_stitched(u);
  } catch (const DomainError& e) {
    rethrow_domain_as_spec(e, "params.u");
  }
  b.stitched_u = u;
  b.derived = json{{"d", u.size()}, {"u_norm_sq", u.squaredNorm()}};
  return b;
}

LowerBoundParams lb_params_from(const InstanceSpec& spec) {
  const int d = int_at(field(spec.params, "d", "params.d"), "params.d");
  const double L = number_at(field(spec.params, "L", "params.L"), "params.L");
  const double M = number_at(field(spec.params, "M", "params.M"), "params.M");
  const double eps =
      number_at(field(spec.params, "eps", "params.eps"), "params.eps");
  try {
    return LowerBoundParams::create(d, L, M, eps);
  } catch (const DomainError& e) {
    throw SpecError(std::string(e.what()), "params.eps");
  }
}

json lb_derived(const LowerBoundParams& p) {
  const GridSpec grid = GridSpec::create(p.d, p.L, p.M, p.eps);
  return json{{"R", p.R},   {"r1", p.r1}, {"r2", p.r2},
              {"h1", p.h1}, {"ell", grid.ell}};
}

BuiltInstance build_lb_base(const InstanceSpec& spec) {
  const LowerBoundParams p = lb_params_from(spec);
  BaseInstance base = build_base(p);
  BuiltInstance b;
  b.spec = spec;
  b.oracle = base.potential;
  b.lb = p;
  b.derived = lb_derived(p);
  return b;
}

BuiltInstance build_lb_perturbed(const InstanceSpec& spec) {
  const LowerBoundParams p = lb_params_from(spec);
  BaseInstance base = build_base(p);
  Vec v;
  if (spec.params.contains("v")) {
    v = vec_at(spec.params.at("v"), "params.v");
    if (static_cast<int>(v.size()) != p.d) {
      throw SpecError("'params.v' dimension mismatch", "params.v");
    }
  } else {
    RngStream rng(spec.seed, "lb_center", 0);
    v = 0.75 * p.R * rng.uniform_sphere(p.d);
  }
  double gamma;
  if (spec.params.contains("gamma")) {
    gamma = number_at(spec.params.at("gamma"), "params.gamma");
  } else {
    gamma = solve_gamma(base, v, 1e-8);
  }
  BuiltInstance b;
  b.spec = spec;
  try {
    PerturbedInstance pert = build_perturbed(base, v, gamma);
    b.oracle = pert.potential;
    b.derived = lb_derived(p);
    b.derived["gamma"] = gamma;
    b.derived["h2"] = pert.h2;
    b.derived["v"] = vec_to_json(v);
  } catch (const DomainError& e) {
    rethrow_domain_as_spec(e, "params.v");
  }
  b.lb = p;
  return b;
}

BuiltInstance build_opt_inst(const InstanceSpec& spec) {
  const int d = int_at(field(spec.params, "d", "params.d"), "params.d");
  const double L = number_at(field(spec.params, "L", "params.L"), "params.L");
  const double m = number_at(field(spec.params, "m", "params.m"), "params.m");
  const double R = number_at(field(spec.params, "R", "params.R"), "params.R");
  const double eps =
      number_at(field(spec.params, "eps", "params.eps"), "params.eps");
  Vec center = Vec::Zero(d);
  if (spec.params.contains("center")) {
    center = vec_at(spec.params.at("center"), "params.center");
    if (static_cast<int>(center.size()) != d) {
      throw SpecError("'params.center' dimension mismatch", "params.center");
    }
  }
  BuiltInstance b;
  b.spec = spec;
  try {
    OptInstance inst = build_opt_instance(center, L, m, R, eps);
    b.oracle = inst.potential;
    b.opt = std::move(inst);
  } catch (const DomainError& e) {
    rethrow_domain_as_spec(e, "params");
  }
  b.derived = json{{"d", d},
                   {"r", b.opt->r},
                   {"lattice_centers",
                    pack_opt_centers(R, b.opt->r, d).size()}};
  return b;
}

}  // namespace

BuiltInstance build_instance(const InstanceSpec& spec) {
  if (spec.kind == "gaussian") return build_gaussian(spec);
  if (spec.kind == "mixture") return build_mixture(spec);
  if (spec.kind == "hs") return build_hs(spec);
  if (spec.kind == "stitched") return build_stitched_inst(spec);
  if (spec.kind == "lb_base") return build_lb_base(spec);
  if (spec.kind == "lb_perturbed") return build_lb_perturbed(spec);
  if (spec.kind == "opt") return build_opt_inst(spec);
  throw SpecError("unknown instance kind '" + spec.kind + "'", "kind");
}

}  // namespace nlcs
