#include "nlcs/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nlcs/metrics.hpp"
#include "nlcs/numkit.hpp"
#include "nlcs/oudiag.hpp"
#include "nlcs/rng.hpp"
#include "nlcs/sampler.hpp"
#include "nlcs/spec_io.hpp"

namespace nlcs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'", path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SpecError("invalid JSON in '" + path + "': " + e.what(), path);
  }
  return j;
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

std::string samples_csv(const std::vector<Vec>& samples) {
  std::string csv;
  if (samples.empty()) return csv;
  const int d = static_cast<int>(samples.front().size());
  for (int j = 0; j < d; ++j) {
    csv += (j ? ",x" : "x") + std::to_string(j);
  }
  csv += "\n";
  for (const Vec& s : samples) {
    for (int j = 0; j < d; ++j) {
      if (j) csv += ",";
      csv += fmt_double(s(j));
    }
    csv += "\n";
  }
  return csv;
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, json config, json spec)
      : start_(std::chrono::steady_clock::now()) {
    manifest_["command"] = std::move(command);
    manifest_["config"] = std::move(config);
    manifest_["spec"] = std::move(spec);
    manifest_["versions"] = json{{"nlcs", kVersion}};
    manifest_["outputs"] = json::array();
  }

  void add_output(const fs::path& path) {
    char hex[19];
    std::snprintf(hex, sizeof(hex), "0x%016" PRIx64, fnv1a64_file(path.string()));
    manifest_["outputs"].push_back(
        json{{"path", path.filename().string()}, {"fnv64", hex}});
  }

  void write(const fs::path& dir) {
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start_)
                             .count();
    manifest_["wall_time_s"] = elapsed;
    write_text_file(dir / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  json manifest_;
  std::chrono::steady_clock::time_point start_;
};

int map_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  if (dynamic_cast<const SpecError*>(&e)) return kExitInput;
  if (dynamic_cast<const BudgetError*>(&e)) return kExitBudget;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const DomainError*>(&e)) return kExitInput;
  return 1;
}

}  // namespace

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("fnv1a64: cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ULL;
    }
  }
  return h;
}

void validate_manifest(const std::string& manifest_path) {
  const json m = load_json_file(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const auto& out : m.at("outputs")) {
    const fs::path p = dir / out.at("path").get<std::string>();
    if (!fs::exists(p)) {
      throw Error("manifest output missing: " + p.string());
    }
    char hex[19];
    std::snprintf(hex, sizeof(hex), "0x%016" PRIx64, fnv1a64_file(p.string()));
    if (out.at("fnv64").get<std::string>() != hex) {
      throw Error("manifest hash mismatch for " + p.string());
    }
  }
}

int run_gen(const GenArgs& args) {
  try {
    json spec_json;
    if (!args.spec_path.empty()) {
      spec_json = load_json_file(args.spec_path);
    } else if (!args.inline_spec.empty()) {
      try {
        spec_json = json::parse(args.inline_spec);
      } catch (const json::parse_error& e) {
        throw SpecError(std::string("invalid inline spec: ") + e.what(), "spec");
      }
    } else {
      throw SpecError("gen: either --spec or inline parameters required", "spec");
    }
    const InstanceSpec spec = parse_instance_spec(spec_json);
    const BuiltInstance built = build_instance(spec);
    json out;
    out["spec"] = instance_spec_to_json(built.spec);
    out["derived"] = built.derived;
    ManifestWriter manifest("gen", json{{"spec_path", args.spec_path}},
                            out["spec"]);
    const fs::path dir(args.out_dir);
    write_text_file(dir / "instance.json", out.dump(2) + "\n");
    manifest.add_output(dir / "instance.json");
    manifest.write(dir);
    std::cout << "wrote " << (dir / "instance.json").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return map_error(e);
  }
}

namespace {

InstanceSpec spec_from_instance_file(const json& j) {
  // accept both bare specs and gen outputs ({spec: ..., derived: ...})
  return parse_instance_spec(j.contains("spec") ? j.at("spec") : j);
}

}  // namespace

int run_sample(const SampleArgs& args) {
  try {
    const InstanceSpec spec =
        spec_from_instance_file(load_json_file(args.spec_path));
    const BuiltInstance built = build_instance(spec);
    if (!(args.L > 0.0) || !(args.M > 0.0) || !(args.eps > 0.0 && args.eps < 1.0)) {
      throw SpecError("sample: requires L > 0, M > 0, eps in (0,1)", "eps");
    }
    SamplerOverrides ov;
    ov.N = args.N;
    ov.h = args.h;
    ov.K0 = args.K0;
    ov.L_pi = args.L_pi;
    ov.seed = args.seed;
    ov.threads = args.threads;
    ov.grid_budget = args.budget;
    SampleRun run = sample_nonlogconcave(built.oracle, args.L, args.M, args.eps,
                                         args.n, ov);

    const fs::path dir(args.out_dir);
    json config{{"L", args.L},       {"M", args.M},   {"eps", args.eps},
                {"n", args.n},       {"seed", args.seed},
                {"threads", args.threads}, {"budget", args.budget}};
    if (args.N) config["N"] = *args.N;
    if (args.h) config["h"] = *args.h;
    ManifestWriter manifest("sample", config, instance_spec_to_json(spec));

    write_text_file(dir / "samples.csv", samples_csv(run.samples));

    json report{{"f_hat_star", run.report.f_hat_star},
                {"log_Z_hat", run.report.log_Z_hat},
                {"h1", run.report.h1},
                {"h2", run.report.h2},
                {"L_pi", run.report.L_pi},
                {"K0", run.report.K0},
                {"N", run.report.N},
                {"h", run.report.h},
                {"queries",
                 json{{"value", run.report.value_queries},
                      {"grad", run.report.grad_queries}}},
                {"samples_path", "samples.csv"},
                {"cubes_visited", run.report.cubes_visited},
                {"L_pi_formula", run.report.L_pi_formula},
                {"N_formula", run.report.N_formula},
                {"poincare_lower", run.report.poincare_lower}};
    if (built.oracle.dim <= 2 && run.samples.size() >= 1000) {
      report["tv_estimate"] =
          metrics::tv_histogram(run.samples, built.oracle).tv;
    }
    write_text_file(dir / "report.json", report.dump(2) + "\n");
    manifest.add_output(dir / "samples.csv");
    manifest.add_output(dir / "report.json");
    manifest.write(dir);
    std::cout << "sampled " << run.samples.size() << " points, queries "
              << run.report.value_queries << "+" << run.report.grad_queries
              << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return map_error(e);
  }
}

namespace {

struct SweepRow {
  double t;
  double opnorm;
  std::string method;
  double mc_stderr;
  double bound;
};

SweepRow oudiag_row_mixture(const MixtureSpec& spec, const oudiag::OuTime& t,
                            const std::string& method, int mc_samples,
                            std::uint64_t seed) {
  const MixtureSpec evolved = oudiag::evolve_mixture(spec, t);
  // worst separation pair fixes the probe point and the Table-1 bound column
  double sep = 0.0;
  Vec mid = evolved.means.front();
  for (int i = 0; i < spec.components(); ++i) {
    for (int j = i + 1; j < spec.components(); ++j) {
      const double s = (spec.means[i] - spec.means[j]).squaredNorm();
      if (s > sep) {
        sep = s;
        mid = 0.5 * (evolved.means[i] + evolved.means[j]);
      }
    }
  }
  SweepRow row;
  row.t = t.t;
  row.bound = std::max(1.0, t.shrink * t.shrink * sep);
  row.mc_stderr = 0.0;
  if (method == "closed-form") {
    row.opnorm = numkit::opnorm_sym(oudiag::mixture_log_hessian(evolved, mid));
    row.method = method;
  } else if (method == "finite-difference") {
    const PotentialOracle pot = make_mixture(evolved);
    row.opnorm = numkit::opnorm_sym(numkit::fd_hessian(
        [&](const Vec& y) { return pot.value(y); }, mid));
    row.method = method;
  } else if (method == "covariance-identity") {
    if (t.var <= 1e-8) {
      throw SpecError("covariance-identity method needs t > 0", "t");
    }
    const auto probe = oudiag::score_hessian_via_cov(make_mixture(spec), t, mid,
                                                     mc_samples, seed);
    row.opnorm = probe.opnorm;
    row.mc_stderr = probe.mc_stderr.value_or(0.0);
    row.method = probe.method;
  } else {
    throw SpecError("unknown method '" + method + "'", "method");
  }
  return row;
}

}  // namespace

int run_oudiag(const OudiagArgs& args) {
  try {
    const InstanceSpec spec =
        spec_from_instance_file(load_json_file(args.spec_path));
    const BuiltInstance built = build_instance(spec);
    if (args.t_list.empty()) {
      throw SpecError("oudiag: at least one t value required", "t");
    }
    std::vector<SweepRow> rows;
    for (double t_raw : args.t_list) {
      const auto t = oudiag::OuTime::from_t(t_raw);
      if (built.mixture) {
        const std::string method =
            args.method == "auto" ? "closed-form" : args.method;
        rows.push_back(oudiag_row_mixture(*built.mixture, t, method,
                                          args.mc_samples, args.seed));
      } else if (built.stitched_u) {
        const std::string method =
            args.method == "auto" ? "covariance-identity" : args.method;
        if (method != "covariance-identity") {
          throw SpecError("stitched instances support only the covariance-identity method",
                          "method");
        }
        SweepRow row;
        row.t = t.t;
        const double e2t = t.shrink * t.shrink;
        row.bound = std::max(e2t * built.stitched_u->squaredNorm() - 1.0, 0.0);
        if (t.var <= 1e-8) {
          // t = 0: the initial potential is analytic
          row.method = "closed-form";
          row.mc_stderr = 0.0;
          row.opnorm = numkit::opnorm_sym(
              built.oracle.hess(Vec(0.5 * t.shrink * *built.stitched_u)));
        } else {
          const auto probe = oudiag::score_hessian_via_cov(
              built.oracle, t, Vec(0.5 * t.shrink * *built.stitched_u),
              args.mc_samples, args.seed);
          row.opnorm = probe.opnorm;
          row.mc_stderr = probe.mc_stderr.value_or(0.0);
          row.method = probe.method;
        }
        rows.push_back(row);
      } else if (built.hs) {
        const auto& [J, h] = *built.hs;
        const double delta = built.derived.at("delta").get<double>();
        const auto [lo, hi] = oudiag::hs_evolution_bounds(J, h, t, delta);
        SweepRow row;
        row.t = t.t;
        row.bound = hi;
        row.mc_stderr = 0.0;
        const int d = static_cast<int>(h.size());
        if (d <= 10) {
          const MixtureSpec comps = hs_mixture_components(J, h);
          const MixtureSpec evolved = oudiag::evolve_mixture(comps, t);
          double worst = 0.0;
          RngStream rng(args.seed, "oudiag_hs", 0);
          for (int k = 0; k < 20; ++k) {
            const Vec x = rng.normal_vec(d);
            worst = std::max(worst, numkit::opnorm_sym(
                                        oudiag::mixture_log_hessian(evolved, x)));
          }
          row.opnorm = worst;
          row.method = "closed-form";
        } else {
          if (t.var <= 1e-8) {
            row.opnorm = numkit::opnorm_sym(built.oracle.hess(Vec::Zero(d)));
            row.method = "closed-form";
          } else {
            const auto probe = oudiag::score_hessian_via_cov(
                built.oracle, t, Vec::Zero(d), args.mc_samples, args.seed);
            row.opnorm = probe.opnorm;
            row.mc_stderr = probe.mc_stderr.value_or(0.0);
            row.method = probe.method;
          }
        }
        rows.push_back(row);
      } else {
        throw SpecError("oudiag supports mixture, stitched and hs instances",
                        "kind");
      }
    }

    std::string csv = "t,opnorm,method,mc_stderr,bound\n";
    for (const SweepRow& r : rows) {
      csv += fmt_double(r.t) + "," + fmt_double(r.opnorm) + "," + r.method +
             "," + fmt_double(r.mc_stderr) + "," + fmt_double(r.bound) + "\n";
    }
    const fs::path dir(args.out_dir);
    ManifestWriter manifest(
        "oudiag",
        json{{"method", args.method}, {"mc_samples", args.mc_samples},
             {"seed", args.seed}},
        instance_spec_to_json(spec));
    write_text_file(dir / "sweep.csv", csv);
    manifest.add_output(dir / "sweep.csv");
    manifest.write(dir);
    std::cout << "wrote " << (dir / "sweep.csv").string() << " (" << rows.size()
              << " rows)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return map_error(e);
  }
}

namespace {

struct BenchRow {
  std::string instance;
  std::string algo;
  std::uint64_t value_q = 0;
  std::uint64_t grad_q = 0;
  int success = 0;
};

// Deterministic lattice sweep of pitch r over B_{R/2}, counting value queries
// until a point with f < -eps/2 is found. That threshold only holds inside
// the planted bump, so the count measures how long the bump stays hidden.
BenchRow bench_grid_search(const std::string& name, const OptInstance& inst) {
  auto ledger = std::make_shared<QueryLedger>();
  const PotentialOracle f = counted(inst.potential, ledger);
  const int d = f.dim;
  const double pitch = inst.r;
  const double reach = 0.5 * inst.R;
  const int k_max = static_cast<int>(std::floor(reach / pitch));
  BenchRow row{name, "grid_search", 0, 0, 0};
  std::vector<int> k(d, -k_max);
  Vec x(d);
  while (true) {
    for (int j = 0; j < d; ++j) x(j) = pitch * k[j];
    if (x.norm() <= reach) {
      if (f.value(x) < -0.5 * inst.eps) {
        row.success = 1;
        break;
      }
    }
    int j = d - 1;
    while (j >= 0 && k[j] == k_max) {
      k[j] = -k_max;
      --j;
    }
    if (j < 0) break;
    ++k[j];
  }
  row.value_q = ledger->value_queries;
  row.grad_q = ledger->grad_queries;
  return row;
}

// The sampling side needs no bump search: a short averaged-LMC run on the
// instance potential draws from the target directly.
BenchRow bench_sampler(const std::string& name, const OptInstance& inst,
                       std::uint64_t seed, std::int64_t steps,
                       std::optional<double> step_size) {
  LmcConfig cfg;
  cfg.N = steps;
  cfg.h = step_size.value_or(0.25 / inst.L);
  cfg.L_pi = inst.L;
  cfg.K0 = 1.0;
  cfg.seed = seed;
  cfg.n_samples = 1;
  cfg.divergence_radius = 1e6 * inst.R;
  const LmcResult res = lmc_run(inst.potential, cfg);
  BenchRow row{name, "sampler", res.ledger.value_queries,
               res.ledger.grad_queries, 0};
  row.success = res.samples.front().allFinite() ? 1 : 0;
  return row;
}

}  // namespace

int run_bench(const BenchArgs& args) {
  try {
    if (args.algo != "sampler" && args.algo != "grid_search") {
      throw SpecError("bench: algo must be 'sampler' or 'grid_search'", "algo");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(args.instances_dir)) {
      if (entry.path().extension() == ".json" &&
          entry.path().filename() != "manifest.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw SpecError("bench: no instance files in " + args.instances_dir,
                      "instances_dir");
    }
    std::vector<BenchRow> rows;
    for (const fs::path& file : files) {
      const InstanceSpec spec =
          spec_from_instance_file(load_json_file(file.string()));
      const BuiltInstance built = build_instance(spec);
      if (!built.opt) {
        throw SpecError("bench: instance '" + file.string() + "' is not an opt instance",
                        "kind");
      }
      const std::string name = file.stem().string();
      rows.push_back(args.algo == "grid_search"
                         ? bench_grid_search(name, *built.opt)
                         : bench_sampler(name, *built.opt, args.seed,
                                         args.lmc_steps, args.lmc_step_size));
    }
    std::string csv = "instance,algo,value_q,grad_q,success\n";
    for (const BenchRow& r : rows) {
      csv += r.instance + "," + r.algo + "," + std::to_string(r.value_q) + "," +
             std::to_string(r.grad_q) + "," + std::to_string(r.success) + "\n";
    }
    const fs::path dir(args.out_dir);
    ManifestWriter manifest("bench",
                            json{{"algo", args.algo},
                                 {"seed", args.seed},
                                 {"lmc_steps", args.lmc_steps}},
                            json{{"instances_dir", args.instances_dir}});
    write_text_file(dir / "scoreboard.csv", csv);
    manifest.add_output(dir / "scoreboard.csv");
    manifest.write(dir);
    std::cout << "wrote " << (dir / "scoreboard.csv").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return map_error(e);
  }
}

}  // namespace nlcs::cli
