#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "nlcs/cli.hpp"
#include "nlcs/rng.hpp"
#include "nlcs/spec_io.hpp"
#include "testutil.hpp"

using namespace nlcs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlcs_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  json j;
  in >> j;
  return j;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("spec round-trips through the constructors") {
  json spec_json{{"kind", "mixture"},
                 {"seed", 7},
                 {"params",
                  {{"weights", {0.5, 0.5}},
                   {"means", {{-3.0}, {3.0}}},
                   {"covs", {{{1.0}}, {{1.0}}}}}}};
  const InstanceSpec spec = parse_instance_spec(spec_json);
  const json back = instance_spec_to_json(spec);
  CHECK(parse_instance_spec(back).kind == "mixture");
  CHECK(back.at("params") == spec_json.at("params"));
  const BuiltInstance built = build_instance(spec);
  CHECK(built.oracle.dim == 1);
  CHECK(built.mixture.has_value());

  CHECK_THROWS_AS(parse_instance_spec(json{{"kind", "nope"}, {"params", json::object()}}),
                  SpecError);
  CHECK_THROWS_AS(parse_instance_spec(json{{"params", json::object()}}), SpecError);
}

TEST_CASE("gen echoes derived lower-bound constants") {
  const fs::path dir = scratch("gen");
  write_json(dir / "spec.json",
             json{{"kind", "lb_base"},
                  {"params", {{"d", 2}, {"L", 4.0}, {"M", 2.0}, {"eps", 0.004}}}});
  cli::GenArgs args;
  args.spec_path = (dir / "spec.json").string();
  args.out_dir = (dir / "out").string();
  CHECK(cli::run_gen(args) == cli::kExitOk);
  const json inst = read_json(dir / "out" / "instance.json");
  CHECK(inst.at("derived").at("R").get<double>() ==
        doctest::Approx(std::sqrt(2.0 / 0.004)));
  CHECK(inst.at("derived").contains("ell"));
  cli::validate_manifest((dir / "out" / "manifest.json").string());

  // eps outside (0, 1/200) is an input error
  write_json(dir / "bad.json",
             json{{"kind", "lb_base"},
                  {"params", {{"d", 2}, {"L", 4.0}, {"M", 2.0}, {"eps", 0.5}}}});
  args.spec_path = (dir / "bad.json").string();
  CHECK(cli::run_gen(args) == cli::kExitInput);
}

TEST_CASE("gen solves gamma for perturbed instances") {
  const fs::path dir = scratch("gen_pert");
  write_json(dir / "spec.json",
             json{{"kind", "lb_perturbed"},
                  {"seed", 3},
                  {"params", {{"d", 2}, {"L", 8.0}, {"M", 1.0}, {"eps", 0.004}}}});
  cli::GenArgs args;
  args.spec_path = (dir / "spec.json").string();
  args.out_dir = (dir / "out").string();
  REQUIRE(cli::run_gen(args) == cli::kExitOk);
  const json inst = read_json(dir / "out" / "instance.json");
  const double gamma = inst.at("derived").at("gamma").get<double>();
  const double R = inst.at("derived").at("R").get<double>();
  const double r1 = inst.at("derived").at("r1").get<double>();
  const double r2 = inst.at("derived").at("r2").get<double>();
  CHECK(gamma >= std::log(9.0) + 2.0 * std::log(3.0 * R / r2));
  CHECK(gamma <= std::log(18.0) + 2.0 * std::log(3.0 * R / r1));
}

TEST_CASE("sample command: determinism, divergence, budget") {
  const fs::path dir = scratch("sample");
  write_json(dir / "spec.json",
             json{{"kind", "gaussian"},
                  {"params", {{"mean", {0.0}}, {"cov", {{1.0}}}}}});

  cli::SampleArgs args;
  args.spec_path = (dir / "spec.json").string();
  args.L = 1.0;
  args.M = 1.0;
  args.eps = 0.05;
  args.n = 1000;
  args.seed = 11;
  args.N = 40;
  args.h = 0.01;
  args.L_pi = 1.0;
  args.K0 = 2.0;
  args.out_dir = (dir / "run1").string();
  REQUIRE(cli::run_sample(args) == cli::kExitOk);
  args.out_dir = (dir / "run2").string();
  REQUIRE(cli::run_sample(args) == cli::kExitOk);

  CHECK(slurp(dir / "run1" / "samples.csv") == slurp(dir / "run2" / "samples.csv"));
  CHECK(slurp(dir / "run1" / "report.json") == slurp(dir / "run2" / "report.json"));
  const std::string csv = slurp(dir / "run1" / "samples.csv");
  CHECK(csv.rfind("x0\n", 0) == 0);
  cli::validate_manifest((dir / "run1" / "manifest.json").string());

  const json report = read_json(dir / "run1" / "report.json");
  CHECK(report.contains("f_hat_star"));
  CHECK(report.at("queries").contains("value"));
  CHECK(report.at("samples_path") == "samples.csv");
  CHECK(report.contains("tv_estimate"));  // d = 1 and enough samples

  // step size unstable even on the eps d / M tail curvature: exit 3
  cli::SampleArgs diverge = args;
  diverge.h = 100.0;
  diverge.N = 2000;
  diverge.out_dir = (dir / "div").string();
  CHECK(cli::run_sample(diverge) == cli::kExitDivergence);

  // tiny cube budget: exit 4
  cli::SampleArgs budget = args;
  budget.budget = 10.0;
  budget.out_dir = (dir / "budget").string();
  CHECK(cli::run_sample(budget) == cli::kExitBudget);

  // malformed spec: exit 2
  write_json(dir / "broken.json", json{{"kind", "gaussian"}, {"params", {{"mean", {0.0}}}}});
  cli::SampleArgs broken = args;
  broken.spec_path = (dir / "broken.json").string();
  broken.out_dir = (dir / "broken_out").string();
  CHECK(cli::run_sample(broken) == cli::kExitInput);
}

TEST_CASE("oudiag command writes the sweep") {
  const fs::path dir = scratch("oudiag");
  write_json(dir / "mix.json",
             json{{"kind", "mixture"},
                  {"params",
                   {{"weights", {0.5, 0.5}},
                    {"means", {{3.0, 0.0}, {-3.0, 0.0}}},
                    {"covs",
                     {{{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}}}}}});
  cli::OudiagArgs args;
  args.spec_path = (dir / "mix.json").string();
  args.t_list = {0.0, 0.5, 1.5};
  args.out_dir = (dir / "out").string();
  REQUIRE(cli::run_oudiag(args) == cli::kExitOk);
  const std::string csv = slurp(dir / "out" / "sweep.csv");
  CHECK(csv.rfind("t,opnorm,method,mc_stderr,bound\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  // stitched instances cannot use the closed-form route
  write_json(dir / "stitched.json",
             json{{"kind", "stitched"},
                  {"params", {{"u", {20.0, 0.0}}}}});
  cli::OudiagArgs bad;
  bad.spec_path = (dir / "stitched.json").string();
  bad.t_list = {1.0};
  bad.method = "closed-form";
  bad.out_dir = (dir / "bad").string();
  CHECK(cli::run_oudiag(bad) == cli::kExitInput);
}

TEST_CASE("bench scoreboard") {
  const fs::path dir = scratch("bench");
  const fs::path inst_dir = dir / "instances";
  fs::create_directories(inst_dir);
  // planted bumps at distinct lattice cells
  const double L = 2.0, m = 1.0, R = 8.0, eps = 0.05;
  const double r = opt_bump_radius(L, eps);
  const std::vector<Vec> lattice = pack_opt_centers(R, r, 2);
  REQUIRE(lattice.size() >= 3);
  for (int i = 0; i < 3; ++i) {
    const Vec& c = lattice[(i * 7) % lattice.size()];
    write_json(inst_dir / ("inst" + std::to_string(i) + ".json"),
               json{{"kind", "opt"},
                    {"params",
                     {{"d", 2}, {"L", L}, {"m", m}, {"R", R}, {"eps", eps},
                      {"center", {c(0), c(1)}}}}});
  }

  cli::BenchArgs grid;
  grid.instances_dir = inst_dir.string();
  grid.algo = "grid_search";
  grid.out_dir = (dir / "grid").string();
  REQUIRE(cli::run_bench(grid) == cli::kExitOk);
  const std::string grid_csv = slurp(dir / "grid" / "scoreboard.csv");
  CHECK(grid_csv.rfind("instance,algo,value_q,grad_q,success\n", 0) == 0);

  cli::BenchArgs samp = grid;
  samp.algo = "sampler";
  samp.lmc_steps = 60;
  samp.out_dir = (dir / "samp").string();
  REQUIRE(cli::run_bench(samp) == cli::kExitOk);
  const std::string samp_csv = slurp(dir / "samp" / "scoreboard.csv");

  // every grid row succeeded and the sampler is oblivious: identical counts
  std::vector<std::uint64_t> samp_counts;
  std::istringstream ss(samp_csv);
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    const auto p1 = line.find(',');
    const auto p2 = line.find(',', p1 + 1);
    const auto p3 = line.find(',', p2 + 1);
    const auto p4 = line.find(',', p3 + 1);
    samp_counts.push_back(std::stoull(line.substr(p2 + 1, p3 - p2 - 1)) +
                          std::stoull(line.substr(p3 + 1, p4 - p3 - 1)));
    CHECK(line.substr(p4 + 1) == "1");
  }
  REQUIRE(samp_counts.size() == 3);
  CHECK(samp_counts[0] == samp_counts[1]);
  CHECK(samp_counts[1] == samp_counts[2]);

  cli::BenchArgs bad = grid;
  bad.algo = "annealing";
  CHECK(cli::run_bench(bad) == cli::kExitInput);
}

TEST_CASE("every instance kind round-trips through its constructor") {
  const std::vector<json> specs = {
      json{{"kind", "gaussian"},
           {"params", {{"mean", {0.5, -0.5}}, {"cov", {{1.0, 0.1}, {0.1, 2.0}}}}}},
      json{{"kind", "mixture"},
           {"params",
            {{"weights", {0.25, 0.75}},
             {"means", {{1.0}, {-1.0}}},
             {"covs", {{{1.0}}, {{0.5}}}}}}},
      json{{"kind", "hs"},
           {"params",
            {{"J", {{0.4, 0.05}, {0.05, 0.5}}}, {"h", {0.1, -0.2}}}}},
      json{{"kind", "stitched"}, {"params", {{"u", {20.0, 0.0}}}}},
      json{{"kind", "lb_base"},
           {"params", {{"d", 1}, {"L", 4.0}, {"M", 1.0}, {"eps", 0.004}}}},
      json{{"kind", "lb_perturbed"},
           {"seed", 5},
           {"params", {{"d", 1}, {"L", 4.0}, {"M", 1.0}, {"eps", 0.004}}}},
      json{{"kind", "opt"},
           {"params",
            {{"d", 2}, {"L", 2.0}, {"m", 1.0}, {"R", 8.0}, {"eps", 0.1}}}},
  };
  for (const json& j : specs) {
    const InstanceSpec spec = parse_instance_spec(j);
    const BuiltInstance first = build_instance(spec);
    const InstanceSpec replayed =
        parse_instance_spec(instance_spec_to_json(spec));
    const BuiltInstance second = build_instance(replayed);
    CHECK(first.oracle.dim == second.oracle.dim);
    // same potential surface after the round trip
    nlcs::RngStream rng(3, "roundtrip", 0);
    for (int i = 0; i < 5; ++i) {
      const Vec x = 2.0 * rng.normal_vec(first.oracle.dim);
      CHECK(first.oracle.value(x) == doctest::Approx(second.oracle.value(x)));
    }
  }
}

TEST_CASE("oudiag sweeps reproduce the smoothness-evolution table rows") {
  const fs::path dir = scratch("oudiag_rows");

  // stitched: the opnorm tracks e^{-2t} s and decays as t grows
  write_json(dir / "stitched.json",
             json{{"kind", "stitched"}, {"params", {{"u", {20.0, 0.0}}}}});
  cli::OudiagArgs stitched;
  stitched.spec_path = (dir / "stitched.json").string();
  stitched.t_list = {1.2, 2.2};
  stitched.mc_samples = 60000;
  stitched.out_dir = (dir / "stitched_out").string();
  REQUIRE(cli::run_oudiag(stitched) == cli::kExitOk);
  std::istringstream ss(slurp(dir / "stitched_out" / "sweep.csv"));
  std::string line;
  std::getline(ss, line);
  std::vector<double> opnorms;
  while (std::getline(ss, line)) {
    const auto p1 = line.find(',');
    const auto p2 = line.find(',', p1 + 1);
    opnorms.push_back(std::stod(line.substr(p1 + 1, p2 - p1 - 1)));
  }
  REQUIRE(opnorms.size() == 2);
  CHECK(opnorms[0] > opnorms[1]);

  // equal-covariance mixture: opnorm bounded by max(1, e^{-2t} s)
  write_json(dir / "mix.json",
             json{{"kind", "mixture"},
                  {"params",
                   {{"weights", {0.5, 0.5}},
                    {"means", {{3.0, 0.0}, {-3.0, 0.0}}},
                    {"covs",
                     {{{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}}}}}});
  cli::OudiagArgs mix;
  mix.spec_path = (dir / "mix.json").string();
  mix.t_list = {0.0, 0.7, 2.0};
  mix.out_dir = (dir / "mix_out").string();
  REQUIRE(cli::run_oudiag(mix) == cli::kExitOk);
  std::istringstream ms(slurp(dir / "mix_out" / "sweep.csv"));
  std::getline(ms, line);
  while (std::getline(ms, line)) {
    const auto p1 = line.find(',');
    const auto p2 = line.find(',', p1 + 1);
    const auto p4 = line.rfind(',');
    const double opnorm = std::stod(line.substr(p1 + 1, p2 - p1 - 1));
    const double bound = std::stod(line.substr(p4 + 1));
    CHECK(opnorm <= bound + 1e-6);
  }

  // hs: measured opnorm stays inside the evolved bracket column
  write_json(dir / "hs.json",
             json{{"kind", "hs"},
                  {"params",
                   {{"J", {{0.4, 0.05}, {0.05, 0.5}}}, {"h", {0.2, -0.1}}}}});
  cli::OudiagArgs hs;
  hs.spec_path = (dir / "hs.json").string();
  hs.t_list = {0.0, 0.5, 1.5};
  hs.out_dir = (dir / "hs_out").string();
  REQUIRE(cli::run_oudiag(hs) == cli::kExitOk);
  std::istringstream hss(slurp(dir / "hs_out" / "sweep.csv"));
  std::getline(hss, line);
  while (std::getline(hss, line)) {
    const auto p1 = line.find(',');
    const auto p2 = line.find(',', p1 + 1);
    const auto p4 = line.rfind(',');
    const double opnorm = std::stod(line.substr(p1 + 1, p2 - p1 - 1));
    const double bound = std::stod(line.substr(p4 + 1));
    CHECK(opnorm <= bound + 1e-9);
  }
}
