#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "nlcs/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nlcs: non-log-concave sampling laboratory"};
  app.require_subcommand(1);

  nlcs::cli::GenArgs gen;
  std::string gen_kind;
  int gen_d = 0;
  double gen_L = 0.0, gen_M = 0.0, gen_eps = 0.0, gen_m = 0.0, gen_R = 0.0;
  std::uint64_t gen_seed = 0;
  CLI::App* cmd_gen = app.add_subcommand("gen", "materialize an instance file");
  cmd_gen->add_option("--spec", gen.spec_path, "instance spec JSON");
  cmd_gen->add_option("--kind", gen_kind,
                      "instance kind for inline parameters (lb_base, lb_perturbed, opt)");
  cmd_gen->add_option("--d", gen_d, "dimension (inline)");
  cmd_gen->add_option("--L", gen_L, "smoothness bound (inline)");
  cmd_gen->add_option("--M", gen_M, "second-moment bound (inline)");
  cmd_gen->add_option("--eps", gen_eps, "accuracy parameter (inline)");
  cmd_gen->add_option("--m", gen_m, "outer strong-convexity (inline opt)");
  cmd_gen->add_option("--R", gen_R, "outer radius (inline opt)");
  cmd_gen->add_option("--seed", gen_seed, "seed");
  cmd_gen->add_option("--out", gen.out_dir, "output directory");

  nlcs::cli::SampleArgs sample;
  std::int64_t sample_n_steps = -1;
  double sample_h = -1.0, sample_l_pi = -1.0, sample_k0 = -1.0;
  CLI::App* cmd_sample =
      app.add_subcommand("sample", "run the truncation + LMC pipeline");
  cmd_sample->add_option("--spec", sample.spec_path, "instance spec JSON")
      ->required();
  cmd_sample->add_option("--L", sample.L, "smoothness bound")->required();
  cmd_sample->add_option("--M", sample.M, "second-moment bound")->required();
  cmd_sample->add_option("--eps", sample.eps, "target TV accuracy")->required();
  cmd_sample->add_option("--n", sample.n, "number of samples");
  cmd_sample->add_option("--seed", sample.seed, "seed");
  cmd_sample->add_option("--N-steps", sample_n_steps, "LMC step count override");
  cmd_sample->add_option("--h-step", sample_h, "LMC step size override");
  cmd_sample->add_option("--L-pi", sample_l_pi, "smoothness override for f_pi");
  cmd_sample->add_option("--K0", sample_k0, "initial KL bound override");
  cmd_sample->add_option("--threads", sample.threads, "worker threads (1 = reproducible)");
  cmd_sample->add_option("--budget", sample.budget, "grid cube budget");
  cmd_sample->add_option("--out", sample.out_dir, "output directory");

  nlcs::cli::OudiagArgs oudiag;
  CLI::App* cmd_oudiag =
      app.add_subcommand("oudiag", "OU smoothness-evolution sweep");
  cmd_oudiag->add_option("--spec", oudiag.spec_path, "instance spec JSON")
      ->required();
  cmd_oudiag->add_option("--t", oudiag.t_list, "OU times")->required();
  cmd_oudiag->add_option("--method", oudiag.method,
                         "closed-form | finite-difference | covariance-identity | auto");
  cmd_oudiag->add_option("--mc-samples", oudiag.mc_samples, "MC sample size");
  cmd_oudiag->add_option("--seed", oudiag.seed, "seed");
  cmd_oudiag->add_option("--out", oudiag.out_dir, "output directory");

  nlcs::cli::BenchArgs bench;
  CLI::App* cmd_bench =
      app.add_subcommand("bench", "query-count scoreboard on opt instances");
  cmd_bench->add_option("--instances", bench.instances_dir, "instance directory")
      ->required();
  cmd_bench->add_option("--algo", bench.algo, "sampler | grid_search")->required();
  cmd_bench->add_option("--seed", bench.seed, "seed");
  cmd_bench->add_option("--lmc-steps", bench.lmc_steps, "sampler profile step count");
  cmd_bench->add_option("--out", bench.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (cmd_gen->parsed()) {
    if (gen.spec_path.empty() && !gen_kind.empty()) {
      std::string params = "{\"d\":" + std::to_string(gen_d) +
                           ",\"L\":" + std::to_string(gen_L) +
                           ",\"M\":" + std::to_string(gen_M) +
                           ",\"eps\":" + std::to_string(gen_eps);
      if (gen_kind == "opt") {
        params += ",\"m\":" + std::to_string(gen_m) +
                  ",\"R\":" + std::to_string(gen_R);
      }
      params += "}";
      gen.inline_spec = "{\"kind\":\"" + gen_kind + "\",\"params\":" + params +
                        ",\"seed\":" + std::to_string(gen_seed) + "}";
    }
    return nlcs::cli::run_gen(gen);
  }
  if (cmd_sample->parsed()) {
    if (sample_n_steps > 0) sample.N = sample_n_steps;
    if (sample_h > 0.0) sample.h = sample_h;
    if (sample_l_pi > 0.0) sample.L_pi = sample_l_pi;
    if (sample_k0 > 0.0) sample.K0 = sample_k0;
    return nlcs::cli::run_sample(sample);
  }
  if (cmd_oudiag->parsed()) return nlcs::cli::run_oudiag(oudiag);
  if (cmd_bench->parsed()) return nlcs::cli::run_bench(bench);
  return 1;
}
