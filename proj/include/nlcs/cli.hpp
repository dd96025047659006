#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlcs/types.hpp"

namespace nlcs::cli {

// Exit-code contract: 0 ok, 2 input, 3 numeric divergence, 4 budget.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitBudget = 4;

struct GenArgs {
  std::string spec_path;        // spec file, or empty when given inline
  std::string inline_spec;      // JSON text assembled from flags
  std::string out_dir = ".";
};

struct SampleArgs {
  std::string spec_path;
  double L = 0.0;
  double M = 0.0;
  double eps = 0.0;
  int n = 1;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> N;
  std::optional<double> h;
  std::optional<double> L_pi;
  std::optional<double> K0;
  int threads = 1;
  double budget = 2e8;
  std::string out_dir = ".";
};

struct OudiagArgs {
  std::string spec_path;
  std::vector<double> t_list;
  std::string method = "auto";  // closed-form | finite-difference | covariance-identity | auto
  int mc_samples = 200000;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct BenchArgs {
  std::string instances_dir;
  std::string algo;  // sampler | grid_search
  std::uint64_t seed = 0;
  std::int64_t lmc_steps = 200;
  std::optional<double> lmc_step_size;
  std::string out_dir = ".";
};

int run_gen(const GenArgs& args);
int run_sample(const SampleArgs& args);
int run_oudiag(const OudiagArgs& args);
int run_bench(const BenchArgs& args);

// CI hook: checks that every output file referenced by a manifest exists and
// matches its recorded content hash.
void validate_manifest(const std::string& manifest_path);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace nlcs::cli
