#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>

#include "nlcs/instances.hpp"
#include "nlcs/oracle.hpp"
#include "nlcs/types.hpp"

namespace nlcs {

// Wire form of a generated distribution family. `params` is kind-specific:
//   gaussian      {mean: [..], cov: [[..]]}
//   mixture       {weights: [..], means: [[..]], covs: [[[..]]]}
//   hs            {J: [[..]], h: [..]}
//   stitched      {u: [..]}
//   lb_base       {d, L, M, eps}
//   lb_perturbed  {d, L, M, eps, v?: [..], gamma?: f}   (v, gamma auto-derived)
//   opt           {d, L, m, R, eps, center?: [..]}
struct InstanceSpec {
  std::string kind;
  nlohmann::json params;
  std::uint64_t seed = 0;
};

InstanceSpec parse_instance_spec(const nlohmann::json& j);
nlohmann::json instance_spec_to_json(const InstanceSpec& spec);

// A constructed instance: the oracle plus the family handles the diagnostics
// need, and the derived constants echoed into generated files.
struct BuiltInstance {
  InstanceSpec spec;
  PotentialOracle oracle;
  nlohmann::json derived;
  std::optional<MixtureSpec> mixture;
  std::optional<Vec> stitched_u;
  std::optional<std::pair<Mat, Vec>> hs;
  std::optional<LowerBoundParams> lb;
  std::optional<OptInstance> opt;
};

BuiltInstance build_instance(const InstanceSpec& spec);

nlohmann::json vec_to_json(const Vec& v);
nlohmann::json mat_to_json(const Mat& m);

}  // namespace nlcs
