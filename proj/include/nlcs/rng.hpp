#pragma once

#include <cstdint>
#include <string_view>

#include "nlcs/types.hpp"

namespace nlcs {

// Counter-based stream derivation: every consumer draws from
// stream = hash(seed, module_tag, index), so serial and parallel runs of the
// same configuration consume identical randomness.
std::uint64_t stream_key(std::uint64_t seed, std::string_view module_tag,
                         std::uint64_t index);

// Small deterministic generator (splitmix64 core, Box-Muller normals).
// Identical sequences on every platform for a given key.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}
  RngStream(std::uint64_t seed, std::string_view module_tag, std::uint64_t index)
      : RngStream(stream_key(seed, module_tag, index)) {}

  std::uint64_t next_u64();
  double u01();    // uniform in (0,1)
  double normal();
  Vec normal_vec(int d);
  Vec uniform_sphere(int d);            // unit norm
  Vec uniform_ball(int d, double radius);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace nlcs
