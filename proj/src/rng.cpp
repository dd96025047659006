#include "nlcs/rng.hpp"

#include <cmath>

namespace nlcs {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stream_key(std::uint64_t seed, std::string_view module_tag,
                         std::uint64_t index) {
  // FNV-1a over the tag, then splitmix rounds to mix seed and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : module_tag) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  std::uint64_t s = h ^ seed;
  std::uint64_t k = splitmix64(s);
  s = k ^ (index * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
  return splitmix64(s);
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::u01() {
  // 53-bit mantissa, strictly inside (0,1)
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = u01();
  const double u2 = u01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Vec RngStream::normal_vec(int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = normal();
  return v;
}

Vec RngStream::uniform_sphere(int d) {
  while (true) {
    Vec v = normal_vec(d);
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Vec RngStream::uniform_ball(int d, double radius) {
  const double r = radius * std::pow(u01(), 1.0 / d);
  return r * uniform_sphere(d);
}

}  // namespace nlcs
