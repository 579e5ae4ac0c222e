#include "mmfuse/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {}

RngStream RngStream::derive(std::string_view label) const {
  return RngStream(mix64(seed_ ^ mix64(fnv1a(label))));
}

RngStream RngStream::derive(std::uint64_t index) const {
  return RngStream(mix64(seed_ + kGolden * (index + 1)) ^ 0x5851F42D4C957F2DULL);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(seed_ + kGolden * counter_);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

int RngStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw ContractError("uniform_int requires lo <= hi");
  return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
}

double RngStream::normal() {
  // Box-Muller; the sine branch is discarded so each call consumes two draws.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

}  // namespace mmfuse
