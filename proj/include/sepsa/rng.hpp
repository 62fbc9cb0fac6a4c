#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sepsa {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Independent per-purpose seed from a master seed, e.g.
/// derive_seed(seed, "init"), derive_seed(seed, "shuffle", epoch).
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t counter = 0);

/// Deterministic generator whose distributions do not depend on the
/// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, both variates used).
  double normal();
  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n);

  std::vector<std::size_t> permutation(std::size_t n);
  /// `k` distinct indices from [0, n) in sampled order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sepsa
