#pragma once

#include <cstdint>
#include <random>

#include "ssvae/tensor.hpp"

namespace ssvae {

/// Seeded generator shared by sampling code. All randomness in a run flows
/// through one of these, so a seed pins every draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();
  std::uint64_t next_u64() { return engine_(); }
  std::size_t index(std::size_t n);  // uniform in [0, n)
  /// Independent child generator; advances this one by one draw.
  Rng split() { return Rng(engine_()); }

  Tensor normal_tensor(const Shape& shape);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ssvae
