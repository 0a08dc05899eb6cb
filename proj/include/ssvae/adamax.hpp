#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssvae/config.hpp"
#include "ssvae/parameters.hpp"

namespace ssvae {

inline constexpr double kAdamaxEpsilon = 1e-8;

/// One AdaMax update of a flat parameter block, t >= 1:
///   m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);
///   theta <- theta - lr / (1 - b1^t) * m / (u + eps).
void adamax_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> u, double lr, double beta1, double beta2, std::uint64_t t);

/// AdaMax over a named parameter list. Moments are stored in list order.
class Adamax {
 public:
  Adamax(ParameterList params, OptimizerConfig config);

  /// Applies one step using the gradients currently held by the parameters.
  void step();
  void zero_grad() { zero_grads(params_); }

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const ParameterList& parameters() const { return params_; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& infinity_norms() { return u_; }

 private:
  ParameterList params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> m_, u_;
  std::uint64_t t_ = 0;
};

}  // namespace ssvae
