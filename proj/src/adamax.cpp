#include "ssvae/adamax.hpp"

#include <cmath>

namespace ssvae {

void adamax_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> u, double lr, double beta1, double beta2, std::uint64_t t) {
  if (t == 0) throw ContractError("adamax step counter starts at 1");
  if (grads.size() != params.size() || m.size() != params.size() || u.size() != params.size()) {
    throw ShapeError("adamax buffers differ in size");
  }
  const double step = lr / (1.0 - std::pow(beta1, static_cast<double>(t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    u[i] = std::max(beta2 * u[i], std::abs(grads[i]));
    params[i] -= step * m[i] / (u[i] + kAdamaxEpsilon);
  }
}

Adamax::Adamax(ParameterList params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    u_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adamax::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    // Parameters that took no part in the loss have no gradient buffer yet.
    const std::vector<double> zeros(p.grad().empty() ? p.numel() : 0, 0.0);
    const std::span<const double> g = p.grad().empty() ? std::span<const double>(zeros) : p.grad();
    adamax_step(p.mutable_data(), g, m_[i], u_[i], config_.lr, config_.beta1, config_.beta2, t_);
  }
}

}  // namespace ssvae
