#include "ssvae/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ssvae {

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double h, std::size_t max_coords_per_param) {
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    if (loss.requires_grad()) tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    const auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
  }

  GradCheckResult result;
  NoGradScope no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    const std::size_t n = values.size();
    std::size_t step = 1;
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      step = (n + max_coords_per_param - 1) / max_coords_per_param;
    }
    for (std::size_t i = 0; i < n; i += step) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.coordinates_checked;
    }
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace ssvae
