#include "ssvae/rng.hpp"

namespace ssvae {

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::normal() { return normal_(engine_); }

std::size_t Rng::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Tensor Rng::normal_tensor(const Shape& shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = normal_(engine_);
  return Tensor::from_data(shape, std::move(v));
}

}  // namespace ssvae
