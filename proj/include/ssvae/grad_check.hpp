#pragma once

#include <functional>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences at step `h`, coordinate by coordinate over `params`.
/// Per coordinate: |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
/// `f` must be deterministic (reseed any sampling inside it).
/// `max_coords_per_param` > 0 checks an evenly strided subset of each tensor.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double h = 1e-5, std::size_t max_coords_per_param = 0);

}  // namespace ssvae
