#pragma once

#include <string>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

inline void zero_grads(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace ssvae
