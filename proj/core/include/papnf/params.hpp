#pragma once

#include <string>
#include <vector>

#include "papnf/tensor.hpp"

namespace papnf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

}  // namespace papnf
