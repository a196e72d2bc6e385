#pragma once

#include <functional>
#include <vector>

#include "oasis/tensor/tensor.hpp"

namespace oasis::detail {

Tensor make_result(std::vector<int> shape, const char* op, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward);

void accumulate_reduced(const Tensor& t, const float* grad_src,
                        const std::vector<int>& out_shape);

}  // namespace oasis::detail
