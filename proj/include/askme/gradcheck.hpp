#pragma once

#include <functional>

#include "askme/tensor.hpp"

namespace askme {

// Central-difference gradient of a scalar function of a tensor:
// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) per coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps);

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace askme
