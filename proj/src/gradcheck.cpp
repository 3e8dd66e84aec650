#include "askme/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace askme {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps <= 0");
  Tensor grad = Tensor::zeros(x.shape);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe.data[i] = x.data[i] + eps;
    const double fp = f(probe);
    probe.data[i] = x.data[i] - eps;
    const double fm = f(probe);
    probe.data[i] = x.data[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite probe value");
    }
    grad.data[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom =
        std::max({1.0, std::abs(a.data[i]), std::abs(b.data[i])});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

}  // namespace askme
