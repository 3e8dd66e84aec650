#include "askme/adam.hpp"

#include <cmath>

namespace askme {

void AdamState::step(ParamStore& params,
                     const std::unordered_map<std::string, Tensor>& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  // Iterate in the store's fixed order, not the hash map's.
  for (const std::string& name : params.names()) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    Tensor& p = params.get(name);
    const Tensor& g = it->second;
    require_same_shape(p, g, "adam_step");
    auto [mi, minserted] = m_.try_emplace(name, Tensor::zeros(p.shape));
    auto [vi, vinserted] = v_.try_emplace(name, Tensor::zeros(p.shape));
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace askme
