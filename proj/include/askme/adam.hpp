#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "askme/params.hpp"
#include "askme/tensor.hpp"

namespace askme {

// Adam with bias correction. The learning-rate schedule (0.5 decay per epoch)
// is applied by the trainer; the step itself only reads `lr`.
struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  // One update over every named gradient; missing moment tensors are created
  // lazily as zeros. step() is bit-deterministic for identical inputs.
  void step(ParamStore& params,
            const std::unordered_map<std::string, Tensor>& grads);

  std::uint64_t step_count() const { return step_count_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t step_count_ = 0;
  std::unordered_map<std::string, Tensor> m_;
  std::unordered_map<std::string, Tensor> v_;
};

}  // namespace askme
