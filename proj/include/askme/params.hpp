#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "askme/tensor.hpp"

namespace askme {

// Ordered collection of named trainable tensors. Order is fixed at insertion
// time so that reductions and optimizer sweeps are deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// Deterministic Gaussian sampler (Box-Muller over mt19937_64), so that
// fixed-seed runs are reproducible independent of the standard library's
// normal_distribution implementation.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}
  double sample(double mean, double stddev);
  Tensor tensor(std::vector<std::size_t> shape, double mean, double stddev);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace askme
