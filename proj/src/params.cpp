#include "askme/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace askme {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (contains(name)) {
    throw std::invalid_argument("ParamStore: duplicate name " + name);
  }
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamStore::get(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw std::out_of_range("ParamStore: unknown name " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

double GaussianSampler::sample(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1, u2;
  do {
    u1 = (rng_() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  u2 = (rng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

Tensor GaussianSampler::tensor(std::vector<std::size_t> shape, double mean,
                               double stddev) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = sample(mean, stddev);
  return t;
}

}  // namespace askme
