#include "doctest.h"

#include <cmath>

#include "askme/adam.hpp"
#include "askme/params.hpp"

using namespace askme;

namespace {

ParamStore single_param(double v) {
  ParamStore s;
  s.add("w", Tensor::vec({v}));
  return s;
}

}  // namespace

TEST_CASE("adam leaves parameters untouched for zero gradients") {
  ParamStore s = single_param(3.0);
  AdamState adam({0.01});
  adam.step(s, {{"w", Tensor::vec({0.0})}});
  CHECK(s.get("w").data[0] == 3.0);
}

TEST_CASE("adam first step is approximately -lr * sign(grad)") {
  for (double g : {0.3, -1.7, 42.0}) {
    ParamStore s = single_param(1.0);
    AdamState adam({0.001});
    adam.step(s, {{"w", Tensor::vec({g})}});
    // With bias correction, m_hat/sqrt(v_hat) = g/|g| up to epsilon.
    double delta = s.get("w").data[0] - 1.0;
    CHECK(delta == doctest::Approx(-0.001 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-6));
  }
}

TEST_CASE("adam minimizes a 1-d quadratic") {
  ParamStore s = single_param(0.0);
  AdamState adam({0.1});
  for (int i = 0; i < 300; ++i) {
    double w = s.get("w").data[0];
    adam.step(s, {{"w", Tensor::vec({2.0 * (w - 5.0)})}});
  }
  CHECK(s.get("w").data[0] == doctest::Approx(5.0).epsilon(0.02));
  CHECK(adam.step_count() == 300);
}

TEST_CASE("adam trajectories are bit-identical across runs") {
  auto run = [] {
    ParamStore s;
    s.add("w", Tensor::vec({0.1, -0.2, 0.3}));
    AdamState adam({0.01});
    for (int i = 0; i < 50; ++i) {
      Tensor g = Tensor::zeros({3});
      for (std::size_t j = 0; j < 3; ++j) {
        g.data[j] = std::sin(0.1 * i + double(j)) * s.get("w").data[j];
      }
      adam.step(s, {{"w", g}});
    }
    return s.get("w").data;
  };
  CHECK(run() == run());
}

TEST_CASE("gaussian sampler is deterministic and roughly standard") {
  GaussianSampler a(42), b(42);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = a.sample(0.0, 1.0);
    CHECK(x == b.sample(0.0, 1.0));
    mean += x;
    var += x * x;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  Tensor t = a.tensor({4, 4}, 2.0, 0.0);
  for (double v : t.data) CHECK(v == 2.0);
}
