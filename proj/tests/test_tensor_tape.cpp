#include "doctest.h"

#include <cmath>
#include <random>

#include "askme/gradcheck.hpp"
#include "askme/tape.hpp"
#include "askme/tensor.hpp"

using namespace askme;

TEST_CASE("tensor constructors and indexing") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = 7.0;
  CHECK(t.data[5] == 7.0);

  Tensor s = Tensor::scalar(4.5);
  CHECK(s.size() == 1);
  CHECK(s.data[0] == 4.5);

  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("softmax matches extended-precision oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> logits(1 + rng() % 8);
    for (double& v : logits) v = u(rng);
    auto got = softmax(logits);

    long double mx = logits[0];
    for (double v : logits) mx = std::max<long double>(mx, v);
    long double z = 0.0L;
    std::vector<long double> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      e[i] = expl(static_cast<long double>(logits[i]) - mx);
      z += e[i];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      CHECK(got[i] == doctest::Approx(static_cast<double>(e[i] / z)).epsilon(1e-14));
      total += got[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax is stable for extreme logits and rejects empty input") {
  auto w = softmax({1000.0, 1000.0, -1000.0});
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[2] == doctest::Approx(0.0));
  CHECK_THROWS_AS(softmax({}), std::invalid_argument);
}

namespace {

// Checks the tape gradient of a scalar-valued graph against central
// differences through a single parameter tensor.
void check_tape_grad(const Tensor& x0,
                     const std::function<NodeId(Tape&, NodeId)>& build,
                     double tol = 1e-8) {
  Tape g;
  NodeId x = g.param(x0);
  NodeId loss = build(g, x);
  Tensor analytic = g.backward(loss).at(x);

  Tensor numeric = finite_diff_grad(
      [&](const Tensor& probe) {
        Tape h;
        NodeId p = h.param(probe);
        return h.value(build(h, p)).data[0];
      },
      x0, 1e-6);
  CHECK(max_relative_error(analytic, numeric) <= tol);
}

Tensor random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Tensor t = Tensor::zeros({n});
  for (double& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("tape gradients match finite differences per op") {
  Tensor x = random_vec(5, 21);

  SUBCASE("sigmoid-tanh-relu chain") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      return g.sum(g.relu(g.tanh(g.sigmoid(p))));
    });
  }
  SUBCASE("mul and sub against shifted self") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      NodeId c = g.constant(Tensor::full({5}, 0.3));
      return g.sum(g.mul(g.sub(p, c), p));
    });
  }
  SUBCASE("softmax-dot") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      NodeId c = g.constant(random_vec(5, 99));
      return g.dot(g.softmax(p), c);
    });
  }
  SUBCASE("matvec-affine") {
    Tensor w = Tensor::zeros({3, 5});
    for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = 0.1 * (double(i) - 7.0);
    check_tape_grad(x, [&](Tape& g, NodeId p) {
      NodeId wn = g.constant(w);
      NodeId b = g.constant(Tensor::full({3}, 0.2));
      return g.sum(g.tanh(g.affine(p, wn, b)));
    });
    // and through the matrix itself
    check_tape_grad(w, [&](Tape& g, NodeId wp) {
      NodeId xn = g.constant(random_vec(5, 5));
      return g.sum(g.sigmoid(g.matvec(wp, xn)));
    });
  }
  SUBCASE("concat-mean") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      return g.mean(g.concat({p, g.mul(p, p)}));
    });
  }
  SUBCASE("weighted_sum through weights and items") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      NodeId w = g.softmax(g.constant(random_vec(2, 3)));
      return g.sum(g.weighted_sum(w, {p, g.tanh(p)}));
    });
    check_tape_grad(random_vec(2, 8), [](Tape& g, NodeId p) {
      NodeId a = g.constant(random_vec(4, 1));
      NodeId b = g.constant(random_vec(4, 2));
      return g.sum(g.weighted_sum(g.softmax(p), {a, b}));
    });
  }
  SUBCASE("sqrt-sum-of-squares (L2 norm)") {
    check_tape_grad(x, [](Tape& g, NodeId p) {
      return g.sqrt(g.sum(g.mul(p, p)));
    });
  }
  SUBCASE("scale and row") {
    Tensor table = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < table.size(); ++i) table.data[i] = 0.05 * double(i);
    check_tape_grad(table, [](Tape& g, NodeId p) {
      return g.scale(g.sum(g.tanh(g.row(p, 1))), 2.5);
    });
  }
  SUBCASE("bce through sigmoid") {
    check_tape_grad(Tensor::vec({0.3}), [](Tape& g, NodeId p) {
      return g.bce(g.sigmoid(g.sum(p)), 1.0);
    });
    check_tape_grad(Tensor::vec({-0.7}), [](Tape& g, NodeId p) {
      return g.bce(g.sigmoid(g.sum(p)), 0.0);
    });
  }
}

TEST_CASE("bce value and clamping") {
  Tape g;
  NodeId p = g.constant(Tensor::scalar(0.25));
  CHECK(g.value(g.bce(p, 1.0)).data[0] == doctest::Approx(-std::log(0.25)));
  CHECK(g.value(g.bce(p, 0.0)).data[0] == doctest::Approx(-std::log(0.75)));

  NodeId zero = g.constant(Tensor::scalar(0.0));
  CHECK(std::isfinite(g.value(g.bce(zero, 1.0)).data[0]));
  // In the clamp region the gradient is zero by contract.
  NodeId zp = g.param(Tensor::scalar(0.0));
  NodeId l = g.bce(zp, 1.0);
  CHECK(g.backward(l).at(zp).data[0] == 0.0);
}

TEST_CASE("param_ref shares storage with the caller") {
  Tensor stored = Tensor::vec({1.0, 2.0});
  Tape g;
  NodeId p = g.param_ref(stored);
  CHECK(g.value(p).data[0] == 1.0);
  NodeId loss = g.dot(p, g.constant(Tensor::vec({3.0, 4.0})));
  auto grads = g.backward(loss);
  CHECK(grads.at(p).data[0] == 3.0);
  CHECK(grads.at(p).data[1] == 4.0);
}

TEST_CASE("unused params get zero gradients") {
  Tape g;
  NodeId used = g.param(Tensor::vec({2.0}));
  NodeId unused = g.param(Tensor::vec({5.0, 6.0}));
  NodeId loss = g.sum(g.mul(used, used));
  auto grads = g.backward(loss);
  CHECK(grads.at(used).data[0] == doctest::Approx(4.0));
  CHECK(grads.at(unused).data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("tape shape and numeric errors") {
  Tape g;
  NodeId w = g.constant(Tensor::zeros({2, 3}));
  NodeId x = g.constant(Tensor::zeros({2}));
  CHECK_THROWS_AS(g.matvec(w, x), ShapeError);
  CHECK_THROWS_AS(g.add(x, g.constant(Tensor::zeros({3}))), ShapeError);
  CHECK_THROWS_AS(g.sqrt(g.constant(Tensor::vec({-1.0}))), NumericError);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);

  NodeId huge = g.constant(Tensor::vec({1e308}));
  CHECK_THROWS_AS(g.add(huge, huge), NumericError);
}

TEST_CASE("finite differences recover the exact quadratic gradient") {
  Tensor x = random_vec(6, 77);
  Tensor grad = finite_diff_grad(
      [](const Tensor& t) {
        double acc = 0.0;
        for (double v : t.data) acc += v * v;
        return acc;
      },
      x, 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(grad.data[i] == doctest::Approx(2.0 * x.data[i]).epsilon(1e-8));
  }
}

TEST_CASE("max_relative_error uses max(1, |a|, |b|) as denominator") {
  CHECK(max_relative_error(Tensor::vec({0.0}), Tensor::vec({1e-7})) ==
        doctest::Approx(1e-7));
  CHECK(max_relative_error(Tensor::vec({200.0}), Tensor::vec({100.0})) ==
        doctest::Approx(0.5));
}
