#include "askme/tape.hpp"

#include <algorithm>
#include <cmath>

namespace askme {

namespace {
constexpr double kBceClamp = 1e-12;
}

NodeId Tape::push(Node n, const char* opname) {
  require_finite(n.value, opname);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor t) {
  return push({Op::kConstant, {}, std::move(t)}, "constant");
}

NodeId Tape::param_ref(const Tensor& t) {
  Node n{Op::kParam, {}, Tensor{}};
  n.ref = &t;
  nodes_.push_back(std::move(n));
  NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  params_.push_back(id);
  return id;
}

NodeId Tape::param(Tensor t) {
  NodeId id = push({Op::kParam, {}, std::move(t)}, "param");
  params_.push_back(id);
  return id;
}

bool Tape::is_param(NodeId id) const {
  return nodes_[id].op == Op::kParam;
}

NodeId Tape::matvec(NodeId w, NodeId x) {
  const Tensor& wt = value(w);
  const Tensor& xt = value(x);
  if (wt.rank() != 2 || xt.rank() != 1 || wt.cols() != xt.size()) {
    throw ShapeError("matvec: shape mismatch " + shape_string(wt.shape) +
                     " vs " + shape_string(xt.shape));
  }
  Tensor out = Tensor::zeros({wt.rows()});
  for (std::size_t i = 0; i < wt.rows(); ++i) {
    const double* wrow = wt.data.data() + i * wt.cols();
    double acc = 0.0;
    for (std::size_t j = 0; j < wt.cols(); ++j) acc += wrow[j] * xt.data[j];
    out.data[i] = acc;
  }
  return push({Op::kMatVec, {w, x}, std::move(out)}, "matvec");
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  require_same_shape(at, bt, "add");
  Tensor out = at;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bt.data[i];
  return push({Op::kAdd, {a, b}, std::move(out)}, "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  require_same_shape(at, bt, "sub");
  Tensor out = at;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bt.data[i];
  return push({Op::kSub, {a, b}, std::move(out)}, "sub");
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  require_same_shape(at, bt, "mul");
  Tensor out = at;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bt.data[i];
  return push({Op::kMul, {a, b}, std::move(out)}, "mul");
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push({Op::kSigmoid, {a}, std::move(out)}, "sigmoid");
}

NodeId Tape::tanh(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push({Op::kTanh, {a}, std::move(out)}, "tanh");
}

NodeId Tape::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push({Op::kRelu, {a}, std::move(out)}, "relu");
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<double> data;
  for (NodeId p : parts) {
    const Tensor& t = value(p);
    data.insert(data.end(), t.data.begin(), t.data.end());
  }
  return push({Op::kConcat, parts, Tensor::vec(std::move(data))}, "concat");
}

NodeId Tape::sum(NodeId a) {
  const Tensor& at = value(a);
  double acc = 0.0;
  for (double v : at.data) acc += v;
  return push({Op::kSum, {a}, Tensor::scalar(acc)}, "sum");
}

NodeId Tape::mean(NodeId a) {
  const Tensor& at = value(a);
  if (at.size() == 0) throw std::invalid_argument("mean: empty input");
  double acc = 0.0;
  for (double v : at.data) acc += v;
  return push({Op::kMean, {a}, Tensor::scalar(acc / at.size())}, "mean");
}

NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  require_same_shape(at, bt, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) acc += at.data[i] * bt.data[i];
  return push({Op::kDot, {a, b}, Tensor::scalar(acc)}, "dot");
}

NodeId Tape::softmax(NodeId a) {
  const Tensor& at = value(a);
  Tensor out = Tensor::vec(askme::softmax(at.data));
  return push({Op::kSoftmax, {a}, std::move(out)}, "softmax");
}

NodeId Tape::weighted_sum(NodeId weights, const std::vector<NodeId>& items) {
  const Tensor& wt = value(weights);
  if (items.empty() || wt.size() != items.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(wt.size()) +
                     " weights vs " + std::to_string(items.size()) + " items");
  }
  const std::size_t d = value(items[0]).size();
  Tensor out = Tensor::zeros({d});
  for (std::size_t j = 0; j < items.size(); ++j) {
    const Tensor& it = value(items[j]);
    if (it.size() != d) {
      throw ShapeError("weighted_sum: item shape mismatch " +
                       shape_string(it.shape) + " vs " +
                       shape_string(value(items[0]).shape));
    }
    for (std::size_t i = 0; i < d; ++i) out.data[i] += wt.data[j] * it.data[i];
  }
  std::vector<NodeId> inputs;
  inputs.reserve(items.size() + 1);
  inputs.push_back(weights);
  inputs.insert(inputs.end(), items.begin(), items.end());
  return push({Op::kWeightedSum, std::move(inputs), std::move(out)},
              "weighted_sum");
}

NodeId Tape::sqrt(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) {
    if (v < 0.0) throw NumericError("sqrt: negative input");
    v = std::sqrt(v);
  }
  return push({Op::kSqrt, {a}, std::move(out)}, "sqrt");
}

NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  Node n{Op::kScale, {a}, std::move(out)};
  n.aux = c;
  return push(std::move(n), "scale");
}

NodeId Tape::bce(NodeId yhat, double y) {
  const Tensor& pt = value(yhat);
  if (pt.size() != 1) throw std::invalid_argument("bce: prediction not scalar");
  double p = std::clamp(pt.data[0], kBceClamp, 1.0 - kBceClamp);
  double loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  Node n{Op::kBce, {yhat}, Tensor::scalar(loss)};
  n.aux = y;
  return push(std::move(n), "bce");
}

NodeId Tape::row(NodeId table, std::size_t r) {
  const Tensor& tt = value(table);
  if (tt.rank() != 2 || r >= tt.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                     shape_string(tt.shape));
  }
  Tensor out = Tensor::zeros({tt.cols()});
  std::copy_n(tt.data.data() + r * tt.cols(), tt.cols(), out.data.data());
  Node n{Op::kRow, {table}, std::move(out)};
  n.index = r;
  return push(std::move(n), "row");
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  return add(matvec(w, x), b);
}

std::unordered_map<NodeId, Tensor> Tape::backward(NodeId loss) const {
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss node is not scalar");
  }
  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> has_grad(nodes_.size(), false);
  // One gradient buffer per node, fetched once per edge so the inner loops
  // stay branch-free.
  auto ensure = [&](NodeId id) -> double* {
    if (!has_grad[id]) {
      grads[id] = Tensor::zeros(value(id).shape);
      has_grad[id] = true;
    }
    return grads[id].data.data();
  };
  ensure(loss)[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    if (!has_grad[id]) continue;
    const Node& n = nodes_[id];
    const Tensor& g = grads[id];
    const Tensor& y = value(id);
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kMatVec: {
        const Tensor& w = in(n, 0);
        const Tensor& x = in(n, 1);
        double* gw = ensure(n.inputs[0]);
        double* gx = ensure(n.inputs[1]);
        const std::size_t rows = w.rows();
        const std::size_t cols = w.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          const double gi = g.data[i];
          const double* wrow = w.data.data() + i * cols;
          double* gwrow = gw + i * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gwrow[j] += gi * x.data[j];
            gx[j] += wrow[j] * gi;
          }
        }
        break;
      }
      case Op::kAdd: {
        double* ga = ensure(n.inputs[0]);
        double* gb = ensure(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g.data[i];
          gb[i] += g.data[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = ensure(n.inputs[0]);
        double* gb = ensure(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g.data[i];
          gb[i] -= g.data[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = in(n, 0);
        const Tensor& b = in(n, 1);
        double* ga = ensure(n.inputs[0]);
        double* gb = ensure(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g.data[i] * b.data[i];
          gb[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::kSigmoid: {
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
        break;
      }
      case Op::kTanh: {
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& x = in(n, 0);
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x.data[i] > 0.0) gx[i] += g.data[i];
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (NodeId p : n.inputs) {
          const Tensor& pt = value(p);
          double* gp = ensure(p);
          for (std::size_t i = 0; i < pt.size(); ++i) gp[i] += g.data[off + i];
          off += pt.size();
        }
        break;
      }
      case Op::kSum: {
        const Tensor& x = in(n, 0);
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g.data[0];
        break;
      }
      case Op::kMean: {
        const Tensor& x = in(n, 0);
        double* gx = ensure(n.inputs[0]);
        const double gi = g.data[0] / x.size();
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gi;
        break;
      }
      case Op::kDot: {
        const Tensor& a = in(n, 0);
        const Tensor& b = in(n, 1);
        double* ga = ensure(n.inputs[0]);
        double* gb = ensure(n.inputs[1]);
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga[i] += g.data[0] * b.data[i];
          gb[i] += g.data[0] * a.data[i];
        }
        break;
      }
      case Op::kSoftmax: {
        double* gx = ensure(n.inputs[0]);
        double dotgy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dotgy += g.data[i] * y.data[i];
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx[i] += y.data[i] * (g.data[i] - dotgy);
        }
        break;
      }
      case Op::kWeightedSum: {
        const Tensor& w = in(n, 0);
        double* gwts = ensure(n.inputs[0]);
        for (std::size_t j = 0; j + 1 < n.inputs.size(); ++j) {
          const Tensor& item = in(n, j + 1);
          double* gitem = ensure(n.inputs[j + 1]);
          double gw = 0.0;
          for (std::size_t i = 0; i < item.size(); ++i) {
            gw += g.data[i] * item.data[i];
            gitem[i] += w.data[j] * g.data[i];
          }
          gwts[j] += gw;
        }
        break;
      }
      case Op::kSqrt: {
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          // sqrt has no finite derivative at 0; treat it as 0 there.
          if (y.data[i] > 1e-150) gx[i] += g.data[i] * 0.5 / y.data[i];
        }
        break;
      }
      case Op::kScale: {
        double* gx = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g.data[i] * n.aux;
        break;
      }
      case Op::kBce: {
        double* gx = ensure(n.inputs[0]);
        const double raw = in(n, 0).data[0];
        const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
        // Zero gradient in the clamped region, matching the forward function.
        if (raw > kBceClamp && raw < 1.0 - kBceClamp) {
          gx[0] += g.data[0] * (p - n.aux) / (p * (1.0 - p));
        }
        break;
      }
      case Op::kRow: {
        const Tensor& tt = in(n, 0);
        double* gt = ensure(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gt[n.index * tt.cols() + i] += g.data[i];
        }
        break;
      }
    }
  }

  std::unordered_map<NodeId, Tensor> out;
  for (NodeId p : params_) {
    if (has_grad[p] && p <= loss) {
      out.emplace(p, std::move(grads[p]));
    } else {
      out.emplace(p, Tensor::zeros(value(p).shape));
    }
  }
  return out;
}

}  // namespace askme
