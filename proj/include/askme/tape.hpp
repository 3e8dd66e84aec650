#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "askme/tensor.hpp"

namespace askme {

using NodeId = int;

// Tape-style computation record: nodes are appended in topological order as
// the forward pass runs (eager evaluation), then backward() replays the tape
// in reverse. One tape per batch/instance; never shared across threads.
class Tape {
 public:
  NodeId constant(Tensor t);
  NodeId param(Tensor t);
  // Parameter node backed by external storage (no copy). The referenced
  // tensor must outlive the tape and stay unmodified while it is in use.
  NodeId param_ref(const Tensor& t);

  // y = W x, W: [m,n], x: [n]
  NodeId matvec(NodeId w, NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId softmax(NodeId a);
  // out = sum_j weights[j] * items[j]; weights: [k], items: k vectors of equal
  // length.
  NodeId weighted_sum(NodeId weights, const std::vector<NodeId>& items);
  NodeId sqrt(NodeId a);
  NodeId scale(NodeId a, double c);
  // Binary cross-entropy of a scalar probability against label y, with the
  // probability clamped to [1e-12, 1-1e-12] before the logs.
  NodeId bce(NodeId yhat, double y);
  // Row r of a matrix, as a vector.
  NodeId row(NodeId table, std::size_t r);

  // affine(x, W, b) = W x + b
  NodeId affine(NodeId x, NodeId w, NodeId b);

  const Tensor& value(NodeId id) const {
    const Node& n = nodes_[id];
    return n.ref != nullptr ? *n.ref : n.value;
  }
  bool is_param(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Gradient of the scalar loss node w.r.t. every param node; params not
  // reachable from the loss get zero tensors.
  std::unordered_map<NodeId, Tensor> backward(NodeId loss) const;

 private:
  enum class Op {
    kConstant,
    kParam,
    kMatVec,
    kAdd,
    kSub,
    kMul,
    kSigmoid,
    kTanh,
    kRelu,
    kConcat,
    kSum,
    kMean,
    kDot,
    kSoftmax,
    kWeightedSum,
    kSqrt,
    kScale,
    kBce,
    kRow,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    const Tensor* ref = nullptr;  // external storage for param_ref nodes
    double aux = 0.0;             // scale factor, bce label, row index
    std::size_t index = 0;        // row index for kRow
  };

  NodeId push(Node n, const char* opname);
  const Tensor& in(const Node& n, std::size_t i) const {
    return value(n.inputs[i]);
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
};

}  // namespace askme
