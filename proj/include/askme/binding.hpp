#pragma once

#include <string>
#include <unordered_map>

#include "askme/params.hpp"
#include "askme/tape.hpp"

namespace askme {

// Binds named ParamStore tensors into a tape lazily (one param node per name
// per tape) and maps node gradients back to names after backward().
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  NodeId operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    NodeId id = tape_.param_ref(store_.get(name));
    bound_.emplace(name, id);
    return id;
  }

  // Gradient per bound store name; names never bound into this tape are
  // omitted (their gradient is identically zero).
  std::unordered_map<std::string, Tensor> grads(NodeId loss) const {
    auto node_grads = tape_.backward(loss);
    std::unordered_map<std::string, Tensor> out;
    for (const auto& [name, id] : bound_) {
      out.emplace(name, std::move(node_grads.at(id)));
    }
    return out;
  }

  Tape& tape() { return tape_; }
  const ParamStore& store() const { return store_; }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::unordered_map<std::string, NodeId> bound_;
};

}  // namespace askme
