#pragma once

#include <span>
#include <string>
#include <vector>

#include "askme/binding.hpp"
#include "askme/embedding.hpp"
#include "askme/tape.hpp"

namespace askme {

// Gate weights and biases of one LSTM direction, bound into a tape.
struct LstmNodeIds {
  NodeId w_xi, w_hi, w_xf, w_hf, w_xc, w_hc, w_xo, w_ho;
  NodeId b_i, b_f, b_c, b_o;
};

// Registers the eight weight matrices and four bias vectors under
// `prefix + "."` with Gaussian(0, 0.1) init.
void add_lstm_params(ParamStore& store, GaussianSampler& init,
                     const std::string& prefix, std::size_t input_dim,
                     std::size_t hidden_dim);

LstmNodeIds bind_lstm(ParamBinding& bind, const std::string& prefix);

// One step of the gate algebra:
//   i,f,o = sigmoid(W_x* x + W_h* h + b_*)
//   c = i * tanh(W_xc x + W_hc h + b_c) + f * c_prev
//   h = o * tanh(c)
std::pair<NodeId, NodeId> lstm_cell(Tape& g, NodeId x, NodeId h_prev,
                                    NodeId c_prev, const LstmNodeIds& p);

// Hidden states h_1..h_T of a unidirectional pass (zero initial state).
std::vector<NodeId> lstm_encode(Tape& g, std::span<const NodeId> seq,
                                const LstmNodeIds& p);

// Bi-LSTM with element-wise addition of the forward and reverse hidden
// states, so the hidden dimension is unchanged.
std::vector<NodeId> bilstm_encode(Tape& g, std::span<const NodeId> seq,
                                  const LstmNodeIds& fwd,
                                  const LstmNodeIds& bwd);

struct AttentionNodes {
  NodeId weights = -1;  // softmax over dot(item_j, query); -1 when no items
  NodeId pooled;
};

// Dot-product attention pooling: weights = softmax(items . query),
// pooled = sum_j weights_j * items_j. Throws on empty items.
AttentionNodes attention_pool(Tape& g, const std::vector<NodeId>& items,
                              NodeId query);

// attention_pool over the three behavior channels.
AttentionNodes behavior_attention(Tape& g, NodeId p_ans, NodeId p_fol,
                                  NodeId p_vot, NodeId query);

// Embedding lookup: concat(frozen fixed row, learned row of "emb.learned").
NodeId embed_lookup(ParamBinding& bind, const EmbeddingTable& table,
                    const std::string& question_id);

// attention_pool over a question-id segment embedded through the table; an
// empty segment yields a zero pooled vector (weights = -1).
AttentionNodes segment_pool(ParamBinding& bind, const EmbeddingTable& table,
                            const std::vector<std::string>& segment,
                            NodeId query, std::size_t dim);

}  // namespace askme
