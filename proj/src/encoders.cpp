#include "askme/encoders.hpp"

#include <algorithm>

namespace askme {

void add_lstm_params(ParamStore& store, GaussianSampler& init,
                     const std::string& prefix, std::size_t input_dim,
                     std::size_t hidden_dim) {
  auto mat_x = [&] { return init.tensor({hidden_dim, input_dim}, 0.0, 0.1); };
  auto mat_h = [&] { return init.tensor({hidden_dim, hidden_dim}, 0.0, 0.1); };
  auto bias = [&] { return init.tensor({hidden_dim}, 0.0, 0.1); };
  store.add(prefix + ".w_xi", mat_x());
  store.add(prefix + ".w_hi", mat_h());
  store.add(prefix + ".w_xf", mat_x());
  store.add(prefix + ".w_hf", mat_h());
  store.add(prefix + ".w_xc", mat_x());
  store.add(prefix + ".w_hc", mat_h());
  store.add(prefix + ".w_xo", mat_x());
  store.add(prefix + ".w_ho", mat_h());
  store.add(prefix + ".b_i", bias());
  store.add(prefix + ".b_f", bias());
  store.add(prefix + ".b_c", bias());
  store.add(prefix + ".b_o", bias());
}

LstmNodeIds bind_lstm(ParamBinding& bind, const std::string& prefix) {
  return LstmNodeIds{
      bind(prefix + ".w_xi"), bind(prefix + ".w_hi"), bind(prefix + ".w_xf"),
      bind(prefix + ".w_hf"), bind(prefix + ".w_xc"), bind(prefix + ".w_hc"),
      bind(prefix + ".w_xo"), bind(prefix + ".w_ho"), bind(prefix + ".b_i"),
      bind(prefix + ".b_f"), bind(prefix + ".b_c"), bind(prefix + ".b_o")};
}

std::pair<NodeId, NodeId> lstm_cell(Tape& g, NodeId x, NodeId h_prev,
                                    NodeId c_prev, const LstmNodeIds& p) {
  auto gate = [&](NodeId wx, NodeId wh, NodeId b) {
    return g.add(g.add(g.matvec(wx, x), g.matvec(wh, h_prev)), b);
  };
  NodeId i = g.sigmoid(gate(p.w_xi, p.w_hi, p.b_i));
  NodeId f = g.sigmoid(gate(p.w_xf, p.w_hf, p.b_f));
  NodeId o = g.sigmoid(gate(p.w_xo, p.w_ho, p.b_o));
  NodeId cand = g.tanh(gate(p.w_xc, p.w_hc, p.b_c));
  NodeId c = g.add(g.mul(i, cand), g.mul(f, c_prev));
  NodeId h = g.mul(o, g.tanh(c));
  return {h, c};
}

std::vector<NodeId> lstm_encode(Tape& g, std::span<const NodeId> seq,
                                const LstmNodeIds& p) {
  if (seq.empty()) throw std::invalid_argument("lstm_encode: empty sequence");
  const std::size_t hidden = g.value(p.b_i).size();
  NodeId h = g.constant(Tensor::zeros({hidden}));
  NodeId c = g.constant(Tensor::zeros({hidden}));
  std::vector<NodeId> states;
  states.reserve(seq.size());
  for (NodeId x : seq) {
    std::tie(h, c) = lstm_cell(g, x, h, c, p);
    states.push_back(h);
  }
  return states;
}

std::vector<NodeId> bilstm_encode(Tape& g, std::span<const NodeId> seq,
                                  const LstmNodeIds& fwd,
                                  const LstmNodeIds& bwd) {
  if (seq.empty()) throw std::invalid_argument("bilstm_encode: empty sequence");
  std::vector<NodeId> forward = lstm_encode(g, seq, fwd);
  std::vector<NodeId> reversed(seq.rbegin(), seq.rend());
  std::vector<NodeId> backward = lstm_encode(g, reversed, bwd);
  std::vector<NodeId> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out[i] = g.add(forward[i], backward[seq.size() - 1 - i]);
  }
  return out;
}

AttentionNodes attention_pool(Tape& g, const std::vector<NodeId>& items,
                              NodeId query) {
  if (items.empty()) throw std::invalid_argument("attention_pool: empty items");
  std::vector<NodeId> logits;
  logits.reserve(items.size());
  for (NodeId item : items) logits.push_back(g.dot(item, query));
  NodeId weights = g.softmax(g.concat(logits));
  NodeId pooled = g.weighted_sum(weights, items);
  return {weights, pooled};
}

AttentionNodes behavior_attention(Tape& g, NodeId p_ans, NodeId p_fol,
                                  NodeId p_vot, NodeId query) {
  return attention_pool(g, {p_ans, p_fol, p_vot}, query);
}

NodeId embed_lookup(ParamBinding& bind, const EmbeddingTable& table,
                    const std::string& question_id) {
  Tape& g = bind.tape();
  const std::size_t r = table.row_of(question_id);
  NodeId fixed = g.constant(Tensor::vec(table.fixed_row(r)));
  NodeId learned = g.row(bind("emb.learned"), r);
  return g.concat({fixed, learned});
}

AttentionNodes segment_pool(ParamBinding& bind, const EmbeddingTable& table,
                            const std::vector<std::string>& segment,
                            NodeId query, std::size_t dim) {
  Tape& g = bind.tape();
  if (segment.empty()) {
    return {-1, g.constant(Tensor::zeros({dim}))};
  }
  std::vector<NodeId> items;
  items.reserve(segment.size());
  for (const auto& qid : segment) items.push_back(embed_lookup(bind, table, qid));
  return attention_pool(g, items, query);
}

}  // namespace askme
