#include "askme/model.hpp"

#include <algorithm>
#include <numeric>

namespace askme {

std::optional<Variant> parse_variant(const std::string& token) {
  if (token == "MultiView") return Variant::kMultiView;
  if (token == "AskMe_A") return Variant::kAskMeA;
  if (token == "AskMe_M") return Variant::kAskMeM;
  if (token == "AskMe_B") return Variant::kAskMeB;
  if (token == "AskMe_P") return Variant::kAskMeP;
  if (token == "AskMe_MP") return Variant::kAskMeMP;
  if (token == "AskMe") return Variant::kAskMe;
  return std::nullopt;
}

const char* variant_token(Variant v) {
  switch (v) {
    case Variant::kMultiView: return "MultiView";
    case Variant::kAskMeA: return "AskMe_A";
    case Variant::kAskMeM: return "AskMe_M";
    case Variant::kAskMeB: return "AskMe_B";
    case Variant::kAskMeP: return "AskMe_P";
    case Variant::kAskMeMP: return "AskMe_MP";
    case Variant::kAskMe: return "AskMe";
  }
  return "?";
}

const std::array<Variant, 7>& all_variants() {
  static const std::array<Variant, 7> v = {
      Variant::kMultiView, Variant::kAskMeA, Variant::kAskMeM,
      Variant::kAskMeB,    Variant::kAskMeP, Variant::kAskMeMP,
      Variant::kAskMe};
  return v;
}

bool variant_uses_community(Variant v) {
  return v == Variant::kAskMe || v == Variant::kAskMeP || v == Variant::kAskMeMP;
}

bool variant_uses_timesteps(Variant v) {
  return v == Variant::kAskMe || v == Variant::kAskMeB || v == Variant::kAskMeP;
}

Model::Model(Variant variant, ModelConfig cfg,
             std::shared_ptr<EmbeddingTable> emb, std::uint64_t init_seed)
    : variant(variant), cfg(cfg), emb(std::move(emb)) {
  if (this->emb->fixed_dim() != cfg.fixed_dim) {
    throw ShapeError("Model: embedding file has " +
                     std::to_string(this->emb->fixed_dim()) +
                     " fixed dims, config expects " +
                     std::to_string(cfg.fixed_dim));
  }
  const std::size_t h = cfg.hidden();
  GaussianSampler init(init_seed);
  params.add("emb.learned",
             init.tensor({this->emb->question_count(), cfg.learned_dim}, 0.0, 0.1));
  add_lstm_params(params, init, "ans_fwd", h, h);
  add_lstm_params(params, init, "ans_bwd", h, h);
  params.add("mv.w", init.tensor({2 * h}, 0.0, 0.1));
  params.add("mv.b", init.tensor({1}, 0.0, 0.1));
  add_lstm_params(params, init, "outer", h, h);
  add_lstm_params(params, init, "inner_fwd", h, h);
  add_lstm_params(params, init, "inner_bwd", h, h);
  params.add("proj.w", init.tensor({h, 4 * h}, 0.0, 0.1));
  params.add("proj.b", init.tensor({h}, 0.0, 0.1));
  params.add("head.w", init.tensor({h, 2 * h}, 0.0, 0.1));
  params.add("head.b4", init.tensor({h}, 0.0, 0.1));
}

Model::Model(Variant variant, ModelConfig cfg,
             std::shared_ptr<EmbeddingTable> emb, ParamStore p)
    : variant(variant), cfg(cfg), emb(std::move(emb)), params(std::move(p)) {}

const Tensor* PersonalCache::find(const std::string& user_id) const {
  auto it = std::lower_bound(user_ids.begin(), user_ids.end(), user_id);
  if (it == user_ids.end() || *it != user_id) return nullptr;
  return &vectors[static_cast<std::size_t>(it - user_ids.begin())];
}

MultiViewNodes multiview_forward(ParamBinding& bind, const Model& model,
                                 std::span<const std::string> history,
                                 const std::vector<std::string>& follows,
                                 const std::vector<std::string>& votes,
                                 const std::string& target, bool answers_only) {
  if (history.empty()) {
    throw std::invalid_argument("multiview_forward: empty answer history");
  }
  Tape& g = bind.tape();
  const std::size_t h = model.cfg.hidden();
  const EmbeddingTable& table = *model.emb;

  std::vector<NodeId> embeds;
  embeds.reserve(history.size());
  for (const auto& qid : history) embeds.push_back(embed_lookup(bind, table, qid));
  LstmNodeIds fwd = bind_lstm(bind, "ans_fwd");
  LstmNodeIds bwd = bind_lstm(bind, "ans_bwd");
  NodeId p_ans = bilstm_encode(g, embeds, fwd, bwd).back();

  NodeId q = embed_lookup(bind, table, target);
  NodeId p_u;
  NodeId alphas = -1;
  if (answers_only) {
    p_u = p_ans;
  } else {
    NodeId p_fol = segment_pool(bind, table, follows, q, h).pooled;
    NodeId p_vot = segment_pool(bind, table, votes, q, h).pooled;
    AttentionNodes att = behavior_attention(g, p_ans, p_fol, p_vot, q);
    p_u = att.pooled;
    alphas = att.weights;
  }
  NodeId logit = g.add(g.dot(bind("mv.w"), g.concat({p_u, q})), bind("mv.b"));
  return {g.sigmoid(logit), alphas};
}

PersonalNodes askme_personal(ParamBinding& bind, const Model& model,
                             std::span<const AnswerStep> history,
                             const std::vector<std::string>& next_follows,
                             const std::vector<std::string>& next_votes) {
  if (history.empty()) {
    throw std::invalid_argument("askme_personal: empty answer history");
  }
  Tape& g = bind.tape();
  const std::size_t h = model.cfg.hidden();
  const EmbeddingTable& table = *model.emb;
  const std::size_t steps = history.size();

  std::vector<NodeId> embeds;
  embeds.reserve(steps);
  for (const auto& step : history) {
    embeds.push_back(embed_lookup(bind, table, step.question_id));
  }
  std::vector<NodeId> hidden = lstm_encode(g, embeds, bind_lstm(bind, "outer"));

  PersonalNodes out;
  out.h_last = hidden.back();

  std::vector<NodeId> fused;
  fused.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const bool last = (t + 1 == steps);
    // Query: embedding of the next answer if known, else the current state.
    NodeId query = last ? out.h_last : embeds[t + 1];
    const auto& fol = last ? next_follows : history[t + 1].follows;
    const auto& vot = last ? next_votes : history[t + 1].votes;
    NodeId pfol = segment_pool(bind, table, fol, query, h).pooled;
    NodeId pvot = segment_pool(bind, table, vot, query, h).pooled;
    AttentionNodes att = behavior_attention(g, hidden[t], pfol, pvot, query);
    fused.push_back(att.pooled);
    const Tensor& w = g.value(att.weights);
    out.step_alphas.push_back({w.data[0], w.data[1], w.data[2]});
    if (last) {
      out.pfol_next = pfol;
      out.pvot_next = pvot;
    }
  }

  NodeId h2 = bilstm_encode(g, fused, bind_lstm(bind, "inner_fwd"),
                            bind_lstm(bind, "inner_bwd"))
                  .back();
  NodeId cat = g.concat({h2, out.h_last, out.pfol_next, out.pvot_next});
  out.personal = g.relu(g.affine(cat, bind("proj.w"), bind("proj.b")));
  return out;
}

NodeId community_group(ParamBinding& bind, const Model& model, NodeId personal,
                       const PersonalCache& cache, const std::string& self_user) {
  Tape& g = bind.tape();
  const Tensor& pv = g.value(personal);

  // Rank other users by dot-product similarity on forward values; ties keep
  // user-id order (the cache is sorted by user-id).
  struct Scored {
    double omega;
    std::size_t idx;
  };
  std::vector<Scored> scored;
  scored.reserve(cache.user_ids.size());
  for (std::size_t i = 0; i < cache.user_ids.size(); ++i) {
    if (cache.user_ids[i] == self_user) continue;
    double omega = 0.0;
    for (std::size_t d = 0; d < pv.size(); ++d) {
      omega += pv.data[d] * cache.vectors[i].data[d];
    }
    scored.push_back({omega, i});
  }
  if (scored.empty()) {
    return g.constant(Tensor::zeros(pv.shape));
  }
  const std::size_t n = std::min(model.cfg.n_similar, scored.size());
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.omega > b.omega; });
  scored.resize(n);

  std::vector<NodeId> omegas;
  std::vector<NodeId> items;
  omegas.reserve(n);
  items.reserve(n);
  for (const Scored& s : scored) {
    NodeId item = g.constant(cache.vectors[s.idx]);
    omegas.push_back(g.dot(personal, item));
    items.push_back(item);
  }
  NodeId weights = g.concat(omegas);
  if (model.cfg.group_softmax) weights = g.softmax(weights);
  return g.weighted_sum(weights, items);
}

NodeId askme_predict(ParamBinding& bind, const Model& model, NodeId personal,
                     NodeId group, const std::string& target) {
  Tape& g = bind.tape();
  NodeId v = g.affine(g.concat({personal, group}), bind("head.w"), bind("head.b4"));
  NodeId q = embed_lookup(bind, *model.emb, target);
  return g.sigmoid(g.dot(v, q));
}

NodeId personal_group_gap(Tape& g, NodeId personal, NodeId group) {
  NodeId d = g.sub(personal, group);
  return g.sqrt(g.sum(g.mul(d, d)));
}

namespace {

std::vector<std::string> history_qids(std::span<const AnswerStep> history) {
  std::vector<std::string> out;
  out.reserve(history.size());
  for (const auto& s : history) out.push_back(s.question_id);
  return out;
}

}  // namespace

ForwardNodes variant_forward(ParamBinding& bind, const Model& model,
                             std::span<const AnswerStep> history,
                             const std::vector<std::string>& next_follows,
                             const std::vector<std::string>& next_votes,
                             const std::string& target,
                             const PersonalCache* cache,
                             const std::string& self_user) {
  Tape& g = bind.tape();
  ForwardNodes out;
  switch (model.variant) {
    case Variant::kMultiView:
    case Variant::kAskMeM: {
      auto mv = multiview_forward(bind, model, history_qids(history),
                                  next_follows, next_votes, target);
      out.yhat = mv.yhat;
      return out;
    }
    case Variant::kAskMeA: {
      auto mv = multiview_forward(bind, model, history_qids(history),
                                  next_follows, next_votes, target,
                                  /*answers_only=*/true);
      out.yhat = mv.yhat;
      return out;
    }
    case Variant::kAskMeB: {
      PersonalNodes p = askme_personal(bind, model, history, next_follows, next_votes);
      out.personal = p.personal;
      out.group = g.constant(Tensor::zeros({model.cfg.hidden()}));
      out.step_alphas = std::move(p.step_alphas);
      out.yhat = askme_predict(bind, model, out.personal, out.group, target);
      return out;
    }
    case Variant::kAskMe:
    case Variant::kAskMeP: {
      PersonalNodes p = askme_personal(bind, model, history, next_follows, next_votes);
      out.personal = p.personal;
      out.step_alphas = std::move(p.step_alphas);
      if (cache != nullptr) {
        out.group = community_group(bind, model, out.personal, *cache, self_user);
      } else {
        out.group = g.constant(Tensor::zeros({model.cfg.hidden()}));
      }
      NodeId head_personal = out.personal;
      if (model.variant == Variant::kAskMeP) {
        // Community-only: the personal block of the head input is zeroed;
        // personal still drives the similarity lookup.
        head_personal = g.constant(Tensor::zeros({model.cfg.hidden()}));
      }
      out.yhat = askme_predict(bind, model, head_personal, out.group, target);
      return out;
    }
    case Variant::kAskMeMP: {
      // Multi-view personal representation plus the community term; the
      // cache holds answer-sequence states (see cache_vector).
      const std::size_t h = model.cfg.hidden();
      std::vector<std::string> qids = history_qids(history);
      std::vector<NodeId> embeds;
      embeds.reserve(qids.size());
      for (const auto& qid : qids) embeds.push_back(embed_lookup(bind, *model.emb, qid));
      NodeId p_ans = bilstm_encode(g, embeds, bind_lstm(bind, "ans_fwd"),
                                   bind_lstm(bind, "ans_bwd"))
                         .back();
      NodeId q = embed_lookup(bind, *model.emb, target);
      NodeId p_fol = segment_pool(bind, *model.emb, next_follows, q, h).pooled;
      NodeId p_vot = segment_pool(bind, *model.emb, next_votes, q, h).pooled;
      NodeId p_u = behavior_attention(g, p_ans, p_fol, p_vot, q).pooled;
      out.personal = p_ans;
      if (cache != nullptr) {
        out.group = community_group(bind, model, p_ans, *cache, self_user);
      } else {
        out.group = g.constant(Tensor::zeros({h}));
      }
      out.yhat = askme_predict(bind, model, p_u, out.group, target);
      return out;
    }
  }
  throw std::invalid_argument("variant_forward: unknown variant");
}

NodeId cache_vector(ParamBinding& bind, const Model& model,
                    std::span<const AnswerStep> history,
                    const std::vector<std::string>& next_follows,
                    const std::vector<std::string>& next_votes) {
  if (model.variant == Variant::kAskMeMP) {
    Tape& g = bind.tape();
    std::vector<NodeId> embeds;
    embeds.reserve(history.size());
    for (const auto& s : history) {
      embeds.push_back(embed_lookup(bind, *model.emb, s.question_id));
    }
    return bilstm_encode(g, embeds, bind_lstm(bind, "ans_fwd"),
                         bind_lstm(bind, "ans_bwd"))
        .back();
  }
  return askme_personal(bind, model, history, next_follows, next_votes).personal;
}

NodeId batch_cross_entropy(Tape& g, const std::vector<NodeId>& yhats,
                           const std::vector<double>& labels) {
  if (yhats.empty() || yhats.size() != labels.size()) {
    throw std::invalid_argument("batch_cross_entropy: empty or mismatched batch");
  }
  std::vector<NodeId> losses;
  losses.reserve(yhats.size());
  for (std::size_t i = 0; i < yhats.size(); ++i) {
    losses.push_back(g.bce(yhats[i], labels[i]));
  }
  return g.mean(g.concat(losses));
}

std::span<const AnswerStep> capped_history(const UserTimeline& tl,
                                           std::size_t cap) {
  return capped_prefix(tl, tl.steps.size(), cap);
}

std::span<const AnswerStep> capped_prefix(const UserTimeline& tl,
                                          std::size_t end, std::size_t cap) {
  std::size_t start = 0;
  if (cap > 0 && end > cap) start = end - cap;
  return std::span<const AnswerStep>(tl.steps.data() + start, end - start);
}

}  // namespace askme
