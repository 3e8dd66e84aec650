#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "askme/binding.hpp"
#include "askme/corpus.hpp"
#include "askme/embedding.hpp"
#include "askme/encoders.hpp"

namespace askme {

enum class Variant {
  kMultiView,
  kAskMeA,
  kAskMeM,
  kAskMeB,
  kAskMeP,
  kAskMeMP,
  kAskMe,
};

std::optional<Variant> parse_variant(const std::string& token);
const char* variant_token(Variant v);
const std::array<Variant, 7>& all_variants();
// True for variants whose prediction uses the similar-user group vector.
bool variant_uses_community(Variant v);
// True for variants with the per-timestep (individual-level) interaction.
bool variant_uses_timesteps(Variant v);

struct ModelConfig {
  std::size_t fixed_dim = 100;
  std::size_t learned_dim = 28;
  std::size_t segment_cap = 5;
  std::size_t n_similar = 5;
  double lambda = 0.01;
  std::size_t history_cap = 0;  // 0 = unlimited
  bool group_softmax = true;    // raw-weight mode when false
  std::size_t hidden() const { return fixed_dim + learned_dim; }
};

// All trainable tensors for every variant, plus the shared embedding table.
class Model {
 public:
  Model(Variant variant, ModelConfig cfg, std::shared_ptr<EmbeddingTable> emb,
        std::uint64_t init_seed);
  Model(Variant variant, ModelConfig cfg, std::shared_ptr<EmbeddingTable> emb,
        ParamStore params);

  Variant variant;
  ModelConfig cfg;
  std::shared_ptr<EmbeddingTable> emb;
  ParamStore params;
};

// Epoch snapshot of every user's personal vector, sorted by user-id.
struct PersonalCache {
  std::vector<std::string> user_ids;
  std::vector<Tensor> vectors;

  const Tensor* find(const std::string& user_id) const;
};

// ---- Multi-View path ----

struct MultiViewNodes {
  NodeId yhat;    // scalar probability
  NodeId alphas;  // behavior-level attention weights [3]
};

// p_ans from the answer Bi-LSTM's last state, p_fol/p_vot from attention
// pooling against the target embedding, fused by behavior-level attention,
// then yhat = sigmoid(w . [p_u; q_i] + b). Empty segments pool to the zero
// vector.
MultiViewNodes multiview_forward(ParamBinding& bind, const Model& model,
                                 std::span<const std::string> history,
                                 const std::vector<std::string>& follows,
                                 const std::vector<std::string>& votes,
                                 const std::string& target,
                                 bool answers_only = false);

// ---- AskMe path ----

struct PersonalNodes {
  NodeId personal;
  NodeId h_last;      // outer LSTM final hidden state
  NodeId pfol_next;   // pooled follow segment preceding the prediction target
  NodeId pvot_next;
  // Per-timestep behavior-attention weights over {answer-state, follow, vote}.
  std::vector<std::array<double, 3>> step_alphas;
};

// Individual-level interaction: outer LSTM over answer embeddings; per step a
// fused vector from behavior attention over {h_t, pooled follows, pooled
// votes}; inner Bi-LSTM over the fused sequence; then
// personal = ReLU(W2 [h2; h_T; pfol; pvot] + b2).
// For steps with a known next answer the attention query is that answer's
// embedding; the final step (next answer unknown) queries with h_T.
PersonalNodes askme_personal(ParamBinding& bind, const Model& model,
                             std::span<const AnswerStep> history,
                             const std::vector<std::string>& next_follows,
                             const std::vector<std::string>& next_votes);

// Similarity-weighted pooling of the top-N most similar cached users
// (dot-product similarity, target user excluded, ties by user-id order).
// Selected weights are softmax-normalized unless cfg.group_softmax is false.
NodeId community_group(ParamBinding& bind, const Model& model, NodeId personal,
                       const PersonalCache& cache, const std::string& self_user);

// yhat = sigmoid((W [personal; group] + b4) . q_i)
NodeId askme_predict(ParamBinding& bind, const Model& model, NodeId personal,
                     NodeId group, const std::string& target);

// L2 norm of personal - group (the regularizer body of the training loss).
NodeId personal_group_gap(Tape& g, NodeId personal, NodeId group);

// ---- Variant dispatch ----

struct ForwardNodes {
  NodeId yhat;
  NodeId personal = -1;
  NodeId group = -1;
  std::vector<std::array<double, 3>> step_alphas;
};

// One scoring pass for any variant. `cache` may be null for variants that do
// not use the community term. `history` must be pre-capped by the caller.
ForwardNodes variant_forward(ParamBinding& bind, const Model& model,
                             std::span<const AnswerStep> history,
                             const std::vector<std::string>& next_follows,
                             const std::vector<std::string>& next_votes,
                             const std::string& target,
                             const PersonalCache* cache,
                             const std::string& self_user);

// The variant's cache vector for similarity lookups (target-independent).
NodeId cache_vector(ParamBinding& bind, const Model& model,
                    std::span<const AnswerStep> history,
                    const std::vector<std::string>& next_follows,
                    const std::vector<std::string>& next_votes);

// Mean binary cross-entropy over a batch of scalar predictions.
NodeId batch_cross_entropy(Tape& g, const std::vector<NodeId>& yhats,
                           const std::vector<double>& labels);

// Applies the history cap: the most recent `cap` steps (0 = all).
std::span<const AnswerStep> capped_history(const UserTimeline& tl,
                                           std::size_t cap);
std::span<const AnswerStep> capped_prefix(const UserTimeline& tl,
                                          std::size_t end, std::size_t cap);

}  // namespace askme
