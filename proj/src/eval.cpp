#include "askme/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "askme/threading.hpp"

namespace askme {

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class RandomScorer final : public CandidateScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  std::vector<double> score(const UserTimeline& train, const TestRecord& test,
                            const std::vector<std::string>& candidates) override {
    (void)train;
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& q : candidates) {
      // Hash of (seed, user, question) so scores are independent of the
      // iteration order.
      std::uint64_t h = splitmix(fnv1a(q, fnv1a(test.user_id, seed_)));
      out.push_back((h >> 11) * 0x1.0p-53);
    }
    return out;
  }

 private:
  std::uint64_t seed_;
};

class PopularityScorer final : public CandidateScorer {
 public:
  explicit PopularityScorer(const std::vector<UserTimeline>& train) {
    for (const auto& tl : train) {
      for (const auto& step : tl.steps) counts_[step.question_id] += 1.0;
    }
  }
  std::string name() const override { return "popularity"; }
  std::vector<double> score(const UserTimeline&, const TestRecord&,
                            const std::vector<std::string>& candidates) override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& q : candidates) {
      auto it = counts_.find(q);
      out.push_back(it == counts_.end() ? 0.0 : it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, double> counts_;
};

class OracleScorer final : public CandidateScorer {
 public:
  std::string name() const override { return "oracle"; }
  std::vector<double> score(const UserTimeline&, const TestRecord& test,
                            const std::vector<std::string>& candidates) override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& q : candidates) out.push_back(q == test.question_id ? 1.0 : 0.0);
    return out;
  }
};

class ModelScorer final : public CandidateScorer {
 public:
  ModelScorer(const Model& model, const PersonalCache* cache)
      : model_(model), cache_(cache) {}
  std::string name() const override { return variant_token(model_.variant); }

  std::vector<double> score(const UserTimeline& train, const TestRecord& test,
                            const std::vector<std::string>& candidates) override {
    const Variant v = model_.variant;
    if (v == Variant::kAskMe || v == Variant::kAskMeB || v == Variant::kAskMeP) {
      // The head vector is candidate-independent for these variants:
      // compute it once, then each candidate costs one dot product.
      Tape tape;
      ParamBinding bind(tape, model_.params);
      PersonalNodes p =
          askme_personal(bind, model_, capped_history(train, model_.cfg.history_cap),
                         test.follows, test.votes);
      NodeId group = (v == Variant::kAskMeB || cache_ == nullptr)
                         ? tape.constant(Tensor::zeros({model_.cfg.hidden()}))
                         : community_group(bind, model_, p.personal, *cache_,
                                           train.user_id);
      NodeId head_personal =
          v == Variant::kAskMeP
              ? tape.constant(Tensor::zeros({model_.cfg.hidden()}))
              : p.personal;
      NodeId head = tape.affine(tape.concat({head_personal, group}),
                                bind("head.w"), bind("head.b4"));
      const Tensor& hv = tape.value(head);
      std::vector<double> out;
      out.reserve(candidates.size());
      for (const auto& q : candidates) {
        out.push_back(1.0 / (1.0 + std::exp(-dot_embedding(hv, q))));
      }
      return out;
    }
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& q : candidates) {
      Tape tape;
      ParamBinding bind(tape, model_.params);
      auto fwd = variant_forward(bind, model_,
                                 capped_history(train, model_.cfg.history_cap),
                                 test.follows, test.votes, q, cache_,
                                 train.user_id);
      out.push_back(tape.value(fwd.yhat).data[0]);
    }
    return out;
  }

 private:
  double dot_embedding(const Tensor& v, const std::string& qid) const {
    const EmbeddingTable& table = *model_.emb;
    const std::size_t r = table.row_of(qid);
    const std::vector<double> fixed = table.fixed_row(r);
    const Tensor& learned = model_.params.get("emb.learned");
    double acc = 0.0;
    for (std::size_t j = 0; j < fixed.size(); ++j) acc += v.data[j] * fixed[j];
    for (std::size_t j = 0; j < learned.cols(); ++j) {
      acc += v.data[fixed.size() + j] * learned.at(r, j);
    }
    return acc;
  }

  const Model& model_;
  const PersonalCache* cache_;
};

}  // namespace

std::unique_ptr<CandidateScorer> make_random_scorer(std::uint64_t seed) {
  return std::make_unique<RandomScorer>(seed);
}

std::unique_ptr<CandidateScorer> make_popularity_scorer(
    const std::vector<UserTimeline>& train) {
  return std::make_unique<PopularityScorer>(train);
}

std::unique_ptr<CandidateScorer> make_oracle_scorer() {
  return std::make_unique<OracleScorer>();
}

std::unique_ptr<CandidateScorer> make_model_scorer(const Model& model,
                                                   const PersonalCache* cache) {
  return std::make_unique<ModelScorer>(model, cache);
}

RankedList rank_candidates(const std::string& user_id,
                           const std::vector<std::string>& candidates,
                           const std::vector<double>& scores,
                           const std::string& positive) {
  if (candidates.size() != scores.size()) {
    throw EvalError("rank_candidates: candidates/scores length mismatch");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw EvalError("rank_candidates: NaN score for user " + user_id +
                      " question " + candidates[i]);
    }
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  RankedList out;
  out.candidates.reserve(order.size());
  out.scores.reserve(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    out.candidates.push_back(candidates[order[rank]]);
    out.scores.push_back(scores[order[rank]]);
    if (candidates[order[rank]] == positive) out.positive_position = rank + 1;
  }
  if (out.positive_position == 0) {
    throw EvalError("rank_candidates: positive " + positive +
                    " missing from candidates of user " + user_id);
  }
  return out;
}

double hr_at_k(const std::vector<std::size_t>& positions, std::size_t k) {
  if (k < 1) throw std::invalid_argument("hr_at_k: K < 1");
  if (positions.empty()) throw std::invalid_argument("hr_at_k: no ranked lists");
  std::size_t hits = 0;
  for (std::size_t p : positions) {
    if (p <= k) ++hits;
  }
  return static_cast<double>(hits) / positions.size();
}

double ndcg_at_k(const std::vector<std::size_t>& positions, std::size_t k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: K < 1");
  if (positions.empty()) throw std::invalid_argument("ndcg_at_k: no ranked lists");
  double acc = 0.0;
  for (std::size_t p : positions) {
    if (p <= k) acc += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  }
  return acc / positions.size();
}

RankingReport evaluate(CandidateScorer& scorer, const Split& split,
                       const std::vector<std::string>& all_questions_sorted,
                       std::size_t negatives, const std::vector<std::size_t>& ks,
                       std::uint64_t seed, int threads) {
  if (split.test.empty()) throw std::invalid_argument("evaluate: empty split");

  std::vector<std::vector<std::string>> answered(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    for (const auto& step : split.train[i].steps) {
      answered[i].push_back(step.question_id);
    }
    answered[i].push_back(split.test[i].question_id);
    std::sort(answered[i].begin(), answered[i].end());
  }

  auto positions = parallel_map(split.test.size(), threads, [&](std::size_t i) {
    const TestRecord& test = split.test[i];
    std::mt19937_64 rng(splitmix(fnv1a(test.user_id, seed)));
    std::vector<std::string> candidates{test.question_id};
    auto negs = sample_negatives(test.user_id, all_questions_sorted, answered[i],
                                 negatives, rng);
    candidates.insert(candidates.end(), negs.begin(), negs.end());
    auto scores = scorer.score(split.train[i], test, candidates);
    return rank_candidates(test.user_id, candidates, scores, test.question_id)
        .positive_position;
  });

  RankingReport report;
  report.ks = ks;
  report.pool_size = negatives + 1;
  report.user_count = split.test.size();
  report.seed = seed;
  report.scorer_name = scorer.name();
  for (std::size_t k : ks) {
    report.hr.push_back(hr_at_k(positions, k));
    report.ndcg.push_back(ndcg_at_k(positions, k));
  }
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    report.positions.emplace_back(split.test[i].user_id, positions[i]);
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_report(const RankingReport& r) {
  std::string out;
  out += "scorer=" + r.scorer_name + " users=" + std::to_string(r.user_count) +
         " pool=" + std::to_string(r.pool_size) + " seed=" + std::to_string(r.seed) +
         "\n";
  out += "K\tHR@K\tNDCG@K\n";
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    out += std::to_string(r.ks[i]) + "\t" + fmt(r.hr[i]) + "\t" + fmt(r.ndcg[i]) + "\n";
  }
  return out;
}

std::string format_report_kv(const RankingReport& r) {
  std::string out;
  out += "scorer=" + r.scorer_name + "\n";
  out += "users=" + std::to_string(r.user_count) + "\n";
  out += "pool=" + std::to_string(r.pool_size) + "\n";
  out += "seed=" + std::to_string(r.seed) + "\n";
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    out += "HR@" + std::to_string(r.ks[i]) + "=" + fmt(r.hr[i]) + "\n";
    out += "NDCG@" + std::to_string(r.ks[i]) + "=" + fmt(r.ndcg[i]) + "\n";
  }
  return out;
}

void write_positions_tsv(const std::string& path, const RankingReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write positions file: " + path);
  for (const auto& [user, pos] : r.positions) {
    out << user << '\t' << pos << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace askme
