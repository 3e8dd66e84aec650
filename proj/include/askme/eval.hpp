#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "askme/corpus.hpp"
#include "askme/model.hpp"

namespace askme {

class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

struct RankedList {
  std::vector<std::string> candidates;  // descending score, ties by id
  std::vector<double> scores;           // aligned, non-increasing
  std::size_t positive_position = 0;    // 1-based
};

struct RankingReport {
  std::vector<std::size_t> ks;
  std::vector<double> hr;    // aligned with ks
  std::vector<double> ndcg;  // aligned with ks
  std::size_t pool_size = 0;  // M + 1
  std::size_t user_count = 0;
  std::uint64_t seed = 0;
  std::string scorer_name;
  std::vector<std::pair<std::string, std::size_t>> positions;  // user, 1-based
};

// Scores one user's candidate list. Implementations may precompute per-user
// state from the train timeline before scoring the candidates.
class CandidateScorer {
 public:
  virtual ~CandidateScorer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> score(const UserTimeline& train,
                                    const TestRecord& test,
                                    const std::vector<std::string>& candidates) = 0;
};

std::unique_ptr<CandidateScorer> make_random_scorer(std::uint64_t seed);
std::unique_ptr<CandidateScorer> make_popularity_scorer(
    const std::vector<UserTimeline>& train);
// Test hook: score 1 for the held-out positive, 0 otherwise.
std::unique_ptr<CandidateScorer> make_oracle_scorer();
std::unique_ptr<CandidateScorer> make_model_scorer(const Model& model,
                                                   const PersonalCache* cache);

// Descending stable sort with lexical question-id tie-break; records the
// 1-based position of the positive. NaN scores raise EvalError naming the
// user and question.
RankedList rank_candidates(const std::string& user_id,
                           const std::vector<std::string>& candidates,
                           const std::vector<double>& scores,
                           const std::string& positive);

// Fraction of users whose positive sits at position <= K.
double hr_at_k(const std::vector<std::size_t>& positions, std::size_t k);
// Mean of 1/log2(1 + position) for hits within K, 0 otherwise (single
// relevant item, so the ideal DCG is 1).
double ndcg_at_k(const std::vector<std::size_t>& positions, std::size_t k);

// Leave-one-out evaluation: per test user, 1 positive + `negatives` sampled
// negatives, scored and ranked; candidate sets are deterministic per
// (seed, user).
RankingReport evaluate(CandidateScorer& scorer, const Split& split,
                       const std::vector<std::string>& all_questions_sorted,
                       std::size_t negatives, const std::vector<std::size_t>& ks,
                       std::uint64_t seed, int threads);

// UTF-8 text table.
std::string format_report(const RankingReport& report);
// Machine-readable flat key-value lines ("HR@10=0.4210").
std::string format_report_kv(const RankingReport& report);
void write_positions_tsv(const std::string& path, const RankingReport& report);

}  // namespace askme
