#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "askme/eval.hpp"

using namespace askme;

TEST_CASE("ranking sorts by score with lexical ties and finds the positive") {
  SUBCASE("plain descending order") {
    RankedList r = rank_candidates("u", {"qa", "qb", "qc"}, {0.1, 0.9, 0.5}, "qc");
    CHECK(r.candidates == std::vector<std::string>{"qb", "qc", "qa"});
    CHECK(r.positive_position == 2);
  }
  SUBCASE("ties break toward the lexically smaller question id") {
    RankedList r = rank_candidates("u", {"qz", "qa", "qm"}, {0.5, 0.5, 0.5}, "qz");
    CHECK(r.candidates == std::vector<std::string>{"qa", "qm", "qz"});
    CHECK(r.positive_position == 3);
  }
  SUBCASE("NaN scores raise an error naming the user and question") {
    CHECK_THROWS_WITH_AS(
        rank_candidates("u7", {"qa", "qb"},
                        {0.1, std::numeric_limits<double>::quiet_NaN()}, "qa"),
        doctest::Contains("u7"), EvalError);
    CHECK_THROWS_WITH_AS(
        rank_candidates("u7", {"qa", "qb"},
                        {0.1, std::numeric_limits<double>::quiet_NaN()}, "qa"),
        doctest::Contains("qb"), EvalError);
  }
  SUBCASE("missing positive and length mismatch are errors") {
    CHECK_THROWS_AS(rank_candidates("u", {"qa"}, {0.5}, "qz"), EvalError);
    CHECK_THROWS_AS(rank_candidates("u", {"qa", "qb"}, {0.5}, "qa"), EvalError);
  }
  SUBCASE("agrees with an argsort oracle on random instances") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 2 + rng() % 20;
      std::vector<std::string> cands;
      std::vector<double> scores;
      for (std::size_t i = 0; i < n; ++i) {
        cands.push_back("q" + std::to_string(100 + i));
        // Quantized scores so ties actually occur.
        scores.push_back(std::round(u(rng) * 4.0) / 4.0);
      }
      RankedList r = rank_candidates("u", cands, scores, cands[rng() % n]);
      for (std::size_t i = 1; i < n; ++i) {
        bool ordered = r.scores[i - 1] > r.scores[i] ||
                       (r.scores[i - 1] == r.scores[i] &&
                        r.candidates[i - 1] < r.candidates[i]);
        CHECK(ordered);
      }
    }
  }
}

TEST_CASE("hit rate counts positives ranked at or above K") {
  std::vector<std::size_t> positions = {1, 2, 11, 50, 3, 99, 7, 30, 12, 100};
  CHECK(hr_at_k(positions, 10) == doctest::Approx(0.4));
  CHECK(hr_at_k(positions, 1) == doctest::Approx(0.1));
  CHECK(hr_at_k(positions, 100) == doctest::Approx(1.0));
  CHECK_THROWS_AS(hr_at_k(positions, 0), std::invalid_argument);
  CHECK_THROWS_AS(hr_at_k({}, 10), std::invalid_argument);
}

TEST_CASE("discounted gain: position 1 scores 1, position 3 scores 0.5") {
  CHECK(ndcg_at_k({1}, 10) == 1.0);
  CHECK(ndcg_at_k({3}, 10) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ndcg_at_k({11}, 10) == 0.0);

  SUBCASE("matches an extended-precision oracle") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::size_t> pos;
      for (int i = 0; i < 40; ++i) pos.push_back(1 + rng() % 100);
      for (std::size_t k : {std::size_t{5}, std::size_t{10}, std::size_t{50}}) {
        long double acc = 0.0L;
        for (std::size_t p : pos) {
          if (p <= k) acc += 1.0L / log2l(static_cast<long double>(p) + 1.0L);
        }
        double want = static_cast<double>(acc / pos.size());
        CHECK(ndcg_at_k(pos, k) == doctest::Approx(want).epsilon(1e-12));
        // The discount is at most 1, so the gain never exceeds the hit rate.
        CHECK(ndcg_at_k(pos, k) <= hr_at_k(pos, k) + 1e-15);
      }
    }
  }
  SUBCASE("monotone non-decreasing in K") {
    std::vector<std::size_t> pos = {1, 4, 9, 16, 25, 36};
    double prev = 0.0;
    for (std::size_t k = 1; k <= 40; ++k) {
      double v = ndcg_at_k(pos, k);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

namespace {

// A split with `users` test users, two train answers each, over a question
// universe "q000".."q(n-1)".
Split synthetic_split(std::size_t users, std::size_t questions) {
  Split split;
  auto qname = [](std::size_t i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "q%03zu", i);
    return std::string(buf);
  };
  for (std::size_t u = 0; u < users; ++u) {
    UserTimeline tl;
    tl.user_id = "user" + std::to_string(1000 + u);
    tl.steps.push_back({qname(u % questions), 1, {}, {}});
    tl.steps.push_back({qname((u + 1) % questions), 2, {}, {}});
    split.train.push_back(tl);
    split.test.push_back(
        {tl.user_id, qname((u + 2) % questions), {}, {}});
  }
  return split;
}

std::vector<std::string> question_universe(std::size_t n) {
  std::vector<std::string> all;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "q%03zu", i);
    all.emplace_back(buf);
  }
  return all;
}

}  // namespace

TEST_CASE("an oracle scorer produces a perfect ranking") {
  Split split = synthetic_split(25, 120);
  auto all = question_universe(120);
  auto scorer = make_oracle_scorer();
  RankingReport r = evaluate(*scorer, split, all, 99, {1, 10}, 3, 1);
  CHECK(r.user_count == 25);
  CHECK(r.pool_size == 100);
  CHECK(r.hr[0] == 1.0);
  CHECK(r.ndcg[0] == 1.0);
  for (const auto& [user, pos] : r.positions) CHECK(pos == 1);
}

TEST_CASE("a random scorer hits at roughly K over pool size") {
  Split split = synthetic_split(400, 200);
  auto all = question_universe(200);
  auto scorer = make_random_scorer(11);
  RankingReport r = evaluate(*scorer, split, all, 99, {10}, 11, 1);
  // Expected 0.10; binomial sd over 400 users is ~0.015.
  CHECK(r.hr[0] > 0.04);
  CHECK(r.hr[0] < 0.16);
}

TEST_CASE("popularity scoring counts train answers") {
  Split split = synthetic_split(6, 50);
  // Make q007 answered by everyone.
  for (auto& tl : split.train) tl.steps.push_back({"q007", 9, {}, {}});
  auto scorer = make_popularity_scorer(split.train);
  auto scores = scorer->score(split.train[0], split.test[0],
                              {"q007", "q000", "q049"});
  CHECK(scores[0] == 6.0);
  CHECK(scores[1] >= 1.0);
  CHECK(scores[2] == 0.0);  // never answered
}

TEST_CASE("evaluation is deterministic and thread-count independent") {
  Split split = synthetic_split(60, 150);
  auto all = question_universe(150);
  auto run = [&](std::uint64_t seed, int threads) {
    auto scorer = make_random_scorer(7);
    return evaluate(*scorer, split, all, 49, {5, 10}, seed, threads);
  };
  RankingReport a = run(3, 1);
  RankingReport b = run(3, 1);
  RankingReport c = run(3, 4);
  CHECK(a.positions == b.positions);
  CHECK(a.positions == c.positions);
  CHECK(a.hr == c.hr);
  CHECK(a.ndcg == c.ndcg);
  // A different seed draws different negative pools.
  CHECK(run(4, 1).positions != a.positions);
}

TEST_CASE("candidate pools never contain the user's answered questions") {
  Split split = synthetic_split(10, 30);
  auto all = question_universe(30);

  // A scorer that records every candidate it sees.
  struct Spy final : CandidateScorer {
    std::vector<std::pair<std::string, std::vector<std::string>>> seen;
    std::string name() const override { return "spy"; }
    std::vector<double> score(const UserTimeline&, const TestRecord& test,
                              const std::vector<std::string>& c) override {
      seen.emplace_back(test.user_id, c);
      std::vector<double> s(c.size(), 0.0);
      s[0] = 1.0;
      return s;
    }
  } spy;
  evaluate(spy, split, all, 20, {10}, 1, 1);
  REQUIRE(spy.seen.size() == 10);
  for (std::size_t i = 0; i < spy.seen.size(); ++i) {
    const auto& cands = spy.seen[i].second;
    CHECK(cands.size() == 21);
    CHECK(cands[0] == split.test[i].question_id);
    for (std::size_t j = 1; j < cands.size(); ++j) {
      for (const auto& step : split.train[i].steps) {
        CHECK(cands[j] != step.question_id);
      }
      CHECK(cands[j] != split.test[i].question_id);
    }
    // No duplicates within a pool.
    auto sorted = cands;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("report formatting carries all metrics") {
  Split split = synthetic_split(5, 40);
  auto all = question_universe(40);
  auto scorer = make_oracle_scorer();
  RankingReport r = evaluate(*scorer, split, all, 9, {1, 5}, 2, 1);
  std::string kv = format_report_kv(r);
  CHECK(kv.find("scorer=oracle\n") != std::string::npos);
  CHECK(kv.find("HR@1=1.000000\n") != std::string::npos);
  CHECK(kv.find("NDCG@5=1.000000\n") != std::string::npos);
  CHECK(kv.find("pool=10\n") != std::string::npos);
  std::string table = format_report(r);
  CHECK(table.find("K\tHR@K\tNDCG@K") != std::string::npos);
}

namespace {

std::shared_ptr<EmbeddingTable> eval_table(std::size_t questions,
                                           std::size_t fixed_dim) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<std::string> ids;
  std::vector<std::vector<float>> fixed;
  for (std::size_t i = 0; i < questions; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "q%03zu", i);
    ids.emplace_back(buf);
    std::vector<float> row(fixed_dim);
    for (float& v : row) v = u(rng);
    fixed.push_back(std::move(row));
  }
  return std::make_shared<EmbeddingTable>(std::move(ids), std::move(fixed));
}

}  // namespace

TEST_CASE("model scoring fast path agrees with the full forward pass") {
  auto emb = eval_table(12, 3);
  ModelConfig cfg;
  cfg.fixed_dim = 3;
  cfg.learned_dim = 2;
  cfg.n_similar = 2;

  UserTimeline train;
  train.user_id = "u_eval";
  train.steps = {{"q000", 1, {"q003"}, {}}, {"q001", 2, {}, {"q004"}}};
  TestRecord test{"u_eval", "q002", {"q005"}, {}};
  std::vector<std::string> cands = {"q002", "q006", "q007", "q008"};

  for (Variant v : {Variant::kAskMe, Variant::kAskMeB, Variant::kAskMeP,
                    Variant::kMultiView, Variant::kAskMeA, Variant::kAskMeMP}) {
    Model model(v, cfg, emb, 31);
    PersonalCache cache;
    cache.user_ids = {"u_a", "u_b", "u_c"};
    for (int i = 0; i < 3; ++i) {
      Tensor t = Tensor::zeros({cfg.hidden()});
      for (std::size_t d = 0; d < t.size(); ++d) t.data[d] = 0.1 * double(i + 1) - 0.02 * double(d);
      cache.vectors.push_back(t);
    }
    const PersonalCache* cp = variant_uses_community(v) ? &cache : nullptr;

    auto scorer = make_model_scorer(model, cp);
    auto fast = scorer->score(train, test, cands);
    REQUIRE(fast.size() == cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      Tape g;
      ParamBinding bind(g, model.params);
      auto fwd = variant_forward(bind, model, train.steps, test.follows,
                                 test.votes, cands[i], cp, train.user_id);
      CHECK(fast[i] ==
            doctest::Approx(g.value(fwd.yhat).data[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluation leaves model parameters untouched") {
  auto emb = eval_table(40, 3);
  ModelConfig cfg;
  cfg.fixed_dim = 3;
  cfg.learned_dim = 2;
  Model model(Variant::kAskMeB, cfg, emb, 9);
  std::vector<std::vector<double>> before;
  for (const auto& name : model.params.names()) {
    before.push_back(model.params.get(name).data);
  }

  Split split;
  for (int u = 0; u < 4; ++u) {
    UserTimeline tl;
    tl.user_id = "u" + std::to_string(u);
    tl.steps = {{"q00" + std::to_string(u), 1, {}, {}},
                {"q01" + std::to_string(u), 2, {}, {}}};
    split.train.push_back(tl);
    split.test.push_back({tl.user_id, "q02" + std::to_string(u), {}, {}});
  }
  auto scorer = make_model_scorer(model, nullptr);
  evaluate(*scorer, split, emb->question_ids(), 9, {5}, 1, 2);

  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(model.params.get(model.params.names()[i]).data == before[i]);
  }
}
