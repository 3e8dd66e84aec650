#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <fstream>
#include <random>
#include <string>

#include "askme/corpus.hpp"

using namespace askme;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

BehaviorEvent ev(const std::string& u, const std::string& q, BehaviorKind k,
                 std::int64_t ts) {
  return {u, q, k, ts};
}

}  // namespace

TEST_CASE("behavior log round trip") {
  std::vector<BehaviorEvent> events = {
      ev("u1", "q1", BehaviorKind::kAnswer, 100),
      ev("u1", "q2", BehaviorKind::kFollow, 50),
      ev("u2", "q3", BehaviorKind::kVote, 0),
  };
  const std::string path = temp_file("askme_log_roundtrip.tsv");
  write_log(path, events);
  CHECK(parse_log(path) == events);
  std::remove(path.c_str());
}

TEST_CASE("parse errors carry line numbers") {
  const std::string path = temp_file("askme_log_bad.tsv");

  SUBCASE("wrong field count") {
    write_file(path, "u1\tq1\tanswer\t1\nu2\tq2\tanswer\n");
    CHECK_THROWS_WITH_AS(parse_log(path),
                         doctest::Contains(":2: expected 4 tab-separated"),
                         ParseError);
  }
  SUBCASE("unknown kind") {
    write_file(path, "u1\tq1\tclick\t1\n");
    CHECK_THROWS_WITH_AS(parse_log(path), doctest::Contains("unknown behavior kind"),
                         ParseError);
  }
  SUBCASE("non-integer timestamp") {
    write_file(path, "u1\tq1\tanswer\t12x\n");
    CHECK_THROWS_WITH_AS(parse_log(path), doctest::Contains("non-integer timestamp"),
                         ParseError);
  }
  SUBCASE("negative timestamp") {
    write_file(path, "u1\tq1\tanswer\t-5\n");
    CHECK_THROWS_WITH_AS(parse_log(path), doctest::Contains("negative timestamp"),
                         ParseError);
  }
  std::remove(path.c_str());
}

TEST_CASE("timeline assembly assigns events to the next strictly later answer") {
  std::vector<BehaviorEvent> events = {
      ev("u1", "a1", BehaviorKind::kAnswer, 100),
      ev("u1", "a2", BehaviorKind::kAnswer, 200),
      ev("u1", "f1", BehaviorKind::kFollow, 50),    // before a1
      ev("u1", "f2", BehaviorKind::kFollow, 100),   // at a1: goes to a2
      ev("u1", "v1", BehaviorKind::kVote, 150),     // between: a2
      ev("u1", "f3", BehaviorKind::kFollow, 250),   // after last answer: dropped
  };
  auto result = build_timelines(events, 5);
  REQUIRE(result.timelines.size() == 1);
  const UserTimeline& tl = result.timelines[0];
  REQUIRE(tl.steps.size() == 2);
  CHECK(tl.steps[0].question_id == "a1");
  CHECK(tl.steps[0].follows == std::vector<std::string>{"f1"});
  CHECK(tl.steps[0].votes.empty());
  CHECK(tl.steps[1].follows == std::vector<std::string>{"f2"});
  CHECK(tl.steps[1].votes == std::vector<std::string>{"v1"});
}

TEST_CASE("segments keep the most recent L events and drop the step's own answer") {
  std::vector<BehaviorEvent> events = {
      ev("u1", "a1", BehaviorKind::kAnswer, 10),
      ev("u1", "a2", BehaviorKind::kAnswer, 100),
  };
  for (int i = 0; i < 6; ++i) {
    events.push_back(ev("u1", "f" + std::to_string(i), BehaviorKind::kFollow, 20 + i));
  }
  // A follow of the answered question itself is excluded from its segment.
  events.push_back(ev("u1", "a2", BehaviorKind::kFollow, 90));

  auto tl = build_timelines(events, 3).timelines.at(0);
  CHECK(tl.steps[1].follows == std::vector<std::string>{"f3", "f4", "f5"});
}

TEST_CASE("answer ordering ties break by file order; sparse users are dropped") {
  std::vector<BehaviorEvent> events = {
      ev("u2", "only", BehaviorKind::kAnswer, 5),
      ev("u1", "b", BehaviorKind::kAnswer, 7),
      ev("u1", "a", BehaviorKind::kAnswer, 7),
      ev("u1", "c", BehaviorKind::kAnswer, 3),
  };
  auto result = build_timelines(events, 5);
  REQUIRE(result.timelines.size() == 1);
  CHECK(result.dropped_users == std::vector<std::string>{"u2"});
  const auto& steps = result.timelines[0].steps;
  CHECK(steps[0].question_id == "c");
  CHECK(steps[1].question_id == "b");
  CHECK(steps[2].question_id == "a");
}

TEST_CASE("leave-one-out moves the final answer with its segments") {
  std::vector<BehaviorEvent> events = {
      ev("u1", "a1", BehaviorKind::kAnswer, 10),
      ev("u1", "a2", BehaviorKind::kAnswer, 20),
      ev("u1", "a3", BehaviorKind::kAnswer, 30),
      ev("u1", "f1", BehaviorKind::kFollow, 25),
  };
  auto timelines = build_timelines(events, 5).timelines;
  Split split = leave_one_out(timelines);
  REQUIRE(split.train.size() == 1);
  REQUIRE(split.test.size() == 1);
  CHECK(split.train[0].steps.size() == 2);
  CHECK(split.test[0].question_id == "a3");
  CHECK(split.test[0].follows == std::vector<std::string>{"f1"});
  // Event count preserved: train steps + one test record per user.
  CHECK(split.train[0].steps.size() + 1 == timelines[0].steps.size());
}

TEST_CASE("negative sampling avoids answered questions and is near uniform") {
  std::vector<std::string> all;
  for (int i = 0; i < 50; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "q%02d", i);
    all.emplace_back(buf);
  }
  std::vector<std::string> answered = {"q00", "q10", "q20"};

  std::mt19937_64 rng(9);
  std::map<std::string, int> counts;
  const int draws = 4000;
  for (int rep = 0; rep < draws; ++rep) {
    for (const auto& q : sample_negatives("u1", all, answered, 5, rng)) {
      CHECK(!std::binary_search(answered.begin(), answered.end(), q));
      counts[q]++;
    }
  }
  // 47 candidates, 5 draws each: expectation p = 5/47 per draw.
  const double p = 5.0 / 47.0;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (const auto& [q, c] : counts) {
    CHECK(std::abs(c - draws * p) < 3.0 * sigma);
  }
  CHECK(counts.size() == 47);
}

TEST_CASE("negative sampling errors name the user when the pool is too small") {
  std::vector<std::string> all = {"q1", "q2"};
  std::vector<std::string> answered = {"q1"};
  std::mt19937_64 rng(1);
  CHECK_THROWS_WITH_AS(sample_negatives("u42", all, answered, 5, rng),
                       doctest::Contains("u42"), std::invalid_argument);
}
