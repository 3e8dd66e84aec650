#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "askme/tensor.hpp"

namespace askme {

enum class BehaviorKind { kAnswer, kFollow, kVote };

const char* behavior_kind_token(BehaviorKind k);

// One (user, question, kind, timestamp) record; the raw unit of ingestion.
struct BehaviorEvent {
  std::string user_id;
  std::string question_id;
  BehaviorKind kind;
  std::int64_t timestamp = 0;

  bool operator==(const BehaviorEvent&) const = default;
};

// One answer with the follow/vote question-ids accumulated before it
// (truncated to the most recent L per kind, in time order).
struct AnswerStep {
  std::string question_id;
  std::int64_t timestamp = 0;
  std::vector<std::string> follows;
  std::vector<std::string> votes;
};

struct UserTimeline {
  std::string user_id;
  std::vector<AnswerStep> steps;
};

struct TimelineBuildResult {
  std::vector<UserTimeline> timelines;
  std::vector<std::string> dropped_users;  // users with fewer than 2 answers
};

// Held-out final answer per user, with that step's follow/vote segments.
struct TestRecord {
  std::string user_id;
  std::string question_id;
  std::vector<std::string> follows;
  std::vector<std::string> votes;
};

struct Split {
  std::vector<UserTimeline> train;
  std::vector<TestRecord> test;
};

struct CandidateSet {
  std::string positive;
  std::vector<std::string> negatives;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Behavior log: one event per line, tab-separated:
// user-id <TAB> question-id <TAB> kind <TAB> timestamp
std::vector<BehaviorEvent> parse_log(const std::string& path);
void write_log(const std::string& path, const std::vector<BehaviorEvent>& events);

// Groups events per user, sorts answers by (timestamp, file order) and
// assigns each follow/vote to the segment of the next answer at a strictly
// later timestamp. Segments keep the L most recent events and never contain
// the answer question-id of their own step. Users with < 2 answers are
// dropped and reported. Output is sorted by user-id.
TimelineBuildResult build_timelines(const std::vector<BehaviorEvent>& events,
                                    std::size_t segment_cap);

// Moves each user's final answer (with its segments) into the test set.
Split leave_one_out(const std::vector<UserTimeline>& timelines);

// Uniform sample without replacement from the questions the user never
// answered. `all_questions` must be deterministic in order (sorted).
std::vector<std::string> sample_negatives(
    const std::string& user_id, const std::vector<std::string>& all_questions,
    const std::vector<std::string>& answered_sorted, std::size_t count,
    std::mt19937_64& rng);

}  // namespace askme
