#include "askme/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace askme {

const char* behavior_kind_token(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::kAnswer: return "answer";
    case BehaviorKind::kFollow: return "follow";
    case BehaviorKind::kVote: return "vote";
  }
  return "?";
}

namespace {

bool parse_kind(const std::string& token, BehaviorKind& out) {
  if (token == "answer") { out = BehaviorKind::kAnswer; return true; }
  if (token == "follow") { out = BehaviorKind::kFollow; return true; }
  if (token == "vote") { out = BehaviorKind::kVote; return true; }
  return false;
}

}  // namespace

std::vector<BehaviorEvent> parse_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open behavior log: " + path);
  std::vector<BehaviorEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    BehaviorEvent ev;
    ev.user_id = fields[0];
    ev.question_id = fields[1];
    if (!parse_kind(fields[2], ev.kind)) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": unknown behavior kind \"" + fields[2] + "\"");
    }
    try {
      std::size_t consumed = 0;
      ev.timestamp = std::stoll(fields[3], &consumed);
      if (consumed != fields[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": non-integer timestamp \"" + fields[3] + "\"");
    }
    if (ev.timestamp < 0) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": negative timestamp");
    }
    events.push_back(std::move(ev));
  }
  return events;
}

void write_log(const std::string& path,
               const std::vector<BehaviorEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write behavior log: " + path);
  for (const auto& ev : events) {
    out << ev.user_id << '\t' << ev.question_id << '\t'
        << behavior_kind_token(ev.kind) << '\t' << ev.timestamp << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

TimelineBuildResult build_timelines(const std::vector<BehaviorEvent>& events,
                                    std::size_t segment_cap) {
  if (segment_cap < 1) {
    throw std::invalid_argument("build_timelines: segment cap must be >= 1");
  }
  struct Indexed {
    const BehaviorEvent* ev;
    std::size_t file_index;
  };
  std::map<std::string, std::vector<Indexed>> by_user;
  for (std::size_t i = 0; i < events.size(); ++i) {
    by_user[events[i].user_id].push_back({&events[i], i});
  }

  TimelineBuildResult result;
  for (auto& [user, items] : by_user) {
    std::vector<Indexed> answers;
    std::vector<Indexed> others;
    for (const auto& it : items) {
      (it.ev->kind == BehaviorKind::kAnswer ? answers : others).push_back(it);
    }
    if (answers.size() < 2) {
      result.dropped_users.push_back(user);
      continue;
    }
    std::sort(answers.begin(), answers.end(), [](const Indexed& a, const Indexed& b) {
      if (a.ev->timestamp != b.ev->timestamp) return a.ev->timestamp < b.ev->timestamp;
      return a.file_index < b.file_index;
    });

    UserTimeline tl;
    tl.user_id = user;
    tl.steps.resize(answers.size());
    std::vector<std::vector<Indexed>> pending_follows(answers.size());
    std::vector<std::vector<Indexed>> pending_votes(answers.size());
    for (std::size_t t = 0; t < answers.size(); ++t) {
      tl.steps[t].question_id = answers[t].ev->question_id;
      tl.steps[t].timestamp = answers[t].ev->timestamp;
    }
    for (const auto& it : others) {
      // Segment of the next answer at a strictly later timestamp.
      std::size_t lo = 0, hi = answers.size();
      while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (answers[mid].ev->timestamp > it.ev->timestamp) hi = mid; else lo = mid + 1;
      }
      if (lo == answers.size()) continue;  // no later answer; unused
      auto& bucket = it.ev->kind == BehaviorKind::kFollow ? pending_follows[lo]
                                                          : pending_votes[lo];
      bucket.push_back(it);
    }
    auto finalize = [&](std::vector<Indexed>& bucket, std::size_t t,
                        std::vector<std::string>& out) {
      std::erase_if(bucket, [&](const Indexed& e) {
        return e.ev->question_id == tl.steps[t].question_id;
      });
      std::sort(bucket.begin(), bucket.end(), [](const Indexed& a, const Indexed& b) {
        if (a.ev->timestamp != b.ev->timestamp) return a.ev->timestamp < b.ev->timestamp;
        return a.file_index < b.file_index;
      });
      std::size_t start = bucket.size() > segment_cap ? bucket.size() - segment_cap : 0;
      for (std::size_t i = start; i < bucket.size(); ++i) {
        out.push_back(bucket[i].ev->question_id);
      }
    };
    for (std::size_t t = 0; t < answers.size(); ++t) {
      finalize(pending_follows[t], t, tl.steps[t].follows);
      finalize(pending_votes[t], t, tl.steps[t].votes);
    }
    result.timelines.push_back(std::move(tl));
  }
  return result;
}

Split leave_one_out(const std::vector<UserTimeline>& timelines) {
  Split split;
  for (const auto& tl : timelines) {
    if (tl.steps.size() < 2) {
      throw std::invalid_argument("leave_one_out: user " + tl.user_id +
                                  " has fewer than 2 answers");
    }
    UserTimeline train = tl;
    AnswerStep last = std::move(train.steps.back());
    train.steps.pop_back();
    split.test.push_back(
        {tl.user_id, last.question_id, std::move(last.follows), std::move(last.votes)});
    split.train.push_back(std::move(train));
  }
  return split;
}

std::vector<std::string> sample_negatives(
    const std::string& user_id, const std::vector<std::string>& all_questions,
    const std::vector<std::string>& answered_sorted, std::size_t count,
    std::mt19937_64& rng) {
  std::vector<std::string> pool;
  pool.reserve(all_questions.size());
  for (const auto& q : all_questions) {
    if (!std::binary_search(answered_sorted.begin(), answered_sorted.end(), q)) {
      pool.push_back(q);
    }
  }
  if (pool.size() < count) {
    throw std::invalid_argument("sample_negatives: user " + user_id + " has only " +
                                std::to_string(pool.size()) +
                                " unanswered questions, need " +
                                std::to_string(count));
  }
  // Partial Fisher-Yates over the pool.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace askme
