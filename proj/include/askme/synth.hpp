#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "askme/corpus.hpp"

namespace askme {

// Planted-topic synthetic dataset: each question belongs to a topic and its
// embedding sits near the topic centroid; each user has a Dirichlet topic
// preference. Answers come from a sharpened preference, follows/votes from
// the preference mixed with uniform noise, at roughly `follow_rate` /
// `vote_rate` events per answer step.
struct SynthConfig {
  std::size_t users = 200;
  std::size_t questions = 2000;
  std::size_t topics = 8;
  std::size_t answers_per_user = 5;
  double follow_rate = 5.0;  // expected follow events per answer step
  double vote_rate = 5.0;
  double noise = 0.1;  // probability of drawing a behavior off-preference
  double answer_temperature = 0.5;   // < 1 sharpens the answer distribution
  double embedding_noise = 0.3;      // stddev around the topic centroid
  double popularity_skew = 0.8;      // zipf exponent within each topic
  std::size_t fixed_dim = 100;
  std::uint64_t seed = 1;
};

struct SynthDataset {
  std::vector<BehaviorEvent> events;
  std::vector<std::string> question_ids;      // row order for embeddings
  std::vector<int> question_topics;           // parallel to question_ids
  std::vector<std::vector<float>> embeddings; // questions x fixed_dim
};

SynthDataset generate_synthetic(const SynthConfig& cfg);

// Writes behaviors.tsv, topics.tsv and embeddings.f32 into `dir`.
void write_synthetic(const std::string& dir, const SynthDataset& ds);

// topics.tsv: question-id <TAB> topic index, one per line; its row order is
// the embedding row order.
void read_topics_tsv(const std::string& path, std::vector<std::string>& ids,
                     std::vector<int>& topics);

}  // namespace askme
