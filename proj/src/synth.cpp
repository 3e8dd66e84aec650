#include "askme/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "askme/embedding.hpp"
#include "askme/params.hpp"

namespace askme {

namespace {

double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

std::size_t poisson(std::mt19937_64& rng, double lambda) {
  const double limit = std::exp(-lambda);
  std::size_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= u01(rng);
  } while (p > limit);
  return k - 1;
}

// Marsaglia-Tsang, shape >= 0 via the boost trick for shape < 1.
double gamma_sample(GaussianSampler& gs, double shape) {
  if (shape < 1.0) {
    double u = u01(gs.rng());
    return gamma_sample(gs, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = gs.sample(0.0, 1.0);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = u01(gs.rng());
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::size_t sample_discrete(std::mt19937_64& rng,
                            const std::vector<double>& cumsum) {
  double u = u01(rng) * cumsum.back();
  auto it = std::upper_bound(cumsum.begin(), cumsum.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cumsum.begin());
  return std::min(i, cumsum.size() - 1);
}

std::string question_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%06zu", i);
  return buf;
}

std::string user_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%05zu", i);
  return buf;
}

}  // namespace

SynthDataset generate_synthetic(const SynthConfig& cfg) {
  if (cfg.users < 1 || cfg.questions < 1 || cfg.topics < 1 ||
      cfg.answers_per_user < 1) {
    throw std::invalid_argument("generate_synthetic: counts must be >= 1");
  }
  if (cfg.follow_rate < 0.0 || cfg.vote_rate < 0.0 || cfg.noise < 0.0 ||
      cfg.noise > 1.0 || cfg.answer_temperature <= 0.0) {
    throw std::invalid_argument("generate_synthetic: invalid rates");
  }
  if (cfg.questions < cfg.answers_per_user) {
    throw std::invalid_argument(
        "generate_synthetic: need at least answers_per_user distinct questions");
  }

  GaussianSampler gs(cfg.seed);
  std::mt19937_64& rng = gs.rng();
  const std::size_t K = cfg.topics;

  // Topic centroids and question embeddings.
  std::vector<std::vector<double>> centroids(K, std::vector<double>(cfg.fixed_dim));
  for (auto& c : centroids) {
    for (double& v : c) v = gs.sample(0.0, 1.0);
  }

  SynthDataset ds;
  ds.question_ids.reserve(cfg.questions);
  ds.question_topics.reserve(cfg.questions);
  ds.embeddings.reserve(cfg.questions);
  std::vector<std::vector<std::size_t>> topic_questions(K);
  for (std::size_t q = 0; q < cfg.questions; ++q) {
    int topic = static_cast<int>(rng() % K);
    ds.question_ids.push_back(question_name(q));
    ds.question_topics.push_back(topic);
    topic_questions[topic].push_back(q);
    std::vector<float> row(cfg.fixed_dim);
    for (std::size_t j = 0; j < cfg.fixed_dim; ++j) {
      row[j] = static_cast<float>(centroids[topic][j] +
                                  gs.sample(0.0, cfg.embedding_noise));
    }
    ds.embeddings.push_back(std::move(row));
  }

  // Within-topic popularity: zipf over id order, so some questions dominate.
  std::vector<std::vector<double>> topic_cumsum(K);
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    topic_cumsum[k].reserve(topic_questions[k].size());
    for (std::size_t j = 0; j < topic_questions[k].size(); ++j) {
      acc += 1.0 / std::pow(static_cast<double>(j + 1), cfg.popularity_skew);
      topic_cumsum[k].push_back(acc);
    }
  }
  auto pick_in_topic = [&](std::size_t k) {
    return topic_questions[k][sample_discrete(rng, topic_cumsum[k])];
  };

  const std::int64_t step_gap = 1000;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::string uid = user_name(u);

    // Dirichlet(0.3) topic preference.
    std::vector<double> pref(K);
    double total = 0.0;
    for (double& p : pref) {
      p = gamma_sample(gs, 0.3) + 1e-12;
      total += p;
    }
    for (double& p : pref) p /= total;
    std::size_t top_topic = static_cast<std::size_t>(
        std::max_element(pref.begin(), pref.end()) - pref.begin());

    std::vector<double> pref_cumsum(K);
    std::vector<double> sharp_cumsum(K);
    {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        a += pref[k];
        b += std::pow(pref[k], 1.0 / cfg.answer_temperature);
        pref_cumsum[k] = a;
        sharp_cumsum[k] = b;
      }
    }
    // noise == 0 pins every answer to the top topic; otherwise answers mix
    // the sharpened preference in at rate `noise`.
    auto answer_topic = [&]() -> std::size_t {
      if (cfg.noise > 0.0 && u01(rng) < cfg.noise) {
        return sample_discrete(rng, sharp_cumsum);
      }
      return top_topic;
    };
    auto behavior_topic = [&]() -> std::size_t {
      if (cfg.noise > 0.0 && u01(rng) < cfg.noise) return rng() % K;
      return sample_discrete(rng, pref_cumsum);
    };

    std::set<std::size_t> answered;
    for (std::size_t a = 0; a < cfg.answers_per_user; ++a) {
      const std::int64_t t_prev = static_cast<std::int64_t>(a) * step_gap;
      const std::int64_t t_ans = t_prev + step_gap;

      std::size_t n_fol = poisson(rng, cfg.follow_rate);
      std::size_t n_vot = poisson(rng, cfg.vote_rate);
      std::int64_t ts = t_prev + 1;
      for (std::size_t j = 0; j < n_fol + n_vot; ++j) {
        std::size_t q = pick_in_topic(behavior_topic());
        BehaviorKind kind = j < n_fol ? BehaviorKind::kFollow : BehaviorKind::kVote;
        ds.events.push_back({uid, question_name(q), kind, ts});
        if (ts < t_ans - 1) ++ts;
      }

      std::size_t q = pick_in_topic(answer_topic());
      for (int tries = 0; answered.count(q) && tries < 200; ++tries) {
        q = pick_in_topic(answer_topic());
      }
      if (answered.count(q)) {
        // Dense topic; fall back to the first unanswered question overall.
        for (std::size_t cand = 0; cand < cfg.questions; ++cand) {
          if (!answered.count(cand)) { q = cand; break; }
        }
      }
      answered.insert(q);
      ds.events.push_back({uid, question_name(q), BehaviorKind::kAnswer, t_ans});
    }
  }
  return ds;
}

void write_synthetic(const std::string& dir, const SynthDataset& ds) {
  std::filesystem::create_directories(dir);
  write_log(dir + "/behaviors.tsv", ds.events);

  std::ofstream topics(dir + "/topics.tsv", std::ios::binary);
  if (!topics) throw IoError("cannot write " + dir + "/topics.tsv");
  for (std::size_t i = 0; i < ds.question_ids.size(); ++i) {
    topics << ds.question_ids[i] << '\t' << ds.question_topics[i] << '\n';
  }
  if (!topics) throw IoError("write failed: " + dir + "/topics.tsv");

  write_embeddings_f32(dir + "/embeddings.f32", ds.embeddings);
}

void read_topics_tsv(const std::string& path, std::vector<std::string>& ids,
                     std::vector<int>& topics) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  ids.clear();
  topics.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 2 fields");
    }
    ids.push_back(line.substr(0, tab));
    topics.push_back(std::stoi(line.substr(tab + 1)));
  }
}

}  // namespace askme
