#include "askme/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "askme/threading.hpp"

namespace askme {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Instance {
  std::size_t timeline_index;
  std::size_t target_step;  // index of the answer being predicted
  std::string target;       // candidate question (positive or negative)
  double label;
};

struct JobResult {
  std::unordered_map<std::string, Tensor> grads;
  double loss = 0.0;
  double gap = 0.0;  // raw ||personal - group|| for reg jobs
};

}  // namespace

PersonalCache build_personal_cache(const Model& model, const Split& split,
                                   int threads) {
  const std::vector<UserTimeline>& tls = split.train;
  auto vectors = parallel_map(tls.size(), threads, [&](std::size_t i) {
    Tape tape;
    ParamBinding bind(tape, model.params);
    static const std::vector<std::string> kNoSegment;
    NodeId v = cache_vector(bind, model,
                            capped_history(tls[i], model.cfg.history_cap),
                            kNoSegment, kNoSegment);
    return tape.value(v);
  });
  PersonalCache cache;
  cache.user_ids.reserve(tls.size());
  for (const auto& tl : tls) cache.user_ids.push_back(tl.user_id);
  cache.vectors = std::move(vectors);
  // build_timelines emits user-id order; keep the invariant explicit.
  std::vector<std::size_t> order(cache.user_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cache.user_ids[a] < cache.user_ids[b];
  });
  PersonalCache sorted;
  for (std::size_t i : order) {
    sorted.user_ids.push_back(std::move(cache.user_ids[i]));
    sorted.vectors.push_back(std::move(cache.vectors[i]));
  }
  return sorted;
}

TrainResult train(Model& model, const Split& split, const TrainConfig& cfg) {
  if (split.train.empty()) throw std::invalid_argument("train: empty split");
  const bool community = variant_uses_community(model.variant);
  const double lambda = community ? model.cfg.lambda : 0.0;
  if (model.cfg.lambda < 0.0) throw std::invalid_argument("train: lambda < 0");

  std::vector<std::string> all_questions = model.emb->question_ids();
  std::sort(all_questions.begin(), all_questions.end());
  std::vector<std::vector<std::string>> answered(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    for (const auto& step : split.train[i].steps) {
      answered[i].push_back(step.question_id);
    }
    std::sort(answered[i].begin(), answered[i].end());
  }

  AdamState adam({cfg.learning_rate});
  TrainResult result;
  PersonalCache cache;
  std::size_t global_batch = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.config().lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
    if (community) cache = build_personal_cache(model, split, cfg.threads);

    // Positive pairs with fresh negatives, then a deterministic shuffle.
    std::mt19937_64 epoch_rng(mix_seed(cfg.seed, epoch));
    std::vector<Instance> instances;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      const UserTimeline& tl = split.train[i];
      for (std::size_t t = 1; t < tl.steps.size(); ++t) {
        instances.push_back({i, t, tl.steps[t].question_id, 1.0});
        auto negs = sample_negatives(tl.user_id, all_questions, answered[i],
                                     cfg.train_negatives, epoch_rng);
        for (auto& q : negs) instances.push_back({i, t, std::move(q), 0.0});
      }
    }
    if (instances.empty()) {
      throw std::invalid_argument(
          "train: no training pairs (every user has a single train answer)");
    }
    std::shuffle(instances.begin(), instances.end(), epoch_rng);

    double epoch_gap_sum = 0.0;
    std::size_t epoch_gap_count = 0;

    for (std::size_t start = 0; start < instances.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, instances.size() - start);
      std::span<const Instance> batch(instances.data() + start, n);

      // Distinct users in first-occurrence order, for the regularizer.
      std::vector<std::size_t> reg_users;
      if (lambda > 0.0) {
        for (const Instance& ins : batch) {
          if (std::find(reg_users.begin(), reg_users.end(), ins.timeline_index) ==
              reg_users.end()) {
            reg_users.push_back(ins.timeline_index);
          }
        }
      }

      const std::size_t job_count = n + reg_users.size();
      auto jobs = parallel_map(job_count, cfg.threads, [&](std::size_t j) {
        JobResult out;
        Tape tape;
        ParamBinding bind(tape, model.params);
        if (j < n) {
          const Instance& ins = batch[j];
          const UserTimeline& tl = split.train[ins.timeline_index];
          const AnswerStep& step = tl.steps[ins.target_step];
          auto fwd = variant_forward(
              bind, model,
              capped_prefix(tl, ins.target_step, model.cfg.history_cap),
              step.follows, step.votes, ins.target,
              community ? &cache : nullptr, tl.user_id);
          NodeId loss = tape.scale(tape.bce(fwd.yhat, ins.label), 1.0 / n);
          out.loss = tape.value(loss).data[0];
          out.grads = bind.grads(loss);
        } else {
          const UserTimeline& tl = split.train[reg_users[j - n]];
          static const std::vector<std::string> kNoSegment;
          NodeId personal = cache_vector(
              bind, model, capped_history(tl, model.cfg.history_cap),
              kNoSegment, kNoSegment);
          NodeId group = community_group(bind, model, personal, cache, tl.user_id);
          NodeId gap = personal_group_gap(tape, personal, group);
          NodeId loss = tape.scale(gap, lambda / reg_users.size());
          out.gap = tape.value(gap).data[0];
          out.loss = tape.value(loss).data[0];
          out.grads = bind.grads(loss);
        }
        return out;
      });

      double batch_loss = 0.0;
      std::unordered_map<std::string, Tensor> grads;
      for (const std::string& name : model.params.names()) {
        grads.emplace(name, Tensor::zeros(model.params.get(name).shape));
      }
      for (const JobResult& job : jobs) {
        batch_loss += job.loss;
        for (const std::string& name : model.params.names()) {
          auto it = job.grads.find(name);
          if (it == job.grads.end()) continue;
          Tensor& acc = grads.at(name);
          const Tensor& g = it->second;
          for (std::size_t k = 0; k < acc.size(); ++k) acc.data[k] += g.data[k];
        }
      }
      for (std::size_t j = n; j < job_count; ++j) {
        epoch_gap_sum += jobs[j].gap;
        ++epoch_gap_count;
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError(global_batch,
                              "training diverged: non-finite loss at batch " +
                                  std::to_string(global_batch));
      }
      adam.step(model.params, grads);
      result.curve.push_back({epoch, global_batch, batch_loss});
      ++global_batch;
    }

    if (epoch_gap_count > 0) {
      result.epoch_reg_norms.push_back(epoch_gap_sum / epoch_gap_count);
    }
  }

  if (community) {
    result.final_cache = build_personal_cache(model, split, cfg.threads);
  }
  return result;
}

}  // namespace askme
