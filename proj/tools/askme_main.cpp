// askme: batch CLI around the library. Subcommands: synth, train, eval,
// gradcheck, attn-dump. Exit codes: 0 success, 1 config/usage, 2 training
// divergence, 3 artifact corruption, 4 gradcheck failure.

#include <cstdio>
#include <filesystem>
#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "askme/checkpoint.hpp"
#include "askme/config.hpp"
#include "askme/corpus.hpp"
#include "askme/embedding.hpp"
#include "askme/eval.hpp"
#include "askme/gradcheck.hpp"
#include "askme/model.hpp"
#include "askme/synth.hpp"
#include "askme/threading.hpp"
#include "askme/trainer.hpp"

namespace {

using namespace askme;

constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitCorrupt = 3;
constexpr int kExitGradcheck = 4;

struct CliError {
  int code;
  std::string message;
};

struct Dataset {
  std::shared_ptr<EmbeddingTable> emb;
  Split split;
  std::vector<std::string> dropped_users;
};

Dataset load_dataset(const std::string& dir, std::size_t segment_cap) {
  namespace fs = std::filesystem;
  const std::string behaviors = (fs::path(dir) / "behaviors.tsv").string();
  const std::string topics = (fs::path(dir) / "topics.tsv").string();
  const std::string embeddings = (fs::path(dir) / "embeddings.f32").string();

  std::vector<std::string> ids;
  std::vector<int> topic_idx;
  read_topics_tsv(topics, ids, topic_idx);
  auto fixed = read_embeddings_f32(embeddings);
  auto emb = std::make_shared<EmbeddingTable>(std::move(ids), std::move(fixed));

  auto events = parse_log(behaviors);
  auto built = build_timelines(events, segment_cap);
  Dataset ds;
  ds.emb = std::move(emb);
  ds.split = leave_one_out(built.timelines);
  ds.dropped_users = std::move(built.dropped_users);
  return ds;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---- synth ----

int cmd_synth(const std::string& out_dir, const SynthConfig& cfg) {
  SynthDataset ds = generate_synthetic(cfg);
  write_synthetic(out_dir, ds);
  std::size_t answers = 0;
  for (const auto& e : ds.events) {
    if (e.kind == BehaviorKind::kAnswer) ++answers;
  }
  std::cout << "wrote " << out_dir << ": " << ds.events.size() << " events ("
            << answers << " answers), " << ds.question_ids.size()
            << " questions\n";
  return 0;
}

// ---- train ----

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_ckpt, const std::string& curve_path,
              const std::string& regnorm_path, int threads) {
  RunConfig run = load_run_config(config_path);
  Dataset ds = load_dataset(data_dir, run.segment_len);
  if (ds.split.train.empty()) throw CliError{kExitUsage, "no trainable users in " + data_dir};
  for (const auto& u : ds.dropped_users) {
    std::cerr << "note: dropped user with <2 answers: " << u << "\n";
  }

  Model model(run.parsed_variant(), run.model_config(), ds.emb, run.seed);
  TrainResult result;
  try {
    result = train(model, ds.split, run.train_config(threads));
  } catch (const DivergenceError& e) {
    throw CliError{kExitDivergence, e.what()};
  }
  save_checkpoint(out_ckpt, model);

  std::string curve = "epoch,batch,loss\n";
  for (const auto& p : result.curve) {
    curve += std::to_string(p.epoch) + "," + std::to_string(p.batch) + "," +
             fmt("%.12g", p.loss) + "\n";
  }
  write_text_file(curve_path, curve);

  if (!result.epoch_reg_norms.empty()) {
    std::string norms = "epoch,mean_gap\n";
    for (std::size_t e = 0; e < result.epoch_reg_norms.size(); ++e) {
      norms += std::to_string(e) + "," + fmt("%.12g", result.epoch_reg_norms[e]) + "\n";
    }
    write_text_file(regnorm_path, norms);
  }
  std::cout << "wrote " << out_ckpt << " (" << result.curve.size()
            << " batches)\n";
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::vector<std::size_t>& ks, std::size_t negatives,
             std::uint64_t seed, const std::string& scorer_kind,
             const std::string& out_path, const std::string& positions_path,
             int threads) {
  // segment cap lives in the checkpoint; peek it by loading first with a
  // placeholder-free two-phase read: load checkpoint, then the data.
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  std::vector<int> topic_idx;
  read_topics_tsv((fs::path(data_dir) / "topics.tsv").string(), ids, topic_idx);
  auto fixed = read_embeddings_f32((fs::path(data_dir) / "embeddings.f32").string());
  auto emb = std::make_shared<EmbeddingTable>(std::move(ids), std::move(fixed));

  std::unique_ptr<Model> model;
  if (scorer_kind == "model") {
    model = std::make_unique<Model>(load_checkpoint(ckpt_path, emb));
  }
  const std::size_t segment_cap = model ? model->cfg.segment_cap : 5;

  auto events = parse_log((fs::path(data_dir) / "behaviors.tsv").string());
  Split split = leave_one_out(build_timelines(events, segment_cap).timelines);
  if (split.test.empty()) throw CliError{kExitUsage, "no evaluable users in " + data_dir};

  std::vector<std::string> all_questions = emb->question_ids();
  std::sort(all_questions.begin(), all_questions.end());

  PersonalCache cache;
  std::unique_ptr<CandidateScorer> scorer;
  if (scorer_kind == "model") {
    if (variant_uses_community(model->variant)) {
      cache = build_personal_cache(*model, split, threads);
    }
    scorer = make_model_scorer(*model, cache.user_ids.empty() ? nullptr : &cache);
  } else if (scorer_kind == "random") {
    scorer = make_random_scorer(seed);
  } else if (scorer_kind == "popularity") {
    scorer = make_popularity_scorer(split.train);
  } else if (scorer_kind == "oracle") {
    scorer = make_oracle_scorer();
  } else {
    throw CliError{kExitUsage, "unknown scorer \"" + scorer_kind + "\""};
  }

  RankingReport report =
      evaluate(*scorer, split, all_questions, negatives, ks, seed, threads);
  std::cout << format_report(report);
  if (!out_path.empty()) write_text_file(out_path, format_report_kv(report));
  if (!positions_path.empty()) write_positions_tsv(positions_path, report);
  return 0;
}

// ---- gradcheck ----

struct GradRow {
  std::string variant;
  std::string tensor;
  double err;
};

Split toy_split(std::size_t questions, std::uint64_t seed) {
  // Deterministic little corpus: 3 users, 4 answers each, short segments.
  std::mt19937_64 rng(seed * 1000003ull + 17);
  auto qid = [&](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "g%02zu", i % questions);
    return std::string(buf);
  };
  std::vector<BehaviorEvent> events;
  for (std::size_t u = 0; u < 3; ++u) {
    std::string user = "t" + std::to_string(u);
    for (std::size_t a = 0; a < 4; ++a) {
      std::int64_t ts = static_cast<std::int64_t>((a + 1) * 100);
      events.push_back({user, qid(rng() % questions), BehaviorKind::kAnswer, ts});
      for (int k = 0; k < 2; ++k) {
        events.push_back({user, qid(rng() % questions), BehaviorKind::kFollow, ts - 10 - k});
        events.push_back({user, qid(rng() % questions), BehaviorKind::kVote, ts - 5 - k});
      }
    }
  }
  return leave_one_out(build_timelines(events, 3).timelines);
}

std::vector<GradRow> gradcheck_variant(Variant variant, std::uint64_t seed,
                                       bool corrupt, int threads) {
  ModelConfig cfg;
  cfg.fixed_dim = 5;
  cfg.learned_dim = 3;
  cfg.segment_cap = 3;
  cfg.n_similar = 2;
  cfg.lambda = 0.01;

  const std::size_t questions = 10;
  GaussianSampler emb_rng(seed ^ 0xE5Bu);
  std::vector<std::string> ids;
  std::vector<std::vector<float>> fixed;
  for (std::size_t i = 0; i < questions; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "g%02zu", i);
    ids.emplace_back(buf);
    std::vector<float> row(cfg.fixed_dim);
    for (auto& v : row) v = static_cast<float>(emb_rng.sample(0.0, 0.5));
    fixed.push_back(std::move(row));
  }
  auto emb = std::make_shared<EmbeddingTable>(ids, fixed);

  Model model(variant, cfg, emb, seed);
  Split split = toy_split(questions, seed);
  const bool community = variant_uses_community(variant);
  PersonalCache cache;
  if (community) cache = build_personal_cache(model, split, 1);

  const UserTimeline& tl = split.train[0];
  const TestRecord& test = split.test[0];

  // Loss over one positive and one negative target, plus the regularizer for
  // community variants. The cache is frozen (as during an epoch), so the
  // finite-difference probe and the tape agree on what is constant.
  auto loss_value = [&](const ParamStore& params,
                        std::unordered_map<std::string, Tensor>* grads_out) {
    Tape tape;
    ParamBinding bind(tape, params);
    auto pos = variant_forward(bind, model, capped_history(tl, 0), test.follows,
                               test.votes, test.question_id,
                               community ? &cache : nullptr, tl.user_id);
    auto neg = variant_forward(bind, model, capped_history(tl, 0), test.follows,
                               test.votes, ids[questions - 1],
                               community ? &cache : nullptr, tl.user_id);
    NodeId loss = tape.add(tape.bce(pos.yhat, 1.0), tape.bce(neg.yhat, 0.0));
    if (community) {
      static const std::vector<std::string> kNone;
      NodeId personal = cache_vector(bind, model, capped_history(tl, 0), kNone, kNone);
      NodeId group = community_group(bind, model, personal, cache, tl.user_id);
      loss = tape.add(loss, tape.scale(personal_group_gap(tape, personal, group),
                                       cfg.lambda));
    }
    if (grads_out) *grads_out = bind.grads(loss);
    return tape.value(loss).data[0];
  };

  std::unordered_map<std::string, Tensor> analytic;
  loss_value(model.params, &analytic);
  if (corrupt) {
    for (auto& [name, g] : analytic) {
      for (auto& v : g.data) v += 0.5;
    }
  }

  const auto& names = model.params.names();
  return parallel_map(names.size(), threads, [&](std::size_t i) {
    const std::string& name = names[i];
    ParamStore probe_store = model.params;
    auto f = [&](const Tensor& x) {
      probe_store.get(name) = x;
      return loss_value(probe_store, nullptr);
    };
    Tensor numeric = finite_diff_grad(f, model.params.get(name), 1e-5);
    auto it = analytic.find(name);
    const Tensor zero = Tensor::zeros(model.params.get(name).shape);
    return GradRow{variant_token(variant), name,
                   max_relative_error(it != analytic.end() ? it->second : zero,
                                      numeric)};
  });
}

int cmd_gradcheck(const std::string& variant_token_arg, std::uint64_t seed,
                  std::size_t seeds, bool corrupt, int threads) {
  std::vector<Variant> variants;
  if (variant_token_arg == "all") {
    for (Variant v : all_variants()) variants.push_back(v);
  } else {
    auto v = parse_variant(variant_token_arg);
    if (!v) throw CliError{kExitUsage, "unknown variant \"" + variant_token_arg + "\""};
    variants.push_back(*v);
  }

  constexpr double kTol = 1e-5;
  bool all_pass = true;
  std::printf("%-10s %-14s %-12s %s\n", "variant", "tensor", "max_rel_err", "status");
  for (std::size_t s = 0; s < seeds; ++s) {
    for (Variant v : variants) {
      // Worst error per tensor across this seed's probes.
      for (const GradRow& row : gradcheck_variant(v, seed + s, corrupt, threads)) {
        const bool ok = row.err <= kTol;
        all_pass = all_pass && ok;
        if (!ok || seeds == 1) {
          std::printf("%-10s %-14s %-12.3e %s\n", row.variant.c_str(),
                      row.tensor.c_str(), row.err, ok ? "pass" : "FAIL");
        }
      }
    }
  }
  if (seeds > 1 && all_pass) {
    std::printf("all tensors within %.0e across %zu seeds\n", kTol, seeds);
  }
  if (!all_pass) return kExitGradcheck;
  return 0;
}

// ---- attn-dump ----

int cmd_attn_dump(const std::string& ckpt_path, const std::string& data_dir,
                  const std::string& out_path, const std::string& user_filter,
                  int threads) {
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  std::vector<int> topic_idx;
  read_topics_tsv((fs::path(data_dir) / "topics.tsv").string(), ids, topic_idx);
  auto fixed = read_embeddings_f32((fs::path(data_dir) / "embeddings.f32").string());
  auto emb = std::make_shared<EmbeddingTable>(std::move(ids), std::move(fixed));

  Model model = load_checkpoint(ckpt_path, emb);
  if (!variant_uses_timesteps(model.variant)) {
    throw CliError{kExitUsage,
                   std::string("variant ") + variant_token(model.variant) +
                       " has no per-timestep attention; use AskMe, AskMe_B or AskMe_P"};
  }

  auto events = parse_log((fs::path(data_dir) / "behaviors.tsv").string());
  Split split = leave_one_out(build_timelines(events, model.cfg.segment_cap).timelines);

  std::vector<const UserTimeline*> users;
  for (const auto& tl : split.train) {
    if (user_filter.empty() || tl.user_id == user_filter) users.push_back(&tl);
  }
  if (!user_filter.empty() && users.empty()) {
    throw CliError{kExitUsage, "unknown user id \"" + user_filter + "\""};
  }

  auto chunks = parallel_map(users.size(), threads, [&](std::size_t i) {
    const UserTimeline& tl = *users[i];
    Tape tape;
    ParamBinding bind(tape, model.params);
    static const std::vector<std::string> kNone;
    PersonalNodes p = askme_personal(
        bind, model, capped_history(tl, model.cfg.history_cap), kNone, kNone);
    std::string out;
    for (std::size_t step = 0; step < p.step_alphas.size(); ++step) {
      const auto& a = p.step_alphas[step];
      out += tl.user_id + "\t" + std::to_string(step) + "\t" +
             fmt("%.9f", a[0]) + "\t" + fmt("%.9f", a[1]) + "\t" +
             fmt("%.9f", a[2]) + "\n";
    }
    return out;
  });

  std::string body = "user\tstep\talpha_ans\talpha_fol\talpha_vot\n";
  for (const auto& chunk : chunks) body += chunk;
  write_text_file(out_path, body);
  std::cout << "wrote " << out_path << " (" << users.size() << " users)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Gradient buffers sit just above the default mmap threshold; keep them on
  // the heap instead of paying an mmap/munmap pair per training instance.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
  CLI::App app{"AskMe question recommendation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "worker threads (default 1, deterministic at any value)");

  auto* synth = app.add_subcommand("synth", "generate a planted-topic synthetic dataset");
  std::string synth_out;
  SynthConfig synth_cfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--users", synth_cfg.users);
  synth->add_option("--questions", synth_cfg.questions);
  synth->add_option("--topics", synth_cfg.topics);
  synth->add_option("--answers", synth_cfg.answers_per_user);
  synth->add_option("--follow-rate", synth_cfg.follow_rate);
  synth->add_option("--vote-rate", synth_cfg.vote_rate);
  synth->add_option("--noise", synth_cfg.noise);
  synth->add_option("--fixed-dim", synth_cfg.fixed_dim);
  synth->add_option("--seed", synth_cfg.seed);

  auto* train = app.add_subcommand("train", "train a variant and write a checkpoint");
  std::string train_config, train_data, train_out, train_curve, train_regnorm;
  train->add_option("--config", train_config, "JSON run config")->required();
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--curve", train_curve, "loss-curve CSV (default <out>.loss.csv)");
  train->add_option("--reg-norms", train_regnorm,
                    "per-epoch mean ||personal-group|| CSV (default <out>.regnorm.csv)");

  auto* eval = app.add_subcommand("eval", "leave-one-out ranking evaluation");
  std::string eval_ckpt, eval_data, eval_scorer = "model", eval_out, eval_positions;
  std::vector<std::size_t> eval_ks = {10, 20, 30, 40, 50};
  std::size_t eval_negatives = 99;
  std::uint64_t eval_seed = 1;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path (required for --scorer model)");
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--k", eval_ks, "K values")->delimiter(',');
  eval->add_option("--negatives", eval_negatives, "sampled negatives per user");
  eval->add_option("--seed", eval_seed, "candidate-sampling seed");
  eval->add_option("--scorer", eval_scorer, "model|random|popularity|oracle");
  eval->add_option("--out", eval_out, "key-value report file");
  eval->add_option("--positions", eval_positions, "per-user positions TSV");

  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "finite-difference check of every parameter tensor");
  std::string gc_variant = "all";
  std::uint64_t gc_seed = 1;
  std::size_t gc_seeds = 1;
  bool gc_corrupt = false;
  gradcheck->add_option("--variant", gc_variant, "variant token or 'all'");
  gradcheck->add_option("--seed", gc_seed, "first seed");
  gradcheck->add_option("--seeds", gc_seeds, "number of consecutive seeds");
  gradcheck->add_flag("--self-test-corrupt", gc_corrupt,
                      "negative control: corrupt analytic gradients")
      ->group("");

  auto* attn = app.add_subcommand("attn-dump", "export per-timestep behavior-attention weights");
  std::string attn_ckpt, attn_data, attn_out, attn_user;
  attn->add_option("--ckpt", attn_ckpt, "checkpoint path")->required();
  attn->add_option("--data", attn_data, "dataset directory")->required();
  attn->add_option("--out", attn_out, "TSV output")->required();
  attn->add_option("--user", attn_user, "restrict to one user id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_cfg);
    if (*train) {
      if (train_curve.empty()) train_curve = train_out + ".loss.csv";
      if (train_regnorm.empty()) train_regnorm = train_out + ".regnorm.csv";
      return cmd_train(train_config, train_data, train_out, train_curve,
                       train_regnorm, threads);
    }
    if (*eval) {
      if (eval_scorer == "model" && eval_ckpt.empty()) {
        throw CliError{kExitUsage, "--ckpt is required with --scorer model"};
      }
      return cmd_eval(eval_ckpt, eval_data, eval_ks, eval_negatives, eval_seed,
                      eval_scorer, eval_out, eval_positions, threads);
    }
    if (*gradcheck) {
      return cmd_gradcheck(gc_variant, gc_seed, gc_seeds, gc_corrupt, threads);
    }
    if (*attn) return cmd_attn_dump(attn_ckpt, attn_data, attn_out, attn_user, threads);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorruptCheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
