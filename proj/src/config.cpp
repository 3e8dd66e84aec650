#include "askme/config.hpp"

#include <fstream>

#include "json.hpp"

#include "askme/corpus.hpp"

namespace askme {

namespace {

using nlohmann::json;

std::size_t as_size(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("config key \"" + key + "\" must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) {
    throw ConfigError("config key \"" + key + "\" must be a number");
  }
  return v.get<double>();
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg;
  cfg.fixed_dim = fixed_dim;
  cfg.learned_dim = learned_dim;
  cfg.segment_cap = segment_len;
  cfg.n_similar = n_similar;
  cfg.lambda = lambda;
  cfg.history_cap = history_cap;
  cfg.group_softmax = group_weighting == "softmax";
  return cfg;
}

TrainConfig RunConfig::train_config(int threads) const {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.learning_rate = learning_rate;
  cfg.lr_decay = lr_decay;
  cfg.train_negatives = train_negatives;
  cfg.seed = seed;
  cfg.threads = threads;
  return cfg;
}

Variant RunConfig::parsed_variant() const {
  auto v = parse_variant(variant);
  if (!v) throw ConfigError("unknown variant \"" + variant + "\"");
  return *v;
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "variant") {
      if (!value.is_string()) throw ConfigError("config key \"variant\" must be a string");
      cfg.variant = value.get<std::string>();
    } else if (key == "fixed_dim") {
      cfg.fixed_dim = as_size(value, key);
    } else if (key == "learned_dim") {
      cfg.learned_dim = as_size(value, key);
    } else if (key == "segment_len") {
      cfg.segment_len = as_size(value, key);
    } else if (key == "n_similar") {
      cfg.n_similar = as_size(value, key);
    } else if (key == "lambda") {
      cfg.lambda = as_double(value, key);
    } else if (key == "batch_size") {
      cfg.batch_size = as_size(value, key);
    } else if (key == "learning_rate") {
      cfg.learning_rate = as_double(value, key);
    } else if (key == "lr_decay") {
      cfg.lr_decay = as_double(value, key);
    } else if (key == "epochs") {
      cfg.epochs = as_size(value, key);
    } else if (key == "eval_negatives") {
      cfg.eval_negatives = as_size(value, key);
    } else if (key == "train_negatives") {
      cfg.train_negatives = as_size(value, key);
    } else if (key == "k_list") {
      if (!value.is_array() || value.empty()) {
        throw ConfigError("config key \"k_list\" must be a non-empty array");
      }
      cfg.k_list.clear();
      for (const auto& k : value) cfg.k_list.push_back(as_size(k, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(as_size(value, key));
    } else if (key == "history_cap") {
      cfg.history_cap = as_size(value, key);
    } else if (key == "group_weighting") {
      if (!value.is_string()) {
        throw ConfigError("config key \"group_weighting\" must be a string");
      }
      cfg.group_weighting = value.get<std::string>();
    } else {
      throw ConfigError("unknown config key \"" + key + "\"");
    }
  }

  (void)cfg.parsed_variant();
  if (cfg.lambda < 0.0) throw ConfigError("config key \"lambda\" must be >= 0");
  if (cfg.batch_size == 0) throw ConfigError("config key \"batch_size\" must be >= 1");
  if (cfg.segment_len == 0) throw ConfigError("config key \"segment_len\" must be >= 1");
  if (cfg.learning_rate <= 0.0) {
    throw ConfigError("config key \"learning_rate\" must be > 0");
  }
  if (cfg.lr_decay <= 0.0 || cfg.lr_decay > 1.0) {
    throw ConfigError("config key \"lr_decay\" must be in (0, 1]");
  }
  if (cfg.group_weighting != "softmax" && cfg.group_weighting != "raw") {
    throw ConfigError("config key \"group_weighting\" must be \"softmax\" or \"raw\"");
  }
  for (std::size_t k : cfg.k_list) {
    if (k == 0) throw ConfigError("config key \"k_list\" entries must be >= 1");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

}  // namespace askme
