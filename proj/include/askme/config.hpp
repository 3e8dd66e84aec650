#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "askme/model.hpp"
#include "askme/trainer.hpp"

namespace askme {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat JSON run configuration. Unknown keys are hard errors naming the key.
struct RunConfig {
  std::string variant = "AskMe";
  std::size_t fixed_dim = 100;
  std::size_t learned_dim = 28;
  std::size_t segment_len = 5;
  std::size_t n_similar = 5;
  double lambda = 0.01;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  double lr_decay = 0.5;
  std::size_t epochs = 10;
  std::size_t eval_negatives = 99;
  std::size_t train_negatives = 4;
  std::vector<std::size_t> k_list = {10, 20, 30, 40, 50};
  std::uint64_t seed = 1;
  std::size_t history_cap = 0;  // 0 = unlimited
  std::string group_weighting = "softmax";  // or "raw"

  ModelConfig model_config() const;
  TrainConfig train_config(int threads) const;
  Variant parsed_variant() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace askme
