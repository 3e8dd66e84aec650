#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "askme/adam.hpp"
#include "askme/model.hpp"

namespace askme {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  double lr_decay = 0.5;  // multiplied in at every epoch boundary
  std::size_t train_negatives = 4;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct LossCurvePoint {
  std::size_t epoch;
  std::size_t batch;
  double loss;
};

struct TrainResult {
  std::vector<LossCurvePoint> curve;
  // Per-epoch mean ||personal - group|| over regularized batches (empty when
  // lambda == 0 or the variant has no community term).
  std::vector<double> epoch_reg_norms;
  PersonalCache final_cache;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t batch_index, const std::string& what)
      : std::runtime_error(what), batch_index(batch_index) {}
  std::size_t batch_index;
};

// Mini-batch Adam over positive pairs plus sampled negatives; the personal
// cache is refreshed from current parameters at every epoch start, and the
// learning rate is multiplied by lr_decay at each epoch boundary.
// Deterministic for a fixed seed, for any thread count.
TrainResult train(Model& model, const Split& split, const TrainConfig& cfg);

// Personal vectors of every train timeline under the current parameters.
PersonalCache build_personal_cache(const Model& model, const Split& split,
                                   int threads);

}  // namespace askme
