#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pnnlab/data.hpp"
#include "pnnlab/model.hpp"

namespace pnnlab {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  double dropout_rate = 0.5;
  double l2_lambda = 1e-4;  // LR and FM weights only
  std::uint64_t seed = 0;
  std::size_t patience = 3;
  ModelConfig model;
};

void validate(const TrainConfig& config);

// Log loss with the prediction clamped to [1e-12, 1 - 1e-12].
double log_loss(int label, double y_hat);

// p <- p - lr * g for every parameter.
void sgd_step(ModelParams& params, const ModelParams& grad, double learning_rate);

// lambda * ||w||^2 over the penalized blocks (LR: w; FM: w and v).
double l2_penalty(const ModelParams& params, double lambda);
// Adds 2 * lambda * w to the matching blocks of `grad`.
void add_l2_gradient(const ModelParams& params, double lambda, ModelParams& grad);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_logloss = 0.0;
  double val_logloss = 0.0;
  double val_auc = 0.0;  // NaN when the validation set has a single class
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

// CSV with header epoch,train_logloss,val_logloss,val_auc,seconds.
// Timing is written as 0 when `with_timing` is false so that logs of
// identical runs compare equal byte for byte.
void write_train_log(std::ostream& out, const TrainLog& log, bool with_timing = true);
void write_train_log(const std::string& path, const TrainLog& log, bool with_timing = true);

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  TrainLog log;
};

// Minibatch SGD from `initial`. An empty validation set validates on the
// training data. Throws when a loss turns NaN, naming the epoch.
TrainResult train(Model initial, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config);

// Initializes with init_params(seed) and trains.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config);

}  // namespace pnnlab
