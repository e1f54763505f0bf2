#include "pnnlab/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pnnlab/metrics.hpp"

namespace pnnlab {

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (c.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
  if (!(c.l2_lambda >= 0.0)) throw std::invalid_argument("l2 lambda must be >= 0");
  if (c.patience < 1) throw std::invalid_argument("patience must be >= 1");
  validate(c.model);
}

double log_loss(int label, double y_hat) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("log loss: label must be 0 or 1, got " + std::to_string(label));
  }
  constexpr double kClamp = 1e-12;
  const double p = std::clamp(y_hat, kClamp, 1.0 - kClamp);
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

void sgd_step(ModelParams& params, const ModelParams& grad, double learning_rate) {
  if (params.index() != grad.index()) throw std::invalid_argument("sgd_step: model kind mismatch");
  std::vector<const Mat*> gs;
  for_each_block(grad, [&](const std::string&, const Mat& g) { gs.push_back(&g); });
  std::size_t k = 0;
  for_each_block(params, [&](const std::string& name, Mat& p) {
    if (k >= gs.size() || !p.same_shape(*gs[k])) {
      throw std::invalid_argument("sgd_step: shape mismatch at block '" + name + "'");
    }
    axpy(-learning_rate, *gs[k++], p);
  });
  if (k != gs.size()) throw std::invalid_argument("sgd_step: block count mismatch");
}

namespace {

template <class F>
void for_each_penalized(const ModelParams& params, F&& fn) {
  if (const auto* lr = std::get_if<LrParams>(&params)) {
    fn(lr->w, 0);
  } else if (const auto* fm = std::get_if<FmParams>(&params)) {
    fn(fm->w, 1);
    fn(fm->v, 2);
  }
}

Mat& penalized_block(ModelParams& grad, int which) {
  if (auto* lr = std::get_if<LrParams>(&grad)) return lr->w;
  auto& fm = std::get<FmParams>(grad);
  return which == 1 ? fm.w : fm.v;
}

}  // namespace

double l2_penalty(const ModelParams& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double total = 0.0;
  for_each_penalized(params, [&](const Mat& w, int) { total += dot(w, w); });
  return lambda * total;
}

void add_l2_gradient(const ModelParams& params, double lambda, ModelParams& grad) {
  if (lambda == 0.0) return;
  if (params.index() != grad.index()) throw std::invalid_argument("l2: model kind mismatch");
  for_each_penalized(params,
                     [&](const Mat& w, int which) { axpy(2.0 * lambda, w, penalized_block(grad, which)); });
}

void write_train_log(std::ostream& out, const TrainLog& log, bool with_timing) {
  auto num = [&](double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    out.write(buf, res.ptr - buf);
  };
  out << "epoch,train_logloss,val_logloss,val_auc,seconds\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',';
    num(e.train_logloss);
    out << ',';
    num(e.val_logloss);
    out << ',';
    num(e.val_auc);
    out << ',';
    num(with_timing ? e.seconds : 0.0);
    out << '\n';
  }
}

void write_train_log(const std::string& path, const TrainLog& log, bool with_timing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training log '" + path + "'");
  write_train_log(out, log, with_timing);
}

namespace {

// Separate streams so that init, shuffling and dropout don't perturb each other.
constexpr std::uint64_t kShuffleStream = 0x53485546464c45ULL;
constexpr std::uint64_t kDropoutStream = 0x44524f504f5554ULL;

double validation_auc(const PredictionSet& preds) {
  std::size_t pos = 0;
  for (const auto& p : preds) pos += static_cast<std::size_t>(p.label);
  if (pos == 0 || pos == preds.size()) return std::numeric_limits<double>::quiet_NaN();
  return auc(preds);
}

void scale(ModelParams& grad, double factor) {
  for_each_block(grad, [&](const std::string&, Mat& m) {
    for (double& x : m.values()) x *= factor;
  });
}

}  // namespace

TrainResult train(Model initial, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config) {
  validate(config);
  if (train_set.samples.empty()) throw std::invalid_argument("training set is empty");
  if (!(train_set.schema == initial.schema)) {
    throw std::invalid_argument("training set schema does not match the model");
  }
  const Dataset& val = val_set.samples.empty() ? train_set : val_set;
  if (!(val.schema == initial.schema)) {
    throw std::invalid_argument("validation set schema does not match the model");
  }

  Rng shuffle_rng(config.seed ^ kShuffleStream);
  Rng dropout_rng(config.seed ^ kDropoutStream);
  const Dropout dropout{config.dropout_rate, &dropout_rng};

  Model model = std::move(initial);
  Model best = model;
  TrainResult result{model, {}};
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ModelParams grad = zeros_like(model.params);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      for_each_block(grad, [](const std::string&, Mat& m) { m.fill(0.0); });
      for (std::size_t i = b; i < end; ++i) {
        const SparseSample& s = train_set.samples[order[i]];
        loss_sum += log_loss(s.label, accumulate_gradient(model, s, dropout, grad));
      }
      scale(grad, 1.0 / static_cast<double>(end - b));
      add_l2_gradient(model.params, config.l2_lambda, grad);
      sgd_step(model.params, grad, config.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_logloss = loss_sum / static_cast<double>(order.size());
    const PredictionSet preds = score(model, val);
    rec.val_logloss = mean_log_loss(preds);
    if (std::isnan(rec.train_logloss) || std::isnan(rec.val_logloss)) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                               ": loss is NaN");
    }
    rec.val_auc = validation_auc(preds);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);

    if (rec.val_logloss < best_loss) {
      best_loss = rec.val_logloss;
      best = model;
      result.log.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config) {
  validate(config);
  Rng rng(config.seed);
  return train(init_params(train_set.schema, config.model, rng), train_set, val_set, config);
}

}  // namespace pnnlab
