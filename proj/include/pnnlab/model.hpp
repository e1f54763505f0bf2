#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>

#include "pnnlab/data.hpp"
#include "pnnlab/models.hpp"
#include "pnnlab/product_layers.hpp"

namespace pnnlab {

enum class ModelKind { kLr, kFm, kFnn, kIpnn, kOpnn, kPnnStar };

std::string_view to_string(ModelKind kind);
// Throws std::invalid_argument listing the supported kinds.
ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(Fusion fusion);
Fusion parse_fusion(std::string_view name);
bool is_network(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::kIpnn;
  std::size_t embedding_order = 10;  // M, also the FM factorization order
  std::size_t d1 = 64;
  std::size_t d2 = 32;
  // Counts the first hidden layer (fed by the product layer, or by the
  // concatenated embeddings for FNN).
  std::size_t hidden_layers = 3;
  std::size_t k_order = 1;
  Activation activation = Activation::kRelu;
  Fusion fusion = Fusion::kAdd;
  double embedding_init = 0.01;  // embeddings ~ U(-a, a)
};

void validate(const ModelConfig& config);

using ModelParams = std::variant<LrParams, FmParams, FnnParams, PnnParams>;

struct Model {
  ModelConfig config;
  FieldSchema schema;
  ModelParams params;
};

// Zero-valued parameters with the shapes `config` implies.
Model zero_model(const FieldSchema& schema, const ModelConfig& config);

// Dense matrices ~ U(-sqrt(6 / (fan_in + fan_out)), +...), biases zero,
// embeddings ~ U(-embedding_init, +embedding_init).
Model init_params(const FieldSchema& schema, const ModelConfig& config, Rng& rng);

template <class F>
void for_each_block(ModelParams& params, F&& fn) {
  std::visit([&](auto& p) { std::decay_t<decltype(p)>::visit(p, fn); }, params);
}

template <class F>
void for_each_block(const ModelParams& params, F&& fn) {
  std::visit([&](const auto& p) { std::decay_t<decltype(p)>::visit(p, fn); }, params);
}

ModelParams zeros_like(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

// Evaluation-mode prediction in (0, 1).
double predict(const Model& model, const SparseSample& s);

// Adds d(log loss)/d(params) for one sample into `grad` and returns the
// training-mode prediction. Regularization is not included.
double accumulate_gradient(const Model& model, const SparseSample& s, const Dropout& dropout,
                           ModelParams& grad);

// Checkpoint: header "pnnlab-v1 <kind> <N> <M> <D1> <D2> <activation>", a
// "fields <name_1> <card_1> ... <name_N> <card_N>" line, then for every parameter block a
// "<name> <rows> <cols>" line followed by one line of shortest round-trip
// decimals per row.
void write_checkpoint(std::ostream& out, const Model& model);
void write_checkpoint(const std::string& path, const Model& model);
Model read_checkpoint(std::istream& in);
Model read_checkpoint(const std::string& path);

}  // namespace pnnlab
