#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pnnlab/data.hpp"
#include "pnnlab/numkit.hpp"

namespace pnnlab {

enum class Activation { kRelu, kTanh, kSigmoid, kIdentity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);
double activate(Activation a, double x);
// Derivative expressed through the activation's output value.
double activation_grad(Activation a, double output);

// Inverted dropout on hidden-layer outputs. A null rng means evaluation mode.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

// Each entry is 0 with probability `rate`, else 1 / (1 - rate).
Mat dropout_mask(std::size_t width, double rate, Rng& rng);

// Per-field matrices W0^i of shape M x cardinality_i. With one-hot input the
// field embedding is a column selection.
struct EmbeddingTable {
  std::size_t order = 0;
  std::vector<Mat> fields;

  static EmbeddingTable zeros(const FieldSchema& schema, std::size_t order);
  std::size_t num_fields() const { return fields.size(); }

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    for (std::size_t i = 0; i < self.fields.size(); ++i) {
      fn("embedding." + std::to_string(i), self.fields[i]);
    }
  }
};

// N x M matrix whose row i is column categories[i] of W0^i.
Mat embed_lookup(const EmbeddingTable& table, const SparseSample& s);

struct DenseLayer {
  Mat w;
  Mat b;
};

// Everything above the first hidden layer: optional further hidden layers and
// the sigmoid output unit. The activation applies to every hidden layer,
// including the first one that feeds this head.
struct MlpHead {
  Activation activation = Activation::kRelu;
  std::vector<DenseLayer> hidden;
  DenseLayer out;

  // `hidden_layers` counts the first hidden layer (width `first_width`); the
  // remaining ones have width `width`.
  static MlpHead zeros(std::size_t first_width, std::size_t width, std::size_t hidden_layers,
                       Activation activation);

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    for (std::size_t k = 0; k < self.hidden.size(); ++k) {
      fn("head.w." + std::to_string(k), self.hidden[k].w);
      fn("head.b." + std::to_string(k), self.hidden[k].b);
    }
    fn(std::string("out.w"), self.out.w);
    fn(std::string("out.b"), self.out.b);
  }
};

struct HeadCache {
  std::vector<Mat> act;   // activation outputs before the dropout mask
  std::vector<Mat> h;     // after the mask
  std::vector<Mat> mask;  // empty in evaluation mode
  double y_hat = 0.5;
};

// Intermediates of an embedding network's forward pass, consumed by backward.
struct NetCache {
  bool valid = false;
  Mat f;                     // N x M embeddings
  Mat a1;                    // first hidden layer pre-activation
  std::vector<Mat> product;  // per product term
  HeadCache head;
};

struct LrParams {
  std::vector<std::size_t> offsets;  // field offsets into w
  Mat w;                             // one_hot_dim x 1
  Mat bias;                          // 1 x 1

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    fn(std::string("w"), self.w);
    fn(std::string("bias"), self.bias);
  }
};

struct FmParams {
  std::vector<std::size_t> offsets;
  Mat w0;  // 1 x 1
  Mat w;   // one_hot_dim x 1
  Mat v;   // one_hot_dim x M, row d is the latent vector of one-hot dimension d

  std::size_t order() const { return v.cols(); }

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    fn(std::string("w0"), self.w0);
    fn(std::string("w"), self.w);
    fn(std::string("v"), self.v);
  }
};

// Embeddings concatenated into a length N*M vector, a dense first layer, then the head.
struct FnnParams {
  EmbeddingTable embedding;
  Mat w1;  // D1 x (N*M)
  Mat b1;  // D1 x 1
  MlpHead head;

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    EmbeddingTable::visit(self.embedding, fn);
    fn(std::string("w1"), self.w1);
    fn(std::string("b1"), self.b1);
    MlpHead::visit(self.head, fn);
  }
};

LrParams lr_zeros(const FieldSchema& schema);
double lr_forward(const LrParams& p, const SparseSample& s);
// Gradient of log loss plus l2 * ||w||^2.
LrParams lr_backward(const LrParams& p, const SparseSample& s, int label, double l2 = 0.0);
// Adds the data-term gradient for d(loss)/d(logit) == dlogit.
void lr_accumulate(const LrParams& p, const SparseSample& s, double dlogit, LrParams& grad);

FmParams fm_zeros(const FieldSchema& schema, std::size_t order);
double fm_logit(const FmParams& p, const SparseSample& s);
double fm_forward(const FmParams& p, const SparseSample& s);
FmParams fm_backward(const FmParams& p, const SparseSample& s, int label, double l2 = 0.0);
void fm_accumulate(const FmParams& p, const SparseSample& s, double dlogit, FmParams& grad);

FnnParams fnn_zeros(const FieldSchema& schema, std::size_t order, std::size_t d1, std::size_t d2,
                    std::size_t hidden_layers, Activation activation);
double fnn_forward(const FnnParams& p, const SparseSample& s, NetCache* cache = nullptr,
                   const Dropout& dropout = {});
void fnn_backward(const FnnParams& p, const SparseSample& s, int label, const NetCache& cache,
                  FnnParams& grad);
FnnParams fnn_backward(const FnnParams& p, const SparseSample& s, int label);

// Embedding table whose column (i, c) is the FM latent vector of one-hot dimension offset_i + c.
EmbeddingTable fm_pretrain_embedding(const FmParams& fm, const FieldSchema& schema,
                                     std::size_t order);

}  // namespace pnnlab
