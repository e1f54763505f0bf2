#include "pnnlab/models.hpp"

#include <cmath>
#include <stdexcept>

#include "network.hpp"

namespace pnnlab {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (expected relu, tanh or sigmoid)");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return relu(x);
    case Activation::kTanh: return tanh_act(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

double activation_grad(Activation a, double output) {
  switch (a) {
    case Activation::kRelu: return output > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - output * output;
    case Activation::kSigmoid: return output * (1.0 - output);
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

Mat dropout_mask(std::size_t width, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  Mat mask(width, 1, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < width; ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

EmbeddingTable EmbeddingTable::zeros(const FieldSchema& schema, std::size_t order) {
  if (order < 1) throw std::invalid_argument("embedding order must be >= 1");
  EmbeddingTable t;
  t.order = order;
  t.fields.reserve(schema.num_fields());
  for (std::size_t i = 0; i < schema.num_fields(); ++i) {
    t.fields.emplace_back(order, schema.cardinality(i));
  }
  return t;
}

Mat embed_lookup(const EmbeddingTable& table, const SparseSample& s) {
  if (s.categories.size() != table.num_fields()) {
    throw std::invalid_argument("embed_lookup: sample has " + std::to_string(s.categories.size()) +
                                " fields, table has " + std::to_string(table.num_fields()));
  }
  const std::size_t m = table.order;
  Mat f(table.num_fields(), m);
  for (std::size_t i = 0; i < table.num_fields(); ++i) {
    const Mat& w = table.fields[i];
    const std::size_t c = s.categories[i];
    if (c >= w.cols()) {
      throw std::out_of_range("embed_lookup: category " + std::to_string(c) + " of field " +
                              std::to_string(i) + " exceeds cardinality " +
                              std::to_string(w.cols()));
    }
    for (std::size_t d = 0; d < m; ++d) f(i, d) = w(d, c);
  }
  return f;
}

MlpHead MlpHead::zeros(std::size_t first_width, std::size_t width, std::size_t hidden_layers,
                       Activation activation) {
  if (hidden_layers < 1) throw std::invalid_argument("at least one hidden layer required");
  MlpHead h;
  h.activation = activation;
  std::size_t in = first_width;
  for (std::size_t k = 1; k < hidden_layers; ++k) {
    h.hidden.push_back({Mat(width, in), Mat(width, 1)});
    in = width;
  }
  h.out = {Mat(1, in), Mat(1, 1)};
  return h;
}

// ---------------------------------------------------------------------------
// LR

namespace {

std::vector<std::size_t> schema_offsets(const FieldSchema& schema) {
  std::vector<std::size_t> off(schema.num_fields());
  for (std::size_t i = 0; i < off.size(); ++i) off[i] = schema.offset(i);
  return off;
}

std::size_t one_hot_index(const std::vector<std::size_t>& offsets, const Mat& w,
                          const SparseSample& s, std::size_t i) {
  const std::size_t idx = offsets[i] + s.categories[i];
  const std::size_t end = i + 1 < offsets.size() ? offsets[i + 1] : w.rows();
  if (idx >= end) {
    throw std::out_of_range("category " + std::to_string(s.categories[i]) +
                            " out of range for field " + std::to_string(i));
  }
  return idx;
}

void check_fields(const std::vector<std::size_t>& offsets, const SparseSample& s) {
  if (s.categories.size() != offsets.size()) {
    throw std::invalid_argument("sample has " + std::to_string(s.categories.size()) +
                                " fields, model has " + std::to_string(offsets.size()));
  }
}

}  // namespace

LrParams lr_zeros(const FieldSchema& schema) {
  return {schema_offsets(schema), Mat(schema.one_hot_dim(), 1), Mat(1, 1)};
}

double lr_forward(const LrParams& p, const SparseSample& s) {
  check_fields(p.offsets, s);
  double logit = p.bias[0];
  for (std::size_t i = 0; i < s.categories.size(); ++i) logit += p.w[one_hot_index(p.offsets, p.w, s, i)];
  return sigmoid(logit);
}

void lr_accumulate(const LrParams& p, const SparseSample& s, double dlogit, LrParams& grad) {
  check_fields(p.offsets, s);
  for (std::size_t i = 0; i < s.categories.size(); ++i) {
    grad.w[one_hot_index(p.offsets, p.w, s, i)] += dlogit;
  }
  grad.bias[0] += dlogit;
}

LrParams lr_backward(const LrParams& p, const SparseSample& s, int label, double l2) {
  LrParams grad{p.offsets, Mat(p.w.rows(), 1), Mat(1, 1)};
  lr_accumulate(p, s, lr_forward(p, s) - label, grad);
  if (l2 > 0.0) axpy(2.0 * l2, p.w, grad.w);
  return grad;
}

// ---------------------------------------------------------------------------
// FM

FmParams fm_zeros(const FieldSchema& schema, std::size_t order) {
  if (order < 1) throw std::invalid_argument("FM order must be >= 1");
  return {schema_offsets(schema), Mat(1, 1), Mat(schema.one_hot_dim(), 1),
          Mat(schema.one_hot_dim(), order)};
}

double fm_logit(const FmParams& p, const SparseSample& s) {
  check_fields(p.offsets, s);
  const std::size_t m = p.order();
  double linear = p.w0[0];
  std::vector<double> sum(m, 0.0);
  double sq = 0.0;
  for (std::size_t i = 0; i < s.categories.size(); ++i) {
    const std::size_t idx = one_hot_index(p.offsets, p.w, s, i);
    linear += p.w[idx];
    for (std::size_t d = 0; d < m; ++d) {
      const double v = p.v(idx, d);
      sum[d] += v;
      sq += v * v;
    }
  }
  double total = 0.0;
  for (double x : sum) total += x * x;
  return linear + 0.5 * (total - sq);
}

double fm_forward(const FmParams& p, const SparseSample& s) { return sigmoid(fm_logit(p, s)); }

void fm_accumulate(const FmParams& p, const SparseSample& s, double dlogit, FmParams& grad) {
  check_fields(p.offsets, s);
  const std::size_t m = p.order();
  std::vector<double> sum(m, 0.0);
  for (std::size_t i = 0; i < s.categories.size(); ++i) {
    const std::size_t idx = one_hot_index(p.offsets, p.w, s, i);
    for (std::size_t d = 0; d < m; ++d) sum[d] += p.v(idx, d);
  }
  grad.w0[0] += dlogit;
  for (std::size_t i = 0; i < s.categories.size(); ++i) {
    const std::size_t idx = p.offsets[i] + s.categories[i];
    grad.w[idx] += dlogit;
    for (std::size_t d = 0; d < m; ++d) grad.v(idx, d) += dlogit * (sum[d] - p.v(idx, d));
  }
}

FmParams fm_backward(const FmParams& p, const SparseSample& s, int label, double l2) {
  FmParams grad{p.offsets, Mat(1, 1), Mat(p.w.rows(), 1), Mat(p.v.rows(), p.v.cols())};
  fm_accumulate(p, s, fm_forward(p, s) - label, grad);
  if (l2 > 0.0) {
    axpy(2.0 * l2, p.w, grad.w);
    axpy(2.0 * l2, p.v, grad.v);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// FNN

FnnParams fnn_zeros(const FieldSchema& schema, std::size_t order, std::size_t d1, std::size_t d2,
                    std::size_t hidden_layers, Activation activation) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("hidden widths must be >= 1");
  FnnParams p;
  p.embedding = EmbeddingTable::zeros(schema, order);
  p.w1 = Mat(d1, schema.num_fields() * order);
  p.b1 = Mat(d1, 1);
  p.head = MlpHead::zeros(d1, d2, hidden_layers, activation);
  return p;
}

double fnn_forward(const FnnParams& p, const SparseSample& s, NetCache* cache,
                   const Dropout& dropout) {
  NetCache local;
  return detail::net_forward({p.embedding, p.w1, p.b1, {}, p.head}, s, cache ? *cache : local,
                             dropout);
}

void fnn_backward(const FnnParams& p, const SparseSample& s, int label, const NetCache& cache,
                  FnnParams& grad) {
  detail::net_backward({p.embedding, p.w1, p.b1, {}, p.head}, s, label, cache,
                       {grad.embedding, grad.w1, grad.b1, {}, grad.head});
}

FnnParams fnn_backward(const FnnParams& p, const SparseSample& s, int label) {
  NetCache cache;
  fnn_forward(p, s, &cache);
  FnnParams grad = p;
  FnnParams::visit(grad, [](const std::string&, Mat& m) { m.fill(0.0); });
  fnn_backward(p, s, label, cache, grad);
  return grad;
}

EmbeddingTable fm_pretrain_embedding(const FmParams& fm, const FieldSchema& schema,
                                     std::size_t order) {
  if (fm.order() != order) {
    throw std::invalid_argument("fm_pretrain_embedding: FM order " + std::to_string(fm.order()) +
                                " does not match embedding order " + std::to_string(order));
  }
  if (fm.v.rows() != schema.one_hot_dim()) {
    throw std::invalid_argument("fm_pretrain_embedding: FM covers " + std::to_string(fm.v.rows()) +
                                " one-hot dimensions, schema has " +
                                std::to_string(schema.one_hot_dim()));
  }
  EmbeddingTable t = EmbeddingTable::zeros(schema, order);
  for (std::size_t i = 0; i < schema.num_fields(); ++i) {
    for (std::size_t c = 0; c < schema.cardinality(i); ++c) {
      for (std::size_t d = 0; d < order; ++d) t.fields[i](d, c) = fm.v(schema.offset(i) + c, d);
    }
  }
  return t;
}

}  // namespace pnnlab
