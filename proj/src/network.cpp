#include "network.hpp"

#include <stdexcept>

namespace pnnlab::detail {

void check_same_shape(const char* what, const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

namespace {

void activate_layer(Activation act, const Mat& pre, const Dropout& dropout, HeadCache& cache) {
  Mat a(pre.rows(), 1);
  for (std::size_t i = 0; i < pre.size(); ++i) a[i] = activate(act, pre[i]);
  if (dropout.active()) {
    Mat mask = dropout_mask(a.size(), dropout.rate, *dropout.rng);
    Mat h(a.rows(), 1);
    for (std::size_t i = 0; i < a.size(); ++i) h[i] = a[i] * mask[i];
    cache.mask.push_back(std::move(mask));
    cache.h.push_back(std::move(h));
  } else {
    cache.h.push_back(a);
  }
  cache.act.push_back(std::move(a));
}

Mat dense(const DenseLayer& layer, const Mat& x) {
  if (layer.w.cols() != x.rows()) {
    throw std::invalid_argument("dense layer: dimension mismatch " + layer.w.shape_string() +
                                " vs " + x.shape_string());
  }
  Mat out(layer.w.rows(), 1);
  for (std::size_t r = 0; r < layer.w.rows(); ++r) out[r] = dot(layer.w.row(r), x.values()) + layer.b[r];
  return out;
}

}  // namespace

double net_forward(const NetRef& net, const SparseSample& s, NetCache& cache,
                   const Dropout& dropout) {
  cache.valid = false;
  cache.f = embed_lookup(net.embedding, s);
  const std::size_t width = net.w1.rows();
  if (net.b1.rows() != width) check_same_shape("first layer bias", net.b1, Mat(width, 1));

  cache.a1 = lz_forward(net.w1, cache.f);
  cache.product.resize(net.terms.size());
  for (std::size_t t = 0; t < net.terms.size(); ++t) {
    const Mat lp = term_forward(net.terms[t], cache.f, cache.product[t]);
    const std::size_t offset = term_offset(net.terms[t]);
    if (offset + lp.size() > width) {
      throw std::invalid_argument("product term nodes [" + std::to_string(offset) + ", " +
                                  std::to_string(offset + lp.size()) +
                                  ") exceed first-layer width " + std::to_string(width));
    }
    for (std::size_t n = 0; n < lp.size(); ++n) cache.a1[offset + n] += lp[n];
  }
  for (std::size_t n = 0; n < width; ++n) cache.a1[n] += net.b1[n];

  HeadCache& hc = cache.head;
  hc.act.clear();
  hc.h.clear();
  hc.mask.clear();
  const Activation act = net.head.activation;
  activate_layer(act, cache.a1, dropout, hc);
  for (const auto& layer : net.head.hidden) activate_layer(act, dense(layer, hc.h.back()), dropout, hc);
  const Mat logit = dense(net.head.out, hc.h.back());
  hc.y_hat = sigmoid(logit[0]);
  cache.valid = true;
  return hc.y_hat;
}

void net_backward(const NetRef& net, const SparseSample& s, int label, const NetCache& cache,
                  const NetGrad& grad) {
  if (!cache.valid) throw std::logic_error("backward called without a forward cache");
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  const HeadCache& hc = cache.head;
  const bool masked = !hc.mask.empty();
  const Activation act = net.head.activation;

  // Output unit: d(log loss)/d(logit) = y_hat - y.
  const double dlogit = hc.y_hat - static_cast<double>(label);
  const Mat& h_last = hc.h.back();
  for (std::size_t j = 0; j < h_last.size(); ++j) grad.head.out.w[j] += dlogit * h_last[j];
  grad.head.out.b[0] += dlogit;
  Mat dh(h_last.size(), 1);
  for (std::size_t j = 0; j < dh.size(); ++j) dh[j] = dlogit * net.head.out.w[j];

  // Hidden layers, last to first; layer k > 0 is head.hidden[k - 1].
  Mat dpre;
  for (std::size_t k = hc.act.size(); k-- > 0;) {
    const Mat& a = hc.act[k];
    dpre = Mat(a.size(), 1);
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double d = masked ? dh[j] * hc.mask[k][j] : dh[j];
      dpre[j] = d * activation_grad(act, a[j]);
    }
    if (k == 0) break;
    const DenseLayer& layer = net.head.hidden[k - 1];
    DenseLayer& glayer = grad.head.hidden[k - 1];
    const Mat& in = hc.h[k - 1];
    dh = Mat(in.size(), 1);
    for (std::size_t r = 0; r < layer.w.rows(); ++r) {
      const double g = dpre[r];
      glayer.b[r] += g;
      if (g == 0.0) continue;
      auto wr = layer.w.row(r);
      auto gwr = glayer.w.row(r);
      for (std::size_t c = 0; c < in.size(); ++c) {
        gwr[c] += g * in[c];
        dh[c] += g * wr[c];
      }
    }
  }

  // First hidden layer: a1 = W1 z + sum lp + b1.
  const Mat& f = cache.f;
  auto z = f.values();
  Mat df(f.rows(), f.cols());
  auto dz = df.values();
  for (std::size_t n = 0; n < net.w1.rows(); ++n) {
    const double g = dpre[n];
    grad.b1[n] += g;
    if (g == 0.0) continue;
    auto wr = net.w1.row(n);
    auto gwr = grad.w1.row(n);
    for (std::size_t c = 0; c < z.size(); ++c) {
      gwr[c] += g * z[c];
      dz[c] += g * wr[c];
    }
  }
  for (std::size_t t = 0; t < net.terms.size(); ++t) {
    const std::size_t offset = term_offset(net.terms[t]);
    const std::size_t rows = term_rows(net.terms[t]);
    term_backward(net.terms[t], f, cache.product[t],
                  std::span<const double>(dpre.values().data() + offset, rows), grad.terms[t], df);
  }

  // Only the selected embedding columns receive gradient.
  const std::size_t m = net.embedding.order;
  for (std::size_t i = 0; i < s.categories.size(); ++i) {
    Mat& table = grad.embedding.fields[i];
    const std::size_t c = s.categories[i];
    for (std::size_t d = 0; d < m; ++d) table(d, c) += df(i, d);
  }
}

}  // namespace pnnlab::detail
