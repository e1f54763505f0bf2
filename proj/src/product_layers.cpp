#include "pnnlab/product_layers.hpp"

#include <cmath>
#include <stdexcept>

#include "network.hpp"

namespace pnnlab {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

void require_symmetric(const Mat& w, std::size_t node, const char* op) {
  if (w.rows() != w.cols()) {
    throw std::invalid_argument(std::string(op) + ": node " + std::to_string(node) +
                                " weight is not square (" + w.shape_string() + ")");
  }
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = i + 1; j < w.cols(); ++j) {
      if (std::abs(w(i, j) - w(j, i)) > kSymmetryTolerance) {
        throw std::invalid_argument(std::string(op) + ": node " + std::to_string(node) +
                                    " weight is not symmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
      }
    }
  }
}

std::size_t packed_index(std::size_t m, std::size_t a, std::size_t b) {
  return a * m - a * (a - 1) / 2 + (b - a);
}

Mat field_sum(const Mat& f) {
  Mat fs(f.cols(), 1);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t d = 0; d < f.cols(); ++d) fs[d] += f(i, d);
  }
  return fs;
}

double packed_quadratic_form(std::span<const double> u, std::span<const double> fs) {
  const std::size_t m = fs.size();
  double lp = 0.0;
  std::size_t idx = 0;
  for (std::size_t a = 0; a < m; ++a) {
    double acc = u[idx++] * fs[a];
    double off = 0.0;
    for (std::size_t b = a + 1; b < m; ++b) off += u[idx++] * fs[b];
    lp += fs[a] * (acc + 2.0 * off);
  }
  return lp;
}

// Writes sum_i theta^n_ik f_i into sums(n, k*M + d) and returns lp.
Mat inner_sums_and_lp(const Mat& theta, std::size_t k, const Mat& f, Mat& sums) {
  const std::size_t n_fields = f.rows();
  const std::size_t m = f.cols();
  if (k < 1 || theta.cols() != n_fields * k) {
    throw std::invalid_argument("inner product: theta " + theta.shape_string() +
                                " does not match N=" + std::to_string(n_fields) +
                                " K=" + std::to_string(k));
  }
  sums = Mat(theta.rows(), k * m);
  Mat lp(theta.rows(), 1);
  for (std::size_t n = 0; n < theta.rows(); ++n) {
    auto th = theta.row(n);
    auto s = sums.row(n);
    for (std::size_t i = 0; i < n_fields; ++i) {
      auto fi = f.row(i);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double t = th[i * k + kk];
        double* dst = s.data() + kk * m;
        for (std::size_t d = 0; d < m; ++d) dst[d] += t * fi[d];
      }
    }
    double acc = 0.0;
    for (double x : s) acc += x * x;
    lp[n] = acc;
  }
  return lp;
}

Mat inner_products(const Mat& f) {
  Mat p(f.rows(), f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = i; j < f.rows(); ++j) {
      p(i, j) = dot(f.row(i), f.row(j));
      p(j, i) = p(i, j);
    }
  }
  return p;
}

double quadratic_form(const Mat& w, std::span<const double> z) {
  double lp = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) lp += z[r] * dot(w.row(r), z);
  return lp;
}

}  // namespace

Mat lz_forward(const Mat& wz, const Mat& f) {
  if (wz.cols() != f.size()) {
    throw std::invalid_argument("lz_forward: dimension mismatch " + wz.shape_string() + " vs " +
                                f.shape_string());
  }
  Mat lz(wz.rows(), 1);
  for (std::size_t n = 0; n < wz.rows(); ++n) lz[n] = dot(wz.row(n), f.values());
  return lz;
}

Mat ipnn_lp_naive(std::span<const Mat> wp_full, const Mat& f) {
  for (std::size_t n = 0; n < wp_full.size(); ++n) {
    if (wp_full[n].rows() != f.rows()) {
      throw std::invalid_argument("ipnn_lp_naive: dimension mismatch " + wp_full[n].shape_string() +
                                  " vs " + f.shape_string());
    }
    require_symmetric(wp_full[n], n, "ipnn_lp_naive");
  }
  const Mat p = inner_products(f);
  Mat lp(wp_full.size(), 1);
  for (std::size_t n = 0; n < wp_full.size(); ++n) lp[n] = dot(wp_full[n].values(), p.values());
  return lp;
}

Mat ipnn_lp_factorized(const Mat& theta, const Mat& f) {
  Mat sums;
  return inner_sums_and_lp(theta, 1, f, sums);
}

Mat ipnn_lp_korder(const Mat& theta, std::size_t k, const Mat& f) {
  Mat sums;
  return inner_sums_and_lp(theta, k, f, sums);
}

Mat opnn_lp_naive(std::span<const Mat> blocks, const Mat& f) {
  Mat lp(blocks.size(), 1);
  for (std::size_t n = 0; n < blocks.size(); ++n) {
    if (blocks[n].rows() != f.size() || blocks[n].cols() != f.size()) {
      throw std::invalid_argument("opnn_lp_naive: dimension mismatch " + blocks[n].shape_string() +
                                  " vs " + f.shape_string());
    }
    lp[n] = quadratic_form(blocks[n], f.values());
  }
  return lp;
}

Mat opnn_lp_superposed(std::span<const Mat> wp, const Mat& f) {
  for (std::size_t n = 0; n < wp.size(); ++n) {
    if (wp[n].rows() != f.cols()) {
      throw std::invalid_argument("opnn_lp_superposed: dimension mismatch " + wp[n].shape_string() +
                                  " vs " + f.shape_string());
    }
    require_symmetric(wp[n], n, "opnn_lp_superposed");
  }
  const Mat fs = field_sum(f);
  Mat lp(wp.size(), 1);
  for (std::size_t n = 0; n < wp.size(); ++n) lp[n] = quadratic_form(wp[n], fs.values());
  return lp;
}

std::size_t packed_size(std::size_t m) { return m * (m + 1) / 2; }

std::size_t packed_order(std::size_t packed) {
  std::size_t m = 0;
  while (packed_size(m) < packed) ++m;
  if (packed_size(m) != packed) {
    throw std::invalid_argument(std::to_string(packed) + " is not a packed triangle size");
  }
  return m;
}

Mat pack_symmetric(std::span<const Mat> wp) {
  if (wp.empty()) return {};
  const std::size_t m = wp[0].rows();
  Mat packed(wp.size(), packed_size(m));
  for (std::size_t n = 0; n < wp.size(); ++n) {
    require_symmetric(wp[n], n, "pack_symmetric");
    if (wp[n].rows() != m) throw std::invalid_argument("pack_symmetric: mixed orders");
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a; b < m; ++b) packed(n, packed_index(m, a, b)) = wp[n](a, b);
    }
  }
  return packed;
}

Mat unpack_symmetric(const Mat& packed, std::size_t node) {
  const std::size_t m = packed_order(packed.cols());
  Mat w(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      w(a, b) = packed(node, packed_index(m, a, b));
      w(b, a) = w(a, b);
    }
  }
  return w;
}

Mat opnn_lp_packed(const Mat& packed, const Mat& f) {
  if (packed.cols() != packed_size(f.cols())) {
    throw std::invalid_argument("opnn_lp_packed: dimension mismatch " + packed.shape_string() +
                                " vs " + f.shape_string());
  }
  const Mat fs = field_sum(f);
  Mat lp(packed.rows(), 1);
  for (std::size_t n = 0; n < packed.rows(); ++n) lp[n] = packed_quadratic_form(packed.row(n), fs.values());
  return lp;
}

std::size_t term_rows(const ProductTerm& term) {
  return std::visit(
      [](const auto& t) -> std::size_t {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, InnerProductTerm>) return t.theta.rows();
        else if constexpr (std::is_same_v<T, OuterProductTerm>) return t.wp.rows();
        else return t.wp.size();
      },
      term);
}

std::size_t term_offset(const ProductTerm& term) {
  return std::visit([](const auto& t) { return t.offset; }, term);
}

// ---------------------------------------------------------------------------
// Per-term forward and backward used by the network core.

namespace detail {

namespace {

struct TermForward {
  const Mat& f;
  Mat& aux;

  Mat operator()(const InnerProductTerm& t) const { return inner_sums_and_lp(t.theta, t.order, f, aux); }

  Mat operator()(const OuterProductTerm& t) const {
    if (t.wp.cols() != packed_size(f.cols())) {
      throw std::invalid_argument("outer product: wp " + t.wp.shape_string() +
                                  " does not match M=" + std::to_string(f.cols()));
    }
    aux = field_sum(f);
    Mat lp(t.wp.rows(), 1);
    for (std::size_t n = 0; n < t.wp.rows(); ++n) lp[n] = packed_quadratic_form(t.wp.row(n), aux.values());
    return lp;
  }

  Mat operator()(const NaiveInnerTerm& t) const {
    aux = inner_products(f);
    Mat lp(t.wp.size(), 1);
    for (std::size_t n = 0; n < t.wp.size(); ++n) {
      check_same_shape("naive inner product", t.wp[n], aux);
      lp[n] = dot(t.wp[n].values(), aux.values());
    }
    return lp;
  }

  Mat operator()(const NaiveOuterTerm& t) const {
    Mat lp(t.wp.size(), 1);
    for (std::size_t n = 0; n < t.wp.size(); ++n) {
      if (t.wp[n].rows() != f.size() || t.wp[n].cols() != f.size()) {
        throw std::invalid_argument("naive outer product: dimension mismatch " +
                                    t.wp[n].shape_string() + " vs " + f.shape_string());
      }
      lp[n] = quadratic_form(t.wp[n], f.values());
    }
    return lp;
  }
};

struct TermBackward {
  const Mat& f;
  const Mat& aux;
  std::span<const double> g;  // dL/dlp for this term's nodes
  ProductTerm& grad;
  Mat& df;

  void operator()(const InnerProductTerm& t) const {
    auto& gt = std::get<InnerProductTerm>(grad);
    const std::size_t k = t.order;
    const std::size_t m = f.cols();
    for (std::size_t n = 0; n < t.theta.rows(); ++n) {
      if (g[n] == 0.0) continue;
      const double two_g = 2.0 * g[n];
      auto th = t.theta.row(n);
      auto gth = gt.theta.row(n);
      auto s = aux.row(n);
      for (std::size_t i = 0; i < f.rows(); ++i) {
        auto fi = f.row(i);
        auto dfi = df.row(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* sk = s.data() + kk * m;
          double acc = 0.0;
          for (std::size_t d = 0; d < m; ++d) acc += sk[d] * fi[d];
          gth[i * k + kk] += two_g * acc;
          const double scale = two_g * th[i * k + kk];
          for (std::size_t d = 0; d < m; ++d) dfi[d] += scale * sk[d];
        }
      }
    }
  }

  void operator()(const OuterProductTerm& t) const {
    auto& gt = std::get<OuterProductTerm>(grad);
    const std::size_t m = f.cols();
    std::vector<double> dfs(m, 0.0);
    for (std::size_t n = 0; n < t.wp.rows(); ++n) {
      if (g[n] == 0.0) continue;
      auto u = t.wp.row(n);
      auto gu = gt.wp.row(n);
      std::size_t idx = 0;
      for (std::size_t a = 0; a < m; ++a) {
        gu[idx] += g[n] * aux[a] * aux[a];
        dfs[a] += 2.0 * g[n] * u[idx] * aux[a];
        ++idx;
        for (std::size_t b = a + 1; b < m; ++b, ++idx) {
          gu[idx] += 2.0 * g[n] * aux[a] * aux[b];
          dfs[a] += 2.0 * g[n] * u[idx] * aux[b];
          dfs[b] += 2.0 * g[n] * u[idx] * aux[a];
        }
      }
    }
    // Every field receives the gradient at f_sum.
    for (std::size_t i = 0; i < f.rows(); ++i) {
      for (std::size_t d = 0; d < m; ++d) df(i, d) += dfs[d];
    }
  }

  void operator()(const NaiveInnerTerm& t) const {
    auto& gt = std::get<NaiveInnerTerm>(grad);
    const std::size_t n_fields = f.rows();
    Mat dp(n_fields, n_fields);
    for (std::size_t n = 0; n < t.wp.size(); ++n) {
      if (g[n] == 0.0) continue;
      axpy(g[n], aux, gt.wp[n]);
      axpy(g[n], t.wp[n], dp);
    }
    for (std::size_t i = 0; i < n_fields; ++i) {
      auto dfi = df.row(i);
      for (std::size_t j = 0; j < n_fields; ++j) {
        const double c = dp(i, j) + dp(j, i);
        auto fj = f.row(j);
        for (std::size_t d = 0; d < f.cols(); ++d) dfi[d] += c * fj[d];
      }
    }
  }

  void operator()(const NaiveOuterTerm& t) const {
    auto& gt = std::get<NaiveOuterTerm>(grad);
    auto z = f.values();
    auto dz = df.values();
    for (std::size_t n = 0; n < t.wp.size(); ++n) {
      if (g[n] == 0.0) continue;
      const Mat& w = t.wp[n];
      Mat& gw = gt.wp[n];
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double gz = g[n] * z[r];
        auto wr = w.row(r);
        auto gwr = gw.row(r);
        double row_dot = 0.0;
        for (std::size_t c = 0; c < w.cols(); ++c) {
          gwr[c] += gz * z[c];
          row_dot += wr[c] * z[c];
          dz[c] += gz * wr[c];
        }
        dz[r] += g[n] * row_dot;
      }
    }
  }
};

}  // namespace

Mat term_forward(const ProductTerm& term, const Mat& f, Mat& aux) {
  return std::visit(TermForward{f, aux}, term);
}

void term_backward(const ProductTerm& term, const Mat& f, const Mat& aux,
                   std::span<const double> g, ProductTerm& grad, Mat& df) {
  if (grad.index() != term.index()) throw std::invalid_argument("gradient term kind mismatch");
  std::visit(TermBackward{f, aux, g, grad, df}, term);
}

}  // namespace detail

// ---------------------------------------------------------------------------

PnnParams pnn_zeros(const FieldSchema& schema, const PnnShape& shape) {
  if (shape.d1 < 1 || shape.d2 < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (shape.k_order < 1) throw std::invalid_argument("k_order must be >= 1");
  const std::size_t n = schema.num_fields();
  const std::size_t m = shape.order;
  const bool concat = shape.variant == ProductVariant::kBoth && shape.fusion == Fusion::kConcat;
  const std::size_t width = concat ? 2 * shape.d1 : shape.d1;

  PnnParams p;
  p.embedding = EmbeddingTable::zeros(schema, m);
  p.wz = Mat(width, n * m);
  p.b1 = Mat(width, 1);
  switch (shape.variant) {
    case ProductVariant::kNone:
      break;
    case ProductVariant::kInner:
      p.terms.emplace_back(InnerProductTerm{Mat(shape.d1, n * shape.k_order), shape.k_order, 0});
      break;
    case ProductVariant::kOuter:
      p.terms.emplace_back(OuterProductTerm{Mat(shape.d1, packed_size(m)), 0});
      break;
    case ProductVariant::kBoth:
      p.terms.emplace_back(InnerProductTerm{Mat(shape.d1, n * shape.k_order), shape.k_order, 0});
      p.terms.emplace_back(OuterProductTerm{Mat(shape.d1, packed_size(m)), concat ? shape.d1 : 0});
      break;
    case ProductVariant::kNaiveInner:
      p.terms.emplace_back(NaiveInnerTerm{std::vector<Mat>(shape.d1, Mat(n, n)), 0});
      break;
    case ProductVariant::kNaiveOuter:
      p.terms.emplace_back(NaiveOuterTerm{std::vector<Mat>(shape.d1, Mat(n * m, n * m)), 0});
      break;
  }
  p.head = MlpHead::zeros(width, shape.d2, shape.hidden_layers, shape.activation);
  return p;
}

double pnn_forward(const PnnParams& p, const SparseSample& s, NetCache* cache,
                   const Dropout& dropout) {
  NetCache local;
  return detail::net_forward({p.embedding, p.wz, p.b1, p.terms, p.head}, s,
                             cache ? *cache : local, dropout);
}

void pnn_backward(const PnnParams& p, const SparseSample& s, int label, const NetCache& cache,
                  PnnParams& grad) {
  detail::net_backward({p.embedding, p.wz, p.b1, p.terms, p.head}, s, label, cache,
                       {grad.embedding, grad.wz, grad.b1, grad.terms, grad.head});
}

PnnParams pnn_backward(const PnnParams& p, const SparseSample& s, int label) {
  NetCache cache;
  pnn_forward(p, s, &cache);
  PnnParams grad = p;
  PnnParams::visit(grad, [](const std::string&, Mat& m) { m.fill(0.0); });
  pnn_backward(p, s, label, cache, grad);
  return grad;
}

PnnParams without_product(const PnnParams& p) {
  PnnParams out = p;
  out.terms.clear();
  return out;
}

FnnParams degeneracy_fnn(const PnnParams& p) { return {p.embedding, p.wz, p.b1, p.head}; }

PnnParams degeneracy_fm(const FieldSchema& schema, std::size_t order, const FmParams& fm) {
  if (fm.order() != order || fm.w.rows() != schema.one_hot_dim()) {
    throw std::invalid_argument("degeneracy_fm: FM parameters do not match schema and order");
  }
  const std::size_t n = schema.num_fields();
  const std::size_t width = order + n;

  PnnShape shape;
  shape.order = width;
  shape.d1 = 1;
  shape.d2 = 1;
  shape.hidden_layers = 1;
  shape.activation = Activation::kIdentity;
  shape.variant = ProductVariant::kNaiveInner;
  PnnParams p = pnn_zeros(schema, shape);

  for (std::size_t i = 0; i < n; ++i) {
    Mat& table = p.embedding.fields[i];
    for (std::size_t c = 0; c < schema.cardinality(i); ++c) {
      const std::size_t idx = schema.offset(i) + c;
      for (std::size_t d = 0; d < order; ++d) table(d, c) = fm.v(idx, d);
      table(order + i, c) = fm.w[idx];
    }
    p.wz(0, i * width + order + i) = 1.0;
  }
  p.b1[0] = fm.w0[0];
  Mat& wp = std::get<NaiveInnerTerm>(p.terms[0]).wp[0];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) wp(i, j) = i == j ? 0.0 : 0.5;
  }
  p.head.out.w[0] = 1.0;
  return p;
}

}  // namespace pnnlab
