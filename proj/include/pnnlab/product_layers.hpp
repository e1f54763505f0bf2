#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pnnlab/models.hpp"
#include "pnnlab/numkit.hpp"

namespace pnnlab {

// ---------------------------------------------------------------------------
// Product-layer kernels. `f` is always the N x M embedding matrix of one
// sample; every kernel returns a column vector with one entry per node n.
//
// lz^n = Wz^n (.) f, the element-wise product summed to a scalar. `wz` holds
// one node per row, Wz^n flattened row-major to length N*M.
Mat lz_forward(const Mat& wz, const Mat& f);

// Inner-product signal with a full N x N weight per node:
//   lp^n = sum_i sum_j Wp^n_ij <f_i, f_j>      (diagonal included)
// Rejects weights that are not symmetric to 1e-12.
Mat ipnn_lp_naive(std::span<const Mat> wp_full, const Mat& f);

// Rank-1 form Wp^n = theta^n theta^n^T, O(N*M) per node:
//   lp^n = || sum_i theta^n_i f_i ||^2
// `theta` is D1 x N.
Mat ipnn_lp_factorized(const Mat& theta, const Mat& f);

// K-order form Wp^n_ij = <theta^n_i, theta^n_j> with theta^n_i in R^K:
//   lp^n = sum_k || sum_i theta^n_ik f_i ||^2
// Row n of `theta` is the N x K matrix theta^n flattened row-major.
Mat ipnn_lp_korder(const Mat& theta, std::size_t k, const Mat& f);

// Outer-product signal with independent M x M blocks per field pair. Node n
// is an (N*M) x (N*M) matrix whose block (i, j) weights f_i f_j^T, so
//   lp^n = sum_ij <Wp^n_ij, f_i f_j^T> = z^T Wp^n z,   z = vec(f).
// Cost O(D1 N^2 M^2); meant for tests and benchmarks.
Mat opnn_lp_naive(std::span<const Mat> blocks, const Mat& f);

// Superposition: p = f_sum f_sum^T with f_sum = sum_i f_i, lp^n = f_sum^T Wp^n f_sum.
// Rejects Wp^n that are not symmetric to 1e-12.
Mat opnn_lp_superposed(std::span<const Mat> wp, const Mat& f);

// Symmetric M x M matrices stored as packed upper triangles, one node per row,
// entries (a, b) with a <= b in row-major order.
std::size_t packed_size(std::size_t m);
std::size_t packed_order(std::size_t packed);
Mat pack_symmetric(std::span<const Mat> wp);
Mat unpack_symmetric(const Mat& packed, std::size_t node);
Mat opnn_lp_packed(const Mat& packed, const Mat& f);

// ---------------------------------------------------------------------------
// Product terms feed nodes [offset, offset + rows) of the first hidden layer.

struct InnerProductTerm {
  Mat theta;  // rows x (N*order)
  std::size_t order = 1;
  std::size_t offset = 0;
};

struct OuterProductTerm {
  Mat wp;  // rows x packed_size(M)
  std::size_t offset = 0;
};

struct NaiveInnerTerm {
  std::vector<Mat> wp;  // N x N per node
  std::size_t offset = 0;
};

struct NaiveOuterTerm {
  std::vector<Mat> wp;  // (N*M) x (N*M) per node
  std::size_t offset = 0;
};

using ProductTerm = std::variant<InnerProductTerm, OuterProductTerm, NaiveInnerTerm, NaiveOuterTerm>;

std::size_t term_rows(const ProductTerm& term);
std::size_t term_offset(const ProductTerm& term);

// Embedding, product layer (lz + lp), first hidden layer and head.
//   l1 = act(lz + sum_terms lp + b1)
// IPNN has one InnerProductTerm, OPNN one OuterProductTerm, PNN* both; with no
// terms the network is an FNN.
struct PnnParams {
  EmbeddingTable embedding;
  Mat wz;  // D1 x (N*M)
  Mat b1;  // D1 x 1
  std::vector<ProductTerm> terms;
  MlpHead head;

  std::size_t width() const { return wz.rows(); }

  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    EmbeddingTable::visit(self.embedding, fn);
    fn(std::string("wz"), self.wz);
    fn(std::string("b1"), self.b1);
    for (auto& term : self.terms) {
      std::visit(
          [&](auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, InnerProductTerm>) {
              fn(std::string("inner.theta"), t.theta);
            } else if constexpr (std::is_same_v<T, OuterProductTerm>) {
              fn(std::string("outer.wp"), t.wp);
            } else if constexpr (std::is_same_v<T, NaiveInnerTerm>) {
              for (std::size_t n = 0; n < t.wp.size(); ++n) {
                fn("naive_inner.wp." + std::to_string(n), t.wp[n]);
              }
            } else {
              for (std::size_t n = 0; n < t.wp.size(); ++n) {
                fn("naive_outer.wp." + std::to_string(n), t.wp[n]);
              }
            }
          },
          term);
    }
    MlpHead::visit(self.head, fn);
  }
};

enum class ProductVariant { kNone, kInner, kOuter, kBoth, kNaiveInner, kNaiveOuter };
enum class Fusion { kAdd, kConcat };

struct PnnShape {
  std::size_t order = 10;  // M
  std::size_t d1 = 64;
  std::size_t d2 = 32;
  std::size_t hidden_layers = 3;
  std::size_t k_order = 1;
  Activation activation = Activation::kRelu;
  ProductVariant variant = ProductVariant::kInner;
  // PNN* only: kAdd sums both signals into D1 nodes, kConcat gives each its own D1 nodes.
  Fusion fusion = Fusion::kAdd;
};

PnnParams pnn_zeros(const FieldSchema& schema, const PnnShape& shape);

double pnn_forward(const PnnParams& p, const SparseSample& s, NetCache* cache = nullptr,
                   const Dropout& dropout = {});
// Accumulates the log-loss gradient into `grad`, which must be shaped like `p`.
void pnn_backward(const PnnParams& p, const SparseSample& s, int label, const NetCache& cache,
                  PnnParams& grad);
PnnParams pnn_backward(const PnnParams& p, const SparseSample& s, int label);

// The same network with the quadratic signal removed.
PnnParams without_product(const PnnParams& p);

// FNN whose first-layer row n is Wz^n flattened: it computes exactly what `p`
// computes with lp removed.
FnnParams degeneracy_fnn(const PnnParams& p);

// Single-node naive inner PNN that reproduces fm_forward. Embeddings have
// order M + N: the FM latent vector followed by the linear weight placed in a
// coordinate private to its field, so cross-field inner products see only the
// latent part. Wp^1 is 1/2 off the diagonal and 0 on it (the symmetric form of
// the strict pairwise sum), Wz^1 picks the private coordinates, b1 = w0,
// identity activation and a unit output weight.
PnnParams degeneracy_fm(const FieldSchema& schema, std::size_t order, const FmParams& fm);

}  // namespace pnnlab
