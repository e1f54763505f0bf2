#pragma once

// Shared forward/backward for the embedding networks (FNN and every PNN).

#include <span>

#include "pnnlab/models.hpp"
#include "pnnlab/product_layers.hpp"

namespace pnnlab::detail {

struct NetRef {
  const EmbeddingTable& embedding;
  const Mat& w1;
  const Mat& b1;
  std::span<const ProductTerm> terms;
  const MlpHead& head;
};

struct NetGrad {
  EmbeddingTable& embedding;
  Mat& w1;
  Mat& b1;
  std::span<ProductTerm> terms;
  MlpHead& head;
};

double net_forward(const NetRef& net, const SparseSample& s, NetCache& cache,
                   const Dropout& dropout);
void net_backward(const NetRef& net, const SparseSample& s, int label, const NetCache& cache,
                  const NetGrad& grad);

void check_same_shape(const char* what, const Mat& a, const Mat& b);

// lp contribution of one product term; `aux` receives what backward needs.
Mat term_forward(const ProductTerm& term, const Mat& f, Mat& aux);
// Accumulates into `grad` (same alternative as `term`) and into df, given dL/dlp.
void term_backward(const ProductTerm& term, const Mat& f, const Mat& aux,
                   std::span<const double> g, ProductTerm& grad, Mat& df);

}  // namespace pnnlab::detail
