#pragma once

// Gradient checking and product-layer scaling benchmarks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnnlab/model.hpp"

namespace pnnlab {

struct GradcheckConfig {
  ModelKind kind = ModelKind::kIpnn;
  std::size_t k_order = 1;
  Activation activation = Activation::kRelu;
  Fusion fusion = Fusion::kAdd;
  std::size_t fields = 5;
  std::size_t cardinality = 4;
  std::size_t order = 3;
  std::size_t d1 = 4;
  std::size_t d2 = 3;
  std::size_t hidden_layers = 3;
  std::size_t draws = 10;
  std::size_t batch = 4;     // samples per draw; the checked loss is their mean
  double l2_lambda = 0.01;   // LR and FM only
  double param_scale = 0.5;  // parameters ~ U(-scale, scale)
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  bool corrupt = false;  // perturbs one analytic entry; the check must then fail
};

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<BlockCheck> blocks;
  bool passed = true;
};

// Elementwise |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

GradcheckReport gradcheck(const GradcheckConfig& config);

enum class BenchForm { kNaiveInner, kFactorizedInner, kNaiveOuter, kSuperposedOuter };

std::string_view to_string(BenchForm form);
BenchForm parse_bench_form(std::string_view name);

struct BenchConfig {
  std::vector<std::size_t> ns{8, 16, 32, 64, 128, 256};
  std::size_t order = 10;
  std::size_t d1 = 32;
  std::vector<BenchForm> forms{BenchForm::kNaiveInner, BenchForm::kFactorizedInner,
                               BenchForm::kNaiveOuter, BenchForm::kSuperposedOuter};
  double min_seconds = 0.02;  // per timing run
  std::size_t repeats = 5;    // the fastest run is kept
  std::uint64_t seed = 1;
};

struct BenchRow {
  BenchForm form;
  std::size_t n = 0;
  double seconds = 0.0;  // per call of the first-layer product signal lz + lp
};

struct BenchSlope {
  BenchForm form;
  double slope = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchSlope> slopes;
};

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

BenchReport run_bench(const BenchConfig& config);

}  // namespace pnnlab
