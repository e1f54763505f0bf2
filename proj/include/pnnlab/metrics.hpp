#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pnnlab/data.hpp"
#include "pnnlab/model.hpp"

namespace pnnlab {

struct Prediction {
  int label = 0;
  double score = 0.0;
};

using PredictionSet = std::vector<Prediction>;

// Mann-Whitney AUC, tied scores count one half. Throws on single-class input.
double auc(std::span<const Prediction> preds);
double mean_log_loss(std::span<const Prediction> preds);
double rmse(std::span<const Prediction> preds);
// Binary entropy in nats.
double entropy(double rate);
// 1 - mean log loss / entropy(base rate). Throws when the base rate is 0 or 1.
double rig(std::span<const Prediction> preds);

struct MetricsReport {
  std::string model;
  std::size_t n = 0;
  double auc = 0.0;
  double log_loss = 0.0;
  double rmse = 0.0;
  double rig = 0.0;
  double base_rate = 0.0;
};

MetricsReport report(std::string model, std::span<const Prediction> preds);

// CSV row model,n,auc,logloss,rmse,rig.
std::string metrics_csv_header();
std::string to_csv(const MetricsReport& r);

// Scores every sample; with w < 1 each score goes through recalibrate(p, w).
PredictionSet score(const Model& model, const Dataset& ds, double downsampling_ratio = 1.0);
MetricsReport evaluate(const Model& model, const Dataset& ds, double downsampling_ratio = 1.0);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  // Differences have zero variance: p is 1 when their mean is 0, else 0.
  bool zero_variance = false;
};

// Two-sided paired t-test on a - b.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

}  // namespace pnnlab
