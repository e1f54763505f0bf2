#include "pnnlab/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pnnlab/training.hpp"

namespace pnnlab {

namespace {

void require_nonempty(std::span<const Prediction> preds, const char* what) {
  if (preds.empty()) throw std::invalid_argument(std::string(what) + ": empty prediction set");
}

std::size_t count_positives(std::span<const Prediction> preds) {
  std::size_t pos = 0;
  for (const auto& p : preds) {
    if (p.label != 0 && p.label != 1) throw std::invalid_argument("labels must be 0 or 1");
    pos += static_cast<std::size_t>(p.label);
  }
  return pos;
}

}  // namespace

double auc(std::span<const Prediction> preds) {
  const std::size_t pos = count_positives(preds);
  const std::size_t neg = preds.size() - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("AUC undefined: need at least one positive and one negative label");
  }
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return preds[a].score < preds[b].score; });

  // Walk groups of tied scores from low to high. Every value involved is an
  // integer or half-integer, so the sum is exact.
  double wins = 0.0;
  double neg_below = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double p = 0.0, n = 0.0;
    while (j < order.size() && preds[order[j]].score == preds[order[i]].score) {
      (preds[order[j]].label == 1 ? p : n) += 1.0;
      ++j;
    }
    wins += p * neg_below + 0.5 * p * n;
    neg_below += n;
    i = j;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double mean_log_loss(std::span<const Prediction> preds) {
  require_nonempty(preds, "log loss");
  double total = 0.0;
  for (const auto& p : preds) total += log_loss(p.label, p.score);
  return total / static_cast<double>(preds.size());
}

double rmse(std::span<const Prediction> preds) {
  require_nonempty(preds, "rmse");
  double total = 0.0;
  for (const auto& p : preds) {
    const double e = static_cast<double>(p.label) - p.score;
    total += e * e;
  }
  return std::sqrt(total / static_cast<double>(preds.size()));
}

double entropy(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) return 0.0;
  return -rate * std::log(rate) - (1.0 - rate) * std::log(1.0 - rate);
}

double rig(std::span<const Prediction> preds) {
  require_nonempty(preds, "rig");
  const double base = static_cast<double>(count_positives(preds)) / static_cast<double>(preds.size());
  if (base == 0.0 || base == 1.0) {
    throw std::invalid_argument("RIG undefined: base rate is " + std::to_string(base) +
                                ", entropy is zero");
  }
  return 1.0 - mean_log_loss(preds) / entropy(base);
}

MetricsReport report(std::string model, std::span<const Prediction> preds) {
  MetricsReport r;
  r.model = std::move(model);
  r.n = preds.size();
  r.auc = auc(preds);
  r.log_loss = mean_log_loss(preds);
  r.rmse = rmse(preds);
  r.rig = rig(preds);
  r.base_rate = static_cast<double>(count_positives(preds)) / static_cast<double>(preds.size());
  return r;
}

std::string metrics_csv_header() { return "model,n,auc,logloss,rmse,rig"; }

std::string to_csv(const MetricsReport& r) {
  auto num = [](double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
  };
  return r.model + ',' + std::to_string(r.n) + ',' + num(r.auc) + ',' + num(r.log_loss) + ',' +
         num(r.rmse) + ',' + num(r.rig);
}

PredictionSet score(const Model& model, const Dataset& ds, double downsampling_ratio) {
  if (!(ds.schema == model.schema)) {
    throw std::invalid_argument("dataset schema does not match the model's schema");
  }
  PredictionSet preds;
  preds.reserve(ds.size());
  for (const auto& s : ds.samples) {
    double p = predict(model, s);
    if (downsampling_ratio != 1.0) p = recalibrate(p, downsampling_ratio);
    preds.push_back({s.label, p});
  }
  return preds;
}

MetricsReport evaluate(const Model& model, const Dataset& ds, double downsampling_ratio) {
  return report(std::string(to_string(model.config.kind)), score(model, ds, downsampling_ratio));
}

// ---------------------------------------------------------------------------

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete beta: a and b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired t-test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.df = n - 1;
  // Differences that agree to rounding count as constant.
  const double scale = std::max(std::abs(mean), 1e-300);
  if (sd == 0.0 || sd <= 1e-14 * scale) {
    r.zero_variance = true;
    r.t = mean == 0.0 ? 0.0 : std::copysign(HUGE_VAL, mean);
    r.p_value = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_two_sided(r.t, static_cast<double>(r.df));
  return r;
}

}  // namespace pnnlab
