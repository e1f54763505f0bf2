#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "pnnlab/metrics.hpp"

using namespace pnnlab;

namespace {

PredictionSet make(const std::vector<int>& labels, const std::vector<double>& scores) {
  PredictionSet p;
  for (std::size_t i = 0; i < labels.size(); ++i) p.push_back({labels[i], scores[i]});
  return p;
}

PredictionSet random_set(Rng& rng, std::size_t n, bool coarse) {
  PredictionSet p;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = coarse ? std::floor(rng.uniform() * 5.0) / 5.0 : rng.uniform();
    p.push_back({rng.bernoulli(0.4) ? 1 : 0, s});
  }
  p[0].label = 0;
  p[1].label = 1;
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("auc examples") {
    CHECK(auc(make({1, 0, 1, 0}, {0.9, 0.8, 0.3, 0.1})) == 0.75);
    CHECK(auc(make({1, 1, 0, 0}, {0.9, 0.8, 0.3, 0.1})) == 1.0);
    CHECK(auc(make({1, 1, 0, 0}, {0.1, 0.2, 0.8, 0.9})) == 0.0);
    CHECK(auc(make({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5})) == 0.5);
    CHECK_THROWS_AS(auc(make({1, 1}, {0.2, 0.3})), std::invalid_argument);
    CHECK_THROWS_AS(auc(make({0, 0}, {0.2, 0.3})), std::invalid_argument);
    CHECK_THROWS(auc(PredictionSet{}));
  }

  TEST_CASE("auc matches pair counting") {
    Rng rng(11);
    for (int draw = 0; draw < 50; ++draw) {
      const PredictionSet p = random_set(rng, 40 + draw, draw % 2 == 0);
      CHECK(auc(p) == doctest::Approx(oracle::auc_pairs(p)).epsilon(1e-14));
    }
  }

  TEST_CASE("auc is invariant under monotone transforms") {
    Rng rng(12);
    for (int draw = 0; draw < 20; ++draw) {
      const PredictionSet p = random_set(rng, 100, draw % 2 == 0);
      PredictionSet cube = p, squashed = p, flipped = p;
      for (auto& x : cube) x.score = x.score * x.score * x.score;
      for (auto& x : squashed) x.score = oracle::sigmoid(5.0 * x.score - 2.0);
      for (auto& x : flipped) {
        x.label = 1 - x.label;
        x.score = -x.score;
      }
      CHECK(auc(cube) == auc(p));
      CHECK(auc(squashed) == auc(p));
      CHECK(auc(flipped) == doctest::Approx(auc(p)).epsilon(1e-14));
    }
  }

  TEST_CASE("log loss, rmse and rig") {
    const PredictionSet p = make({1, 0, 0, 0}, {0.7, 0.1, 0.1, 0.1});
    CHECK(mean_log_loss(p) == doctest::Approx(0.1681891227280528).epsilon(1e-14));
    CHECK(entropy(0.25) == doctest::Approx(0.5623351446188083).epsilon(1e-14));
    CHECK(rig(p) == doctest::Approx(0.7009094588209249).epsilon(1e-13));
    CHECK(rmse(p) == doctest::Approx(std::sqrt((0.09 + 3 * 0.01) / 4.0)).epsilon(1e-14));
    CHECK(rmse(make({1, 0}, {1.0, 0.0})) == 0.0);
    CHECK(rmse(make({1, 0}, {0.0, 1.0})) == 1.0);

    PredictionSet base = make({1, 0, 0, 0}, {0.25, 0.25, 0.25, 0.25});
    CHECK(std::abs(rig(base)) <= 1e-12);
    CHECK(entropy(0.0) == 0.0);
    CHECK(entropy(0.5) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(rig(make({1, 1}, {0.5, 0.5})), std::invalid_argument);
    CHECK_THROWS_AS(rig(make({0, 0}, {0.5, 0.5})), std::invalid_argument);
  }

  TEST_CASE("report and csv") {
    const MetricsReport r = report("lr", make({1, 0}, {0.75, 0.25}));
    CHECK(r.n == 2);
    CHECK(r.auc == 1.0);
    CHECK(r.base_rate == 0.5);
    CHECK(metrics_csv_header() == "model,n,auc,logloss,rmse,rig");
    CHECK(to_csv(r).rfind("lr,2,1,", 0) == 0);
    CHECK(to_csv(r).find("0.25") != std::string::npos);
  }

  TEST_CASE("evaluate") {
    SynthConfig cfg;
    cfg.n_samples = 600;
    cfg.n_fields = 4;
    cfg.seed = 5;
    const Dataset ds = synth_generate(cfg).dataset;
    ModelConfig mc;
    mc.kind = ModelKind::kFm;
    mc.embedding_order = 3;
    Rng rng(5);
    const Model m = init_params(ds.schema, mc, rng);

    const MetricsReport a = evaluate(m, ds);
    const MetricsReport b = evaluate(m, ds);
    CHECK(a.auc == b.auc);
    CHECK(a.log_loss == b.log_loss);

    const PredictionSet raw = score(m, ds);
    CHECK(a.log_loss == mean_log_loss(raw));
    const PredictionSet same = score(m, ds, 1.0);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(same[i].score == raw[i].score);

    const PredictionSet recal = score(m, ds, 0.2);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(recal[i].score == recalibrate(raw[i].score, 0.2));
    CHECK(evaluate(m, ds, 0.2).auc == a.auc);

    SynthConfig other = cfg;
    other.n_fields = 5;
    CHECK_THROWS(evaluate(m, synth_generate(other).dataset));
  }

  TEST_CASE("incomplete beta and t distribution") {
    CHECK(regularized_incomplete_beta(2, 3, 0.4) == doctest::Approx(0.5247999999999999).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(0.5, 0.5, 0.1) == doctest::Approx(0.20483276469913345).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(15, 0.5, 0.97) == doctest::Approx(0.3431267055881709).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(50, 40, 0.6) == doctest::Approx(0.8011534179744886).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);

    CHECK(student_t_two_sided(2, 5) == doctest::Approx(0.10193947882985828).epsilon(1e-12));
    CHECK(student_t_two_sided(0.5, 30) == doctest::Approx(0.6207230048851273).epsilon(1e-12));
    CHECK(student_t_two_sided(10, 3) == doctest::Approx(0.0021283990584141494).epsilon(1e-12));
    CHECK(student_t_two_sided(-1.3, 12) == doctest::Approx(0.21801717108351423).epsilon(1e-12));
    CHECK(student_t_two_sided(4.2, 1) == doctest::Approx(0.1488055305972344).epsilon(1e-12));
    CHECK(student_t_two_sided(0, 7) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("paired t-test") {
    const std::vector<double> a{0.62, 0.55, 0.71, 0.48, 0.66, 0.59, 0.70, 0.52};
    const std::vector<double> b{0.60, 0.56, 0.65, 0.47, 0.61, 0.60, 0.66, 0.50};
    const TTestResult r = paired_ttest(a, b);
    CHECK(r.t == doctest::Approx(2.4430352131378665).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(0.04456011484099074).epsilon(1e-10));
    CHECK(r.df == 7);
    CHECK_FALSE(r.zero_variance);

    const TTestResult same = paired_ttest(a, a);
    CHECK(same.p_value == 1.0);
    CHECK(same.zero_variance);

    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = 0.7 + 0.001 * i;
      y[i] = x[i] - 0.01;
    }
    const TTestResult shift = paired_ttest(x, y);
    CHECK(shift.zero_variance);
    CHECK(shift.p_value < 1e-6);

    const std::vector<double> u{1, 2, 3, 4, 5}, v{1.1, 2.1, 3.1, 4.1, 5.1};
    const TTestResult uv = paired_ttest(u, v);
    CHECK(uv.zero_variance);
    CHECK(uv.p_value < 1e-6);

    CHECK_THROWS(paired_ttest(std::vector<double>{1.0}, std::vector<double>{2.0}));
    CHECK_THROWS(paired_ttest(a, std::vector<double>{1.0, 2.0}));
  }
}
