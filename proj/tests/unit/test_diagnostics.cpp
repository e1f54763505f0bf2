#include <doctest.h>

#include <cmath>
#include <vector>

#include "pnnlab/diagnostics.hpp"

using namespace pnnlab;

TEST_SUITE("diagnostics") {
  TEST_CASE("relative_error") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == 0.5);
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  }

  TEST_CASE("gradcheck passes for every model kind") {
    for (auto kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kFnn, ModelKind::kIpnn, ModelKind::kOpnn,
                      ModelKind::kPnnStar}) {
      CAPTURE(to_string(kind));
      GradcheckConfig c;
      c.kind = kind;
      c.draws = 3;
      const GradcheckReport r = gradcheck(c);
      CHECK(r.passed);
      CHECK(!r.blocks.empty());
      for (const auto& b : r.blocks) CHECK(b.max_rel_error <= c.tolerance);
    }
  }

  TEST_CASE("gradcheck variants") {
    GradcheckConfig c;
    c.draws = 2;
    c.k_order = 2;
    CHECK(gradcheck(c).passed);
    c.kind = ModelKind::kPnnStar;
    c.fusion = Fusion::kConcat;
    c.activation = Activation::kTanh;
    CHECK(gradcheck(c).passed);
    c.activation = Activation::kSigmoid;
    CHECK(gradcheck(c).passed);
  }

  TEST_CASE("gradcheck detects a corrupted gradient") {
    GradcheckConfig c;
    c.draws = 1;
    c.corrupt = true;
    CHECK_FALSE(gradcheck(c).passed);
  }

  TEST_CASE("loglog_slope") {
    const std::vector<double> x{8, 16, 32, 64};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v * v);
    CHECK(loglog_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
    const std::vector<double> flat{5, 5, 5, 5};
    CHECK(std::abs(loglog_slope(x, flat)) <= 1e-12);
  }

  TEST_CASE("bench forms and a small run") {
    for (auto f : {BenchForm::kNaiveInner, BenchForm::kFactorizedInner, BenchForm::kNaiveOuter,
                   BenchForm::kSuperposedOuter})
      CHECK(parse_bench_form(to_string(f)) == f);
    CHECK_THROWS(parse_bench_form("fast"));

    BenchConfig c;
    c.ns = {4, 8};
    c.d1 = 4;
    c.order = 3;
    c.min_seconds = 0.001;
    c.repeats = 1;
    const BenchReport r = run_bench(c);
    CHECK(r.rows.size() == 8);
    CHECK(r.slopes.size() == 4);
    for (const auto& row : r.rows) CHECK(row.seconds > 0.0);
  }
}
