#include "pnnlab/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "pnnlab/training.hpp"

namespace pnnlab {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

FieldSchema small_schema(std::size_t fields, std::size_t cardinality) {
  std::vector<Field> fs;
  for (std::size_t i = 0; i < fields; ++i) fs.push_back({"f" + std::to_string(i), cardinality});
  return FieldSchema(std::move(fs));
}

std::vector<Mat*> blocks_of(ModelParams& params) {
  std::vector<Mat*> out;
  for_each_block(params, [&](const std::string&, Mat& m) { out.push_back(&m); });
  return out;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& c) {
  const FieldSchema schema = small_schema(c.fields, c.cardinality);
  ModelConfig mc;
  mc.kind = c.kind;
  mc.embedding_order = c.order;
  mc.d1 = c.d1;
  mc.d2 = c.d2;
  mc.hidden_layers = c.hidden_layers;
  mc.k_order = c.k_order;
  mc.activation = c.activation;
  mc.fusion = c.fusion;
  const double l2 = is_network(c.kind) ? 0.0 : c.l2_lambda;

  GradcheckReport report;
  Rng rng(c.seed);
  for (std::size_t draw = 0; draw < c.draws; ++draw) {
    Model model = zero_model(schema, mc);
    for_each_block(model.params, [&](const std::string&, Mat& m) {
      for (double& x : m.values()) x = rng.uniform(-c.param_scale, c.param_scale);
    });
    std::vector<SparseSample> batch(c.batch);
    for (auto& s : batch) {
      for (std::size_t i = 0; i < c.fields; ++i) {
        s.categories.push_back(static_cast<std::uint32_t>(rng.index(c.cardinality)));
      }
      s.label = rng.bernoulli(0.5) ? 1 : 0;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    auto loss = [&](const Model& m) {
      double total = 0.0;
      for (const auto& s : batch) total += log_loss(s.label, predict(m, s));
      return total * inv + l2_penalty(m.params, l2);
    };

    ModelParams grad = zeros_like(model.params);
    for (const auto& s : batch) accumulate_gradient(model, s, Dropout{}, grad);
    for_each_block(grad, [&](const std::string&, Mat& m) {
      for (double& x : m.values()) x *= inv;
    });
    add_l2_gradient(model.params, l2, grad);
    if (c.corrupt) {
      Mat* first = blocks_of(grad).front();
      (*first)[0] += 1e-2;
    }

    std::vector<std::string> names;
    for_each_block(model.params, [&](const std::string& name, const Mat&) { names.push_back(name); });
    const std::vector<Mat*> analytic = blocks_of(grad);
    Model work = model;
    const std::vector<Mat*> slots = blocks_of(work.params);
    if (report.blocks.empty()) {
      for (const auto& name : names) report.blocks.push_back({name, 0.0});
    }
    for (std::size_t b = 0; b < slots.size(); ++b) {
      const Mat original = *slots[b];
      const Mat numeric = finite_diff_grad(
          [&](const Mat& at) {
            *slots[b] = at;
            return loss(work);
          },
          original, c.eps);
      *slots[b] = original;
      double worst = 0.0;
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        worst = std::max(worst, relative_error((*analytic[b])[i], numeric[i]));
      }
      report.blocks[b].max_rel_error = std::max(report.blocks[b].max_rel_error, worst);
    }
  }
  for (const auto& b : report.blocks) {
    if (!(b.max_rel_error <= c.tolerance)) report.passed = false;
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BenchForm form) {
  switch (form) {
    case BenchForm::kNaiveInner: return "naive_inner";
    case BenchForm::kFactorizedInner: return "factorized_inner";
    case BenchForm::kNaiveOuter: return "naive_outer";
    case BenchForm::kSuperposedOuter: return "superposed_outer";
  }
  return "?";
}

BenchForm parse_bench_form(std::string_view name) {
  for (auto f : {BenchForm::kNaiveInner, BenchForm::kFactorizedInner, BenchForm::kNaiveOuter,
                 BenchForm::kSuperposedOuter}) {
    if (name == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown benchmark form '" + std::string(name) + "'");
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("loglog_slope: need two or more paired points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be > 0");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values are all equal");
  return sxy / sxx;
}

namespace {

void fill_uniform(Mat& m, Rng& rng) {
  for (double& x : m.values()) x = rng.uniform(-1.0, 1.0);
}

Mat random_symmetric(std::size_t n, Rng& rng) {
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) w(i, j) = w(j, i) = rng.uniform(-1.0, 1.0);
  }
  return w;
}

// Runs `fn` repeatedly for at least `min_seconds`; returns the best per-call time.
template <class F>
double time_per_call(F&& fn, double min_seconds, std::size_t repeats) {
  using clock = std::chrono::steady_clock;
  double best = HUGE_VAL;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::size_t calls = 0;
    const auto start = clock::now();
    double elapsed = 0.0;
    do {
      fn();
      ++calls;
      elapsed = std::chrono::duration<double>(clock::now() - start).count();
    } while (elapsed < min_seconds);
    best = std::min(best, elapsed / static_cast<double>(calls));
  }
  return best;
}

volatile double g_sink = 0.0;

}  // namespace

BenchReport run_bench(const BenchConfig& c) {
  BenchReport report;
  Rng rng(c.seed);
  for (BenchForm form : c.forms) {
    std::vector<double> xs, ys;
    for (std::size_t n : c.ns) {
      Mat f(n, c.order);
      fill_uniform(f, rng);
      Mat wz(c.d1, n * c.order);
      fill_uniform(wz, rng);
      auto signal = [&](const Mat& lp) {
        const Mat lz = lz_forward(wz, f);
        g_sink = g_sink + lz[0] + lp[0];
      };

      double seconds = 0.0;
      switch (form) {
        case BenchForm::kNaiveInner: {
          std::vector<Mat> wp;
          for (std::size_t k = 0; k < c.d1; ++k) wp.push_back(random_symmetric(n, rng));
          seconds = time_per_call([&] { signal(ipnn_lp_naive(wp, f)); }, c.min_seconds, c.repeats);
          break;
        }
        case BenchForm::kFactorizedInner: {
          Mat theta(c.d1, n);
          fill_uniform(theta, rng);
          seconds =
              time_per_call([&] { signal(ipnn_lp_factorized(theta, f)); }, c.min_seconds, c.repeats);
          break;
        }
        case BenchForm::kNaiveOuter: {
          std::vector<Mat> wp;
          for (std::size_t k = 0; k < c.d1; ++k) {
            wp.emplace_back(n * c.order, n * c.order);
            fill_uniform(wp.back(), rng);
          }
          seconds = time_per_call([&] { signal(opnn_lp_naive(wp, f)); }, c.min_seconds, c.repeats);
          break;
        }
        case BenchForm::kSuperposedOuter: {
          Mat packed(c.d1, packed_size(c.order));
          fill_uniform(packed, rng);
          seconds =
              time_per_call([&] { signal(opnn_lp_packed(packed, f)); }, c.min_seconds, c.repeats);
          break;
        }
      }
      report.rows.push_back({form, n, seconds});
      xs.push_back(static_cast<double>(n));
      ys.push_back(seconds);
    }
    if (xs.size() >= 2) report.slopes.push_back({form, loglog_slope(xs, ys)});
  }
  return report;
}

}  // namespace pnnlab
