#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "pnnlab/model.hpp"
#include "pnnlab/product_layers.hpp"

using namespace pnnlab;

namespace {

PnnParams random_pnn(const FieldSchema& s, ProductVariant v, Rng& rng, std::size_t k = 1,
                     Activation act = Activation::kRelu) {
  PnnShape shape;
  shape.order = 3;
  shape.d1 = 4;
  shape.d2 = 3;
  shape.k_order = k;
  shape.variant = v;
  shape.activation = act;
  PnnParams p = pnn_zeros(s, shape);
  PnnParams::visit(p, [&](const std::string&, Mat& m) {
    for (double& x : m.values()) x = rng.uniform(-0.5, 0.5);
  });
  return p;
}

double norm_sq(const Mat& f, std::size_t i) { return oracle::inner(f, i, i); }

}  // namespace

TEST_SUITE("product_layers") {
  TEST_CASE("lz_forward") {
    Rng rng(1);
    const Mat f = oracle::random_mat(3, 2, rng);
    double total = 0.0;
    for (double x : f.values()) total += x;
    CHECK(lz_forward(Mat(1, 6, 1.0), f)[0] == doctest::Approx(total).epsilon(1e-15));

    Mat ind(1, 6);
    ind(0, 1 * 2 + 1) = 1.0;
    CHECK(lz_forward(ind, f)[0] == f(1, 1));

    const Mat wz = oracle::random_mat(5, 6, rng);
    const Mat lz = lz_forward(wz, f);
    for (std::size_t n = 0; n < 5; ++n) CHECK(std::abs(lz[n] - oracle::lz_double_loop(wz, n, f)) <= 1e-12);
    CHECK_THROWS_AS(lz_forward(Mat(2, 5), f), std::invalid_argument);
  }

  TEST_CASE("ipnn_lp_naive") {
    Rng rng(2);
    const Mat f1 = oracle::random_mat(1, 3, rng);
    const std::vector<Mat> w1{Mat(1, 1, 2.5)};
    CHECK(ipnn_lp_naive(w1, f1)[0] == doctest::Approx(2.5 * norm_sq(f1, 0)).epsilon(1e-15));

    const Mat f = oracle::random_mat(4, 3, rng);
    const std::vector<Mat> id{Mat::identity(4)};
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) sum += norm_sq(f, i);
    CHECK(ipnn_lp_naive(id, f)[0] == doctest::Approx(sum).epsilon(1e-14));

    std::vector<Mat> ws;
    for (int n = 0; n < 6; ++n) ws.push_back(oracle::random_symmetric(4, rng));
    const Mat lp = ipnn_lp_naive(ws, f);
    for (std::size_t n = 0; n < 6; ++n) CHECK(std::abs(lp[n] - oracle::ipnn_triple_loop(ws[n], f)) <= 1e-12);

    std::vector<Mat> bad{oracle::random_mat(4, 4, rng)};
    CHECK_THROWS_AS(ipnn_lp_naive(bad, f), std::invalid_argument);
  }

  TEST_CASE("ipnn_lp_factorized") {
    Rng rng(3);
    const Mat f = oracle::random_mat(4, 3, rng);
    Mat e(1, 4);
    e(0, 2) = 1.0;
    CHECK(ipnn_lp_factorized(e, f)[0] == doctest::Approx(norm_sq(f, 2)).epsilon(1e-15));

    const Mat f2 = oracle::random_mat(2, 5, rng);
    const double expansion = norm_sq(f2, 0) + 2.0 * oracle::inner(f2, 0, 1) + norm_sq(f2, 1);
    CHECK(ipnn_lp_factorized(Mat(1, 2, 1.0), f2)[0] == doctest::Approx(expansion).epsilon(1e-14));
    CHECK_THROWS_AS(ipnn_lp_factorized(Mat(3, 5), f), std::invalid_argument);
  }

  TEST_CASE("factorized inner product matches the naive form with W = theta theta^T") {
    Rng rng(4);
    for (int draw = 0; draw < 100; ++draw) {
      const std::size_t n = 1 + rng.index(8), m = 1 + rng.index(6), d1 = 1 + rng.index(5);
      const Mat f = oracle::random_mat(n, m, rng);
      const Mat theta = oracle::random_mat(d1, n, rng);
      std::vector<Mat> full;
      for (std::size_t k = 0; k < d1; ++k) {
        Mat w(n, n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) w(i, j) = theta(k, i) * theta(k, j);
        full.push_back(w);
      }
      const Mat a = ipnn_lp_factorized(theta, f);
      const Mat b = ipnn_lp_naive(full, f);
      for (std::size_t k = 0; k < d1; ++k) {
        CHECK(std::abs(a[k] - b[k]) <= 1e-10);
        CHECK(a[k] >= 0.0);
      }
    }
  }

  TEST_CASE("K-order inner product") {
    Rng rng(5);
    for (std::size_t k : {1u, 2u, 4u}) {
      for (int draw = 0; draw < 30; ++draw) {
        const std::size_t n = 1 + rng.index(7), m = 1 + rng.index(5), d1 = 1 + rng.index(4);
        const Mat f = oracle::random_mat(n, m, rng);
        const Mat theta = oracle::random_mat(d1, n * k, rng);
        std::vector<Mat> full;
        for (std::size_t node = 0; node < d1; ++node) {
          Mat w(n, n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
              for (std::size_t kk = 0; kk < k; ++kk) w(i, j) += theta(node, i * k + kk) * theta(node, j * k + kk);
          full.push_back(w);
        }
        const Mat a = ipnn_lp_korder(theta, k, f);
        const Mat b = ipnn_lp_naive(full, f);
        for (std::size_t node = 0; node < d1; ++node) CHECK(std::abs(a[node] - b[node]) <= 1e-10);
        if (k == 1) {
          const Mat c = ipnn_lp_factorized(theta, f);
          for (std::size_t node = 0; node < d1; ++node) CHECK(std::abs(a[node] - c[node]) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("K = N with orthonormal theta rows gives the sum of squared norms") {
    Rng rng(6);
    const std::size_t n = 4;
    // Gram-Schmidt on random vectors.
    std::vector<std::vector<double>> q;
    while (q.size() < n) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.uniform(-1, 1);
      for (const auto& u : q) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += u[i] * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
      }
      double nn = 0.0;
      for (double x : v) nn += x * x;
      for (double& x : v) x /= std::sqrt(nn);
      q.push_back(v);
    }
    Mat theta(1, n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) theta(0, i * n + k) = q[i][k];
    const Mat f = oracle::random_mat(n, 3, rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += norm_sq(f, i);
    CHECK(ipnn_lp_korder(theta, n, f)[0] == doctest::Approx(sum).epsilon(1e-12));
  }

  TEST_CASE("opnn_lp_naive") {
    Rng rng(7);
    const Mat f1 = oracle::random_mat(1, 3, rng);
    const std::vector<Mat> id{Mat::identity(3)};
    CHECK(opnn_lp_naive(id, f1)[0] == doctest::Approx(norm_sq(f1, 0)).epsilon(1e-15));

    const Mat f = oracle::random_mat(3, 2, rng);
    std::vector<Mat> blocks;
    for (int n = 0; n < 4; ++n) blocks.push_back(oracle::random_mat(6, 6, rng));
    const Mat lp = opnn_lp_naive(blocks, f);
    for (std::size_t n = 0; n < 4; ++n) CHECK(std::abs(lp[n] - oracle::opnn_quad_loop(blocks[n], f)) <= 1e-12);
    CHECK_THROWS_AS(opnn_lp_naive(blocks, oracle::random_mat(2, 2, rng)), std::invalid_argument);
  }

  TEST_CASE("opnn_lp_superposed") {
    Rng rng(8);
    const Mat f = oracle::random_mat(5, 3, rng);
    Mat fs(3, 1);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t d = 0; d < 3; ++d) fs[d] += f(i, d);
    const std::vector<Mat> id{Mat::identity(3)};
    CHECK(opnn_lp_superposed(id, f)[0] == doctest::Approx(dot(fs, fs)).epsilon(1e-14));

    Mat cancel(2, 3);
    for (std::size_t d = 0; d < 3; ++d) {
      cancel(0, d) = f(0, d);
      cancel(1, d) = -f(0, d);
    }
    std::vector<Mat> ws{oracle::random_symmetric(3, rng), oracle::random_symmetric(3, rng)};
    const Mat cancelled = opnn_lp_superposed(ws, cancel);
    for (double x : cancelled.values()) CHECK(x == 0.0);

    // Against the materialized outer product p = f_sum f_sum^T.
    for (int draw = 0; draw < 50; ++draw) {
      const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(5);
      const Mat g = oracle::random_mat(n, m, rng);
      Mat s(m, 1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < m; ++d) s[d] += g(i, d);
      const Mat p = outer(s, s);
      std::vector<Mat> w{oracle::random_symmetric(m, rng)};
      CHECK(std::abs(opnn_lp_superposed(w, g)[0] - dot(w[0].values(), p.values())) <= 1e-12);
      CHECK(std::abs(opnn_lp_packed(pack_symmetric(w), g)[0] - dot(w[0].values(), p.values())) <= 1e-12);
    }

    std::vector<Mat> bad{oracle::random_mat(3, 3, rng)};
    CHECK_THROWS_AS(opnn_lp_superposed(bad, f), std::invalid_argument);
  }

  TEST_CASE("tied naive outer blocks equal the superposed form") {
    Rng rng(9);
    for (int draw = 0; draw < 100; ++draw) {
      const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(4);
      const Mat f = oracle::random_mat(n, m, rng);
      const Mat w = oracle::random_symmetric(m, rng);
      Mat big(n * m, n * m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) big(i * m + a, j * m + b) = w(a, b);
      const std::vector<Mat> blocks{big}, tied{w};
      CHECK(std::abs(opnn_lp_naive(blocks, f)[0] - opnn_lp_superposed(tied, f)[0]) <= 1e-10);
    }
  }

  TEST_CASE("packed storage round-trips and its gradient mirrors a symmetric one") {
    Rng rng(10);
    std::vector<Mat> ws{oracle::random_symmetric(4, rng), oracle::random_symmetric(4, rng)};
    const Mat packed = pack_symmetric(ws);
    CHECK(packed.cols() == packed_size(4));
    CHECK(packed_order(packed_size(4)) == 4);
    CHECK(unpack_symmetric(packed, 1) == ws[1]);

    // d lp / d W over the full matrix is f_sum f_sum^T (symmetric); a packed
    // off-diagonal entry stands for two mirrored entries.
    const Mat f = oracle::random_mat(3, 4, rng);
    Mat fs(4, 1);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t d = 0; d < 4; ++d) fs[d] += f(i, d);
    Mat one(1, packed.cols());
    for (std::size_t c = 0; c < one.cols(); ++c) one[c] = packed(0, c);
    const Mat g = finite_diff_grad([&](const Mat& u) { return opnn_lp_packed(u, f)[0]; }, one, 1e-5);
    Mat full(4, 4);
    std::size_t idx = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = a; b < 4; ++b, ++idx) {
        full(a, b) = full(b, a) = a == b ? g[idx] : g[idx] / 2.0;
      }
    }
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        CHECK(full(a, b) == full(b, a));
        CHECK(full(a, b) == doctest::Approx(fs[a] * fs[b]).epsilon(1e-6));
      }
  }

  TEST_CASE("pnn_forward basics") {
    const FieldSchema s = oracle::schema({3, 4, 2});
    PnnShape shape;
    shape.order = 3;
    shape.d1 = 4;
    shape.d2 = 3;
    for (ProductVariant v : {ProductVariant::kInner, ProductVariant::kOuter, ProductVariant::kBoth}) {
      shape.variant = v;
      CHECK(pnn_forward(pnn_zeros(s, shape), {{0, 1, 1}, 0}) == 0.5);
    }
    Rng rng(11);
    const PnnParams p = random_pnn(s, ProductVariant::kBoth, rng);
    const SparseSample smp = oracle::random_sample(s, rng);
    CHECK(pnn_forward(p, smp) == pnn_forward(p, smp));

    shape.variant = ProductVariant::kBoth;
    shape.fusion = Fusion::kConcat;
    const PnnParams cat = pnn_zeros(s, shape);
    CHECK(cat.width() == 8);
    CHECK(term_offset(cat.terms[1]) == 4);
  }

  TEST_CASE("backward requires a forward cache") {
    const FieldSchema s = oracle::schema({3, 3});
    Rng rng(12);
    const PnnParams p = random_pnn(s, ProductVariant::kInner, rng);
    PnnParams g = p;
    CHECK_THROWS_AS(pnn_backward(p, {{0, 0}, 1}, 1, NetCache{}, g), std::logic_error);
  }

  TEST_CASE("degeneracy to FNN") {
    const FieldSchema s = oracle::schema({4, 3, 5, 2});
    Rng rng(13);
    for (int draw = 0; draw < 5; ++draw) {
      const PnnParams p = random_pnn(s, ProductVariant::kInner, rng);
      const FnnParams fnn = degeneracy_fnn(p);
      const PnnParams no_lp = without_product(p);
      for (int i = 0; i < 50; ++i) {
        const SparseSample smp = oracle::random_sample(s, rng);
        CHECK(std::abs(fnn_forward(fnn, smp) - pnn_forward(no_lp, smp)) <= 1e-12);
      }
    }
    PnnShape zero_shape;
    zero_shape.order = 3;
    const PnnParams z = pnn_zeros(s, zero_shape);
    CHECK(fnn_forward(degeneracy_fnn(z), {{0, 0, 0, 0}, 0}) == 0.5);
    CHECK(pnn_forward(z, {{0, 0, 0, 0}, 0}) == 0.5);
  }

  TEST_CASE("with theta frozen at zero the IPNN gradients equal the FNN ones") {
    const FieldSchema s = oracle::schema({4, 3, 5});
    Rng rng(14);
    PnnParams p = random_pnn(s, ProductVariant::kInner, rng, 1, Activation::kTanh);
    std::get<InnerProductTerm>(p.terms[0]).theta.fill(0.0);
    const FnnParams fnn = degeneracy_fnn(p);
    for (int i = 0; i < 20; ++i) {
      const SparseSample smp = oracle::random_sample(s, rng);
      CHECK(pnn_forward(p, smp) == fnn_forward(fnn, smp));
      const PnnParams gp = pnn_backward(p, smp, smp.label);
      const FnnParams gf = fnn_backward(fnn, smp, smp.label);
      auto close = [](const Mat& a, const Mat& b) {
        REQUIRE(a.same_shape(b));
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-10);
      };
      close(gp.wz, gf.w1);
      close(gp.b1, gf.b1);
      for (std::size_t f = 0; f < 3; ++f) {
        // Exact: lp and d lp / d f are both zero when theta is.
        CHECK(gp.embedding.fields[f] == gf.embedding.fields[f]);
      }
      close(gp.head.out.w, gf.head.out.w);
      for (std::size_t k = 0; k < gp.head.hidden.size(); ++k) close(gp.head.hidden[k].w, gf.head.hidden[k].w);
    }
  }

  TEST_CASE("degeneracy to FM") {
    Rng rng(15);
    for (int draw = 0; draw < 5; ++draw) {
      const FieldSchema s = oracle::schema({2 + rng.index(4), 2 + rng.index(4), 2 + rng.index(4), 2});
      const std::size_t m = 1 + rng.index(4);
      FmParams fm = fm_zeros(s, m);
      fm.w0[0] = rng.uniform(-1, 1);
      for (double& x : fm.w.values()) x = rng.uniform(-1, 1);
      for (double& x : fm.v.values()) x = rng.uniform(-1, 1);
      const PnnParams pnn = degeneracy_fm(s, m, fm);
      CHECK(pnn.width() == 1);
      CHECK(pnn.head.hidden.empty());
      for (int i = 0; i < 100; ++i) {
        const SparseSample smp = oracle::random_sample(s, rng);
        CHECK(std::abs(pnn_forward(pnn, smp) - fm_forward(fm, smp)) <= 1e-12);
      }

      FmParams lr_like = fm;
      lr_like.v.fill(0.0);
      const PnnParams pl = degeneracy_fm(s, m, lr_like);
      for (int i = 0; i < 20; ++i) {
        const SparseSample smp = oracle::random_sample(s, rng);
        CHECK(std::abs(pnn_forward(pl, smp) - fm_forward(lr_like, smp)) <= 1e-15);
      }
    }
  }

  TEST_CASE("degeneracy to FM survives a field permutation") {
    Rng rng(16);
    const FieldSchema s = oracle::schema({3, 4, 5});
    const FieldSchema r({{"f1", 4}, {"f2", 5}, {"f0", 3}});
    const std::size_t perm[3] = {1, 2, 0};  // new field j is old field perm[j]
    FmParams fm = fm_zeros(s, 2);
    fm.w0[0] = 0.2;
    for (double& x : fm.w.values()) x = rng.uniform(-1, 1);
    for (double& x : fm.v.values()) x = rng.uniform(-1, 1);
    FmParams fr = fm_zeros(r, 2);
    fr.w0 = fm.w0;
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < r.cardinality(j); ++c) {
        fr.w[r.offset(j) + c] = fm.w[s.offset(perm[j]) + c];
        for (std::size_t d = 0; d < 2; ++d) fr.v(r.offset(j) + c, d) = fm.v(s.offset(perm[j]) + c, d);
      }
    const PnnParams a = degeneracy_fm(s, 2, fm), b = degeneracy_fm(r, 2, fr);
    for (int i = 0; i < 30; ++i) {
      const SparseSample x = oracle::random_sample(s, rng);
      const SparseSample y{{x.categories[1], x.categories[2], x.categories[0]}, x.label};
      CHECK(std::abs(pnn_forward(a, x) - pnn_forward(b, y)) <= 1e-12);
      CHECK(std::abs(pnn_forward(b, y) - fm_forward(fm, x)) <= 1e-12);
    }
  }

  TEST_CASE("IPNN is equivariant under field permutation") {
    Rng rng(17);
    const FieldSchema s = oracle::schema({3, 4, 5});
    const FieldSchema r({{"f2", 5}, {"f0", 3}, {"f1", 4}});
    const std::size_t perm[3] = {2, 0, 1};
    const std::size_t m = 3;
    for (std::size_t k : {1u, 2u}) {
      const PnnParams p = random_pnn(s, ProductVariant::kInner, rng, k);
      PnnParams q = p;
      auto& tq = std::get<InnerProductTerm>(q.terms[0]).theta;
      const auto& tp = std::get<InnerProductTerm>(p.terms[0]).theta;
      for (std::size_t j = 0; j < 3; ++j) {
        q.embedding.fields[j] = p.embedding.fields[perm[j]];
        for (std::size_t n = 0; n < p.width(); ++n) {
          for (std::size_t d = 0; d < m; ++d) q.wz(n, j * m + d) = p.wz(n, perm[j] * m + d);
          for (std::size_t kk = 0; kk < k; ++kk) tq(n, j * k + kk) = tp(n, perm[j] * k + kk);
        }
      }
      for (int i = 0; i < 30; ++i) {
        const SparseSample x = oracle::random_sample(s, rng);
        const SparseSample y{{x.categories[2], x.categories[0], x.categories[1]}, x.label};
        CHECK(std::abs(pnn_forward(p, x) - pnn_forward(q, y)) <= 1e-12);
      }
    }
    (void)r;
  }
}
