#include <cmath>
#include <random>

#include "ctce/nn.hpp"
#include "ctce/optim.hpp"
#include "ctce/tensor.hpp"
#include "doctest.h"
#include "support/grad_check.hpp"

using namespace ctce;

namespace {

Tensor random_tensor(int r, int c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<size_t>(r) * c);
  for (auto& x : v) x = dist(rng);
  return Tensor(r, c, std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
  std::mt19937_64 rng(7);
  Tensor m = random_tensor(3, 3, rng);
  Tensor im = matmul(Tensor::identity(3), m);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(im.at(i, j) == doctest::Approx(m.at(i, j)).epsilon(1e-15));

  Tensor a(2, 2, {1, 2, 3, 4});
  Tensor b(2, 1, {1, 1});
  Tensor c = matmul(a, b);
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937_64 rng(11);
  Tensor a = random_tensor(5, 4, rng);
  Tensor b = random_tensor(4, 3, rng);
  Tensor c = matmul(a, b);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(std::fabs(c.at(i, j) - s) < 1e-12);
    }
}

TEST_CASE("matmul shape mismatch") {
  CHECK_THROWS_AS(matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), std::invalid_argument);
}

TEST_CASE("softmax symmetry, shift invariance, oracle") {
  Tensor z = softmax_rows(Tensor::row({0, 0, 0}));
  for (int j = 0; j < 3; ++j) CHECK(z.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-14));

  Tensor big = softmax_rows(Tensor::row({1000, 1000}));
  CHECK(big.at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::isfinite(big.at(0, 1)));

  Tensor s = softmax_rows(Tensor::row({1, 2, 3}));
  long double es[3], tot = 0.0L;
  for (int j = 0; j < 3; ++j) {
    es[j] = expl(static_cast<long double>(j + 1));
    tot += es[j];
  }
  double rowsum = 0.0;
  for (int j = 0; j < 3; ++j) {
    CHECK(std::fabs(s.at(0, j) - static_cast<double>(es[j] / tot)) < 1e-14);
    rowsum += s.at(0, j);
  }
  CHECK(std::fabs(rowsum - 1.0) < 1e-12);
}

TEST_CASE("softmax rows sum to one on random input") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor(4, 6, rng, -30.0, 30.0);
    Tensor s = softmax_rows(x);
    for (int i = 0; i < 4; ++i) {
      double rowsum = 0.0;
      for (int j = 0; j < 6; ++j) {
        CHECK(s.at(i, j) > 0.0);
        CHECK(s.at(i, j) < 1.0);
        rowsum += s.at(i, j);
      }
      CHECK(std::fabs(rowsum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sinusoidal encode") {
  Tensor e0 = sinusoidal_encode(0.0, 8, 10000.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(e0.at(0, 2 * i) == 0.0);
    CHECK(e0.at(0, 2 * i + 1) == 1.0);
  }
  Tensor e1 = sinusoidal_encode(1.0, 4, 10000.0);
  CHECK(e1.at(0, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(e1.at(0, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(e1.at(0, 2) == doctest::Approx(std::sin(1e-2)).epsilon(1e-15));
  CHECK(e1.at(0, 3) == doctest::Approx(std::cos(1e-2)).epsilon(1e-15));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> td(-1e6, 1e6);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor e = sinusoidal_encode(td(rng), 16, 10000.0);
    for (int j = 0; j < 16; ++j) {
      CHECK(e.at(0, j) >= -1.0);
      CHECK(e.at(0, j) <= 1.0);
    }
  }
  CHECK_THROWS_AS(sinusoidal_encode(1.0, 5, 10000.0), std::invalid_argument);
}

TEST_CASE("mlp zero weights and single-layer reduction") {
  ParameterSet params;
  MlpSpec spec{{3, 4}, Activation::relu};
  params.add("m/w0", Tensor::zeros(3, 4));
  params.add("m/b0", Tensor::zeros(1, 4));
  Tensor y = mlp_forward(Tensor::row({1, 2, 3}), spec, params, "m");
  for (int j = 0; j < 4; ++j) CHECK(y.at(0, j) == 0.0);

  std::mt19937_64 rng(9);
  ParameterSet p2;
  init_mlp(p2, "lin", MlpSpec{{3, 2}, Activation::relu}, rng);
  Tensor x = random_tensor(2, 3, rng);
  Tensor out = mlp_forward(x, MlpSpec{{3, 2}, Activation::relu}, p2, "lin");
  Tensor manual = add_rowvec(matmul(x, p2.at("lin/w0")), p2.at("lin/b0"));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(out.at(i, j) == manual.at(i, j));
}

TEST_CASE("two-layer relu mlp matches layer-by-layer oracle") {
  std::mt19937_64 rng(21);
  MlpSpec spec{{4, 5, 3}, Activation::relu};
  ParameterSet params;
  init_mlp(params, "net", spec, rng);
  Tensor x = random_tensor(3, 4, rng);
  Tensor out = mlp_forward(x, spec, params, "net");

  const auto& w0 = params.at("net/w0");
  const auto& b0 = params.at("net/b0");
  const auto& w1 = params.at("net/w1");
  const auto& b1 = params.at("net/b1");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double expect = b1.at(0, j);
      for (int h = 0; h < 5; ++h) {
        double pre = b0.at(0, h);
        for (int k = 0; k < 4; ++k) pre += x.at(i, k) * w0.at(k, h);
        expect += std::max(0.0, pre) * w1.at(h, j);
      }
      CHECK(out.at(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  CHECK_THROWS_AS(mlp_forward(Tensor::zeros(1, 5), spec, params, "net"), std::invalid_argument);
}

TEST_CASE("attention single key and duplicate keys") {
  ParameterSet params;
  const int d = 4;
  for (const char* n : {"a/wq", "a/wk", "a/wv", "a/wo"}) params.add(n, Tensor::identity(d));

  Tensor q = Tensor::row({0.3, -0.2, 0.5, 0.1});
  Tensor kv = Tensor::row({1.0, 2.0, 3.0, 4.0});
  Tensor out = mha_cross_attention(q, kv, kv, 1, params, "a");
  for (int j = 0; j < d; ++j) CHECK(out.at(0, j) == doctest::Approx(kv.at(0, j)).epsilon(1e-14));

  Tensor kv2 = concat_rows({kv, kv, kv});
  Tensor out2 = mha_cross_attention(q, kv2, kv2, 2, params, "a");
  for (int j = 0; j < d; ++j) CHECK(out2.at(0, j) == doctest::Approx(out.at(0, j)).epsilon(1e-13));
}

TEST_CASE("attention matches unfused per-head oracle") {
  std::mt19937_64 rng(31);
  const int n = 3, m = 4, d = 8, heads = 2, dh = d / heads;
  ParameterSet params;
  init_attention(params, "att", d, rng);
  Tensor q = random_tensor(n, d, rng), k = random_tensor(m, d, rng), v = random_tensor(m, d, rng);
  Tensor out = mha_cross_attention(q, k, v, heads, params, "att");

  auto proj = [&](const Tensor& x, const std::string& w) {
    std::vector<std::vector<double>> r(x.rows(), std::vector<double>(d, 0.0));
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < d; ++j)
        for (int p = 0; p < d; ++p) r[i][j] += x.at(i, p) * params.at(w).at(p, j);
    return r;
  };
  auto qp = proj(q, "att/wq"), kp = proj(k, "att/wk"), vp = proj(v, "att/wv");
  std::vector<std::vector<double>> merged(n, std::vector<double>(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(m);
      double mx = -1e300;
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += qp[i][h * dh + c] * kp[j][h * dh + c];
        scores[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, scores[j]);
      }
      double tot = 0.0;
      for (int j = 0; j < m; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        tot += scores[j];
      }
      for (int j = 0; j < m; ++j)
        for (int c = 0; c < dh; ++c)
          merged[i][h * dh + c] += scores[j] / tot * vp[j][h * dh + c];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double expect = 0.0;
      for (int p = 0; p < d; ++p) expect += merged[i][p] * params.at("att/wo").at(p, j);
      CHECK(std::fabs(out.at(i, j) - expect) < 1e-10);
    }

  CHECK_THROWS_AS(mha_cross_attention(q, k, v, 3, params, "att"), std::invalid_argument);
  CHECK_THROWS_AS(mha_cross_attention(q, Tensor::zeros(0, d), Tensor::zeros(0, d), 2, params, "att"),
                  std::invalid_argument);
}

TEST_CASE("attention output is convex combination under identity projections") {
  std::mt19937_64 rng(41);
  const int d = 4;
  ParameterSet params;
  for (const char* n : {"c/wq", "c/wk", "c/wv", "c/wo"}) params.add(n, Tensor::identity(d));
  Tensor q = random_tensor(2, d, rng);
  Tensor v = random_tensor(5, d, rng);
  Tensor out = mha_cross_attention(q, v, v, 1, params, "c");
  double lo[d], hi[d];
  for (int j = 0; j < d; ++j) {
    lo[j] = 1e300;
    hi[j] = -1e300;
    for (int i = 0; i < 5; ++i) {
      lo[j] = std::min(lo[j], v.at(i, j));
      hi[j] = std::max(hi[j], v.at(i, j));
    }
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d; ++j) {
      CHECK(out.at(i, j) >= lo[j] - 1e-12);
      CHECK(out.at(i, j) <= hi[j] + 1e-12);
    }
}

TEST_CASE("backward basics") {
  // loss = sum(W x): dLoss/dW = x broadcast over rows
  ParameterSet params;
  std::mt19937_64 rng(51);
  Tensor& w = params.add("w", random_tensor(3, 3, rng));
  Tensor x = random_tensor(3, 1, rng);
  params.zero_grad();
  backward(sum(matmul(params.at("w"), x)));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(w.grad()[static_cast<size_t>(i) * 3 + j] == doctest::Approx(x.at(j, 0)).epsilon(1e-12));

  // untouched parameter keeps zero gradient
  Tensor& unused = params.add("unused", random_tensor(2, 2, rng));
  params.zero_grad();
  backward(sum(matmul(params.at("w"), x)));
  for (double g : unused.grad()) CHECK(g == 0.0);

  CHECK_THROWS_AS(backward(Tensor(2, 1, {1.0, 2.0}, true)), std::invalid_argument);
}

TEST_CASE("finite-difference gradients for core blocks") {
  std::mt19937_64 rng(61);
  ctce::testing::max_rel_grad_error;  // silence unused warning on some compilers

  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    params.add("a", random_tensor(4, 3, rng));
    params.add("b", random_tensor(3, 5, rng));
    auto loss = [&]() { return sum(matmul(params.at("a"), params.at("b"))); };
    CHECK(ctce::testing::max_rel_grad_error(params, loss) < 1e-4);
  }

  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    params.add("x", random_tensor(2, 6, rng));
    Tensor weights = random_tensor(2, 6, rng);
    auto loss = [&]() { return sum(mul(softmax_rows(params.at("x")), weights)); };
    CHECK(ctce::testing::max_rel_grad_error(params, loss) < 1e-4);
  }

  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    MlpSpec spec{{4, 6, 3}, trial % 2 == 0 ? Activation::gelu : Activation::relu};
    init_mlp(params, "n", spec, rng);
    Tensor x = random_tensor(3, 4, rng);
    auto loss = [&]() { return mean(pow_elem(mlp_forward(x, spec, params, "n"), 2.0)); };
    CHECK(ctce::testing::max_rel_grad_error(params, loss) < 1e-4);
  }

  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    init_attention(params, "att", 8, rng);
    Tensor q = random_tensor(3, 8, rng), k = random_tensor(4, 8, rng), v = random_tensor(4, 8, rng);
    auto loss = [&]() {
      return mean(pow_elem(mha_cross_attention(q, k, v, 2, params, "att"), 2.0));
    };
    CHECK(ctce::testing::max_rel_grad_error(params, loss) < 1e-4);
  }

  // softmax-cross-entropy chain
  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    params.add("logits", random_tensor(3, 4, rng));
    Tensor target = Tensor::zeros(3, 4);
    for (int i = 0; i < 3; ++i) target.set(i, (trial + i) % 4, 1.0);
    auto loss = [&]() {
      return neg(mean(mul(target, log_elem(softmax_rows(params.at("logits"))))));
    };
    CHECK(ctce::testing::max_rel_grad_error(params, loss) < 1e-4);
  }
}

TEST_CASE("forward determinism") {
  std::mt19937_64 rng(71);
  ParameterSet params;
  MlpSpec spec{{5, 8, 5}, Activation::gelu};
  init_mlp(params, "n", spec, rng);
  Tensor x = random_tensor(4, 5, rng);
  Tensor y1 = mlp_forward(x, spec, params, "n");
  Tensor y2 = mlp_forward(x, spec, params, "n");
  CHECK(y1.values() == y2.values());
}

TEST_CASE("parameter checkpoint round-trip") {
  std::mt19937_64 rng(81);
  ParameterSet params;
  init_mlp(params, "n", MlpSpec{{3, 4, 2}, Activation::relu}, rng);
  init_attention(params, "a", 4, rng);
  const std::string path = "/tmp/ctce_test_params.bin";
  params.save(path);
  ParameterSet loaded = ParameterSet::load(path);
  CHECK(loaded.size() == params.size());
  for (const auto& [name, t] : params) {
    CHECK(loaded.has(name));
    CHECK(loaded.at(name).values() == t.values());
  }
}

TEST_CASE("adamw zero lr leaves parameters unchanged") {
  std::mt19937_64 rng(91);
  ParameterSet params;
  init_mlp(params, "n", MlpSpec{{3, 3}, Activation::relu}, rng);
  const auto before = params.at("n/w0").values();
  AdamW opt({.lr = 0.0});
  params.zero_grad();
  backward(sum(pow_elem(matmul(Tensor::row({1, 2, 3}), params.at("n/w0")), 2.0)));
  opt.step(params);
  CHECK(params.at("n/w0").values() == before);
}
