#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "promind/checkpoint.hpp"
#include "promind/linalg.hpp"
#include "promind/nets.hpp"
#include "promind/ops.hpp"
#include "promind/optim.hpp"
#include "promind/tensor.hpp"

using namespace promind::num;
using promind::Rng;

TEST_CASE("backward of sum gives ones") {
  Tensor64 x = Tensor64::from({3}, {2.0, -1.0, 5.0}, true);
  Tensor64 loss = sum(x);
  backward(loss);
  CHECK(x.grad() == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("backward of dot(x,x) doubles x") {
  Tensor64 x = Tensor64::from({2}, {1.0, 2.0}, true);
  Tensor64 loss = dot(x, x);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss and detached graphs") {
  Tensor64 x = Tensor64::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(x), std::invalid_argument);
  Tensor64 detached = Tensor64::from({}, {3.0});
  CHECK_THROWS_AS(backward(detached), std::runtime_error);
}

TEST_CASE("graph is consumable exactly once") {
  Tensor64 x = Tensor64::from({2}, {1.0, 2.0}, true);
  Tensor64 loss = dot(x, x);
  backward(loss);
  CHECK_THROWS_WITH_AS(backward(loss), doctest::Contains("consumed"), std::runtime_error);
}

TEST_CASE("non-finite op output is an error") {
  Tensor64 x = Tensor64::from({2}, {1.0, 0.0});
  Tensor64 y = Tensor64::from({2}, {1.0, 0.0});
  CHECK_THROWS_AS(div(x, y), std::runtime_error);
}

TEST_CASE("two-layer MLP matches finite differences") {
  Rng rng(7);
  auto net = Mlp<double>::init(5, 8, 3, rng);
  Tensor64 x = Tensor64::randn({4, 5}, rng, 1.0);
  std::vector<int> targets = {0, 2, 1, 2};
  auto loss_fn = [&]() { return cross_entropy_rows(net.forward(x), targets); };
  CHECK(oracle::gradcheck(net.params(), loss_fn) < 1e-4);
}

TEST_CASE("gated MLP matches finite differences") {
  Rng rng(11);
  auto net = GatedMlp<double>::init(4, 6, 3, rng);
  Tensor64 v = Tensor64::randn({3, 4}, rng, 1.0);
  Tensor64 c = Tensor64::randn({3, 4}, rng, 1.0);
  std::vector<int> targets = {1, 0, 2};
  auto loss_fn = [&]() { return cross_entropy_rows(net.forward(v, c), targets); };
  CHECK(oracle::gradcheck(net.params(), loss_fn) < 1e-4);
}

TEST_CASE("attention block matches finite differences") {
  Rng rng(13);
  auto blk = TransformerBlock<double>::init(8, 2, rng);
  Tensor64 x = Tensor64::randn({5, 8}, rng, 1.0);
  auto loss_fn = [&]() {
    Tensor64 y = blk.forward(x);
    return mean(mul(y, y));
  };
  auto params = blk.params();
  CHECK(oracle::gradcheck(params, loss_fn) < 1e-4);
}

TEST_CASE("attention pool matches finite differences") {
  Rng rng(17);
  auto net = AttnPool<double>::init(6, 5, rng);
  Tensor64 tokens = Tensor64::randn({4, 6}, rng, 1.0);
  auto loss_fn = [&]() {
    Tensor64 logits = net.forward(tokens);
    Tensor64 probs = softmax_vec(logits);
    return scale(log_op(pick(probs, 2)), -1.0);
  };
  CHECK(oracle::gradcheck(net.params(), loss_fn) < 1e-4);
}

TEST_CASE("residual projection matches finite differences") {
  Rng rng(19);
  auto net = ResidualProjection<double>::init(6, 10, rng, 0.05);
  Tensor64 a = Tensor64::randn({6}, rng, 1.0);
  Tensor64 b = Tensor64::randn({6}, rng, 1.0);
  auto loss_fn = [&]() {
    Tensor64 fa = net.forward(
        Tensor64::from({1, 6}, std::vector<double>(a.values())));
    Tensor64 fb = net.forward(
        Tensor64::from({1, 6}, std::vector<double>(b.values())));
    Tensor64 ca = concat_vec<double>({fa});
    Tensor64 cb = concat_vec<double>({fb});
    Tensor64 sim = cosine(ca, cb);
    Tensor64 target = Tensor64::scalar(0.3);
    return mse(sim, target);
  };
  CHECK(oracle::gradcheck(net.params(), loss_fn) < 1e-4);
}

TEST_CASE("layer norm matches finite differences") {
  Rng rng(23);
  Tensor64 x = Tensor64::randn({3, 7}, rng, 1.5, true);
  Tensor64 g = Tensor64::randn({7}, rng, 0.5, true);
  Tensor64 b = Tensor64::randn({7}, rng, 0.5, true);
  auto loss_fn = [&]() {
    Tensor64 y = layer_norm_rows(x, g, b);
    return mean(mul(y, y));
  };
  CHECK(oracle::gradcheck({x, g, b}, loss_fn) < 1e-4);
}

TEST_CASE("adamw leaves params unchanged at zero gradient without decay") {
  Tensor64 w = Tensor64::from({3}, {1.0, -2.0, 0.5}, true);
  AdamWConfig cfg;
  cfg.lr = 1e-2;
  AdamW<double> opt({w}, cfg);
  w.zero_grad();
  opt.step();
  CHECK(w.values() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adamw first step moves a scalar by about lr") {
  Tensor64 w = Tensor64::from({}, {1.0}, true);
  AdamWConfig cfg;
  cfg.lr = 1e-4;
  AdamW<double> opt({w}, cfg);
  Tensor64 loss = sum(w);  // gradient 1
  backward(loss);
  opt.step();
  CHECK(w.item() == doctest::Approx(1.0 - 1e-4).epsilon(1e-6));
}

TEST_CASE("adamw descends (w-3)^2 monotonically from 0") {
  Tensor64 w = Tensor64::from({}, {0.0}, true);
  AdamWConfig cfg;
  cfg.lr = 0.02;
  AdamW<double> opt({w}, cfg);
  double prev_dist = 3.0;
  for (int step = 0; step < 100; ++step) {
    opt.zero_grad();
    Tensor64 diff = sub(w, Tensor64::scalar(3.0));
    Tensor64 loss = mul(diff, diff);
    backward(loss);
    opt.step();
    double dist = std::abs(w.item() - 3.0);
    CHECK(dist < prev_dist);
    prev_dist = dist;
  }
  CHECK(w.item() > 1.5);
}

TEST_CASE("adamw rejects bad lr") {
  Tensor64 w = Tensor64::from({}, {0.0}, true);
  AdamWConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(AdamW<double>({w}, cfg), std::invalid_argument);
}

TEST_CASE("svd of rank-1 matrix concentrates all variance") {
  // Rows proportional to a single direction plus distinct magnitudes.
  std::vector<double> m;
  std::vector<double> dir = {3.0, -1.0, 2.0};
  for (double c : {1.0, -2.0, 0.5, 4.0}) {
    for (double d : dir) m.push_back(c * d);
  }
  auto r = top_k_svd(m, 4, 3, 3);
  CHECK(r.variance_fractions[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.variance_fractions[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.variance_fractions[2] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("svd of isotropic data splits variance evenly") {
  // +/- basis rows are already centered; all four directions carry equal mass.
  std::vector<double> m(8 * 4, 0.0);
  for (size_t i = 0; i < 4; ++i) {
    m[(2 * i) * 4 + i] = 1.0;
    m[(2 * i + 1) * 4 + i] = -1.0;
  }
  auto r = top_k_svd(m, 8, 4, 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(r.variance_fractions[i] == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("svd fractions match eigendecomposition oracle on random 50x16") {
  Rng rng(31);
  std::vector<double> m(50 * 16);
  for (auto& v : m) v = rng.normal(0.0, 1.0) + 0.3;
  auto r = top_k_svd(m, 50, 16, 16);
  auto eig = oracle::centered_gram_eigenvalues(m, 50, 16);
  double total = 0.0;
  for (double e : eig) total += std::max(e, 0.0);
  double cumulative = 0.0;
  for (size_t i = 0; i < 16; ++i) {
    CHECK(r.variance_fractions[i] == doctest::Approx(std::max(eig[i], 0.0) / total).epsilon(1e-6));
    CHECK(r.variance_fractions[i] >= 0.0);
    CHECK(r.variance_fractions[i] <= 1.0);
    if (i > 0) CHECK(r.variance_fractions[i] <= r.variance_fractions[i - 1] + 1e-12);
    cumulative += r.variance_fractions[i];
  }
  CHECK(cumulative <= 1.0 + 1e-9);
}

TEST_CASE("svd validates k") {
  std::vector<double> m(4 * 3, 1.0);
  CHECK_THROWS_AS(top_k_svd(m, 4, 3, 4), std::invalid_argument);
  CHECK_THROWS_AS(top_k_svd(m, 4, 3, 0), std::invalid_argument);
}

TEST_CASE("cosine similarity basics") {
  std::vector<double> u = {1.0, 0.0};
  std::vector<double> v = {1.0, 1.0};
  std::vector<double> e2 = {0.0, 1.0};
  CHECK(cosine_sim(u, u) == doctest::Approx(1.0));
  CHECK(cosine_sim(u, e2) == doctest::Approx(0.0));
  CHECK(cosine_sim(u, v) == doctest::Approx(0.70710678).epsilon(1e-6));
  std::vector<double> z = {0.0, 0.0};
  CHECK_THROWS_AS(cosine_sim(u, z), std::invalid_argument);
}

TEST_CASE("same seed and op sequence is bit identical") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    auto net = Mlp<float>::init(6, 8, 4, rng);
    Tensor32 x = Tensor32::randn({5, 6}, rng, 1.0f);
    std::vector<int> t = {0, 1, 2, 3, 0};
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    AdamW<float> opt(net.params(), cfg);
    for (int i = 0; i < 5; ++i) {
      opt.zero_grad();
      backward(cross_entropy_rows(net.forward(x), t));
      opt.step();
    }
    Checkpoint ck;
    net.save_into(ck, "net");
    return ck.serialize();
  };
  CHECK(run(99) == run(99));
  CHECK(run(99) != run(100));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(5);
  Checkpoint ck;
  ck.put("a", Tensor32::randn({3, 4}, rng, 2.0f));
  ck.put("b", Tensor64::randn({7}, rng, 1.0));

  std::string path = (std::filesystem::temp_directory_path() / "promind_ck_test.bin").string();
  ck.save(path);
  Checkpoint back = Checkpoint::load(path);
  CHECK(back.serialize() == ck.serialize());
  CHECK(back.get_f32("a").values() == ck.get_f32("a").values());
  CHECK(back.get_f64("b").values() == ck.get_f64("b").values());
  CHECK_THROWS_AS(back.get_f64("a"), std::runtime_error);
  CHECK_THROWS_AS(back.get_f32("missing"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoint bytes are rejected") {
  Rng rng(6);
  Checkpoint ck;
  ck.put("w", Tensor32::randn({4, 4}, rng, 1.0f));
  auto bytes = ck.serialize();
  bytes.resize(bytes.size() - 5);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes), std::runtime_error);
  bytes[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes), std::runtime_error);
}

TEST_CASE("gather and slice shapes are validated") {
  Tensor32 table = Tensor32::zeros({4, 3});
  CHECK_THROWS_AS(gather_rows(table, {4}), std::out_of_range);
  CHECK_THROWS_AS(slice_cols(table, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(matmul(table, table), std::invalid_argument);
}
