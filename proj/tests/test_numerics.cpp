#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gradcheck.hpp"
#include "icprl/adam.hpp"
#include "icprl/checkpoint.hpp"
#include "icprl/tensor.hpp"

using namespace icprl;
using namespace icprl::nn;

namespace {

Tensor leafy(std::vector<long> shape, Rng& rng, const std::string& name) {
  return Tensor::randn(std::move(shape), 0.8, rng, true, name);
}

// Weighted sum so that every output element receives a distinct gradient.
Tensor pin(const Tensor& t, const Tensor& w) { return reduce_sum(mul(t, w)); }

}  // namespace

TEST_CASE("elementwise op values") {
  auto x = Tensor::constant({3}, {0.0, 2.0, -3.0});
  CHECK(logsigmoid(x).value()[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(sigmoid(x).value()[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(nn::exp(x).value()[1] == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK(neg(x).value()[2] == 3.0);
  CHECK(square(x).value()[2] == 9.0);
  // stable logsigmoid at extreme inputs: no overflow, correct asymptotes
  auto ext = Tensor::constant({2}, {745.0, -745.0});
  auto ls = logsigmoid(ext).value();
  CHECK(ls[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ls[1] == doctest::Approx(-745.0).epsilon(1e-12));
  CHECK(std::isfinite(ls[0]));
  CHECK(std::isfinite(ls[1]));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng = make_rng(7);
  auto x = Tensor::randn({4, 9}, 3.0, rng, false);
  auto s = softmax_lastdim(x);
  for (int r = 0; r < 4; r++) {
    double sum = 0;
    for (int j = 0; j < 9; j++) sum += s.value()[r * 9 + j];
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
  auto shifted = add(x, Tensor::full({9}, 123.25));
  auto s2 = softmax_lastdim(shifted);
  for (long i = 0; i < x.numel(); i++) CHECK(std::fabs(s.value()[i] - s2.value()[i]) < 1e-12);
  // log_softmax agrees with log(softmax) on moderate inputs
  auto ls = log_softmax_lastdim(x);
  for (long i = 0; i < x.numel(); i++)
    CHECK(std::fabs(std::exp(ls.value()[i]) - s.value()[i]) < 1e-12);
}

TEST_CASE("matmul identity and value") {
  Rng rng = make_rng(3);
  auto a = Tensor::randn({4, 4}, 1.0, rng, false);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; i++) eye[i * 4 + i] = 1.0;
  auto out = matmul(a, Tensor::constant({4, 4}, eye));
  for (long i = 0; i < 16; i++) CHECK(out.value()[i] == a.value()[i]);

  auto b = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  auto c = Tensor::constant({3, 2}, {7, 8, 9, 10, 11, 12});
  auto bc = matmul(b, c);
  CHECK(bc.value() == std::vector<double>{58, 64, 139, 154});
  // transpose flags agree with explicit transposition
  auto bt = Tensor::constant({3, 2}, {1, 4, 2, 5, 3, 6});
  auto bc2 = matmul(bt, c, true, false);
  CHECK(bc2.value() == bc.value());
  auto ct = Tensor::constant({2, 3}, {7, 9, 11, 8, 10, 12});
  auto bc3 = matmul(b, ct, false, true);
  CHECK(bc3.value() == bc.value());
}

TEST_CASE("layernorm normalizes rows") {
  Rng rng = make_rng(11);
  auto x = Tensor::randn({6, 16}, 2.5, rng, false);
  auto g = Tensor::full({16}, 1.0);
  auto b = Tensor::full({16}, 0.0);
  auto y = layernorm(x, g, b);
  for (int r = 0; r < 6; r++) {
    double mu = 0, var = 0;
    for (int j = 0; j < 16; j++) mu += y.value()[r * 16 + j];
    mu /= 16;
    for (int j = 0; j < 16; j++) {
      double d = y.value()[r * 16 + j] - mu;
      var += d * d;
    }
    var /= 16;
    CHECK(std::fabs(mu) < 1e-9);
    CHECK(std::fabs(var - 1.0) < 1e-4);  // eps=1e-5 shrinks variance slightly
  }
}

TEST_CASE("finite differences: every op") {
  Rng rng = make_rng(2024);

  auto fd_op = [&](const char* what, std::vector<Tensor> leaves,
                   std::function<Tensor()> loss) {
    auto res = gradcheck::check(leaves, loss, 1e-5);
    INFO(what << " worst " << res.worst_param << "[" << res.worst_index << "]");
    CHECK(res.max_rel_err < 1e-6);
  };

  {
    auto a = leafy({3, 4}, rng, "a");
    auto b = leafy({4, 5}, rng, "b");
    auto w = Tensor::randn({3, 5}, 1.0, rng, false);
    fd_op("matmul", {a, b}, [&] { return pin(matmul(a, b), w); });
  }
  {
    auto a = leafy({4, 3}, rng, "a");
    auto b = leafy({4, 5}, rng, "b");
    auto w = Tensor::randn({3, 5}, 1.0, rng, false);
    fd_op("matmul_ta", {a, b}, [&] { return pin(matmul(a, b, true, false), w); });
  }
  {
    auto a = leafy({3, 4}, rng, "a");
    auto b = leafy({5, 4}, rng, "b");
    auto w = Tensor::randn({3, 5}, 1.0, rng, false);
    fd_op("matmul_tb", {a, b}, [&] { return pin(matmul(a, b, false, true), w); });
  }
  {
    auto a = leafy({2, 3, 4}, rng, "a");
    auto b = leafy({2, 4, 2}, rng, "b");
    auto w = Tensor::randn({2, 3, 2}, 1.0, rng, false);
    fd_op("matmul_batched", {a, b}, [&] { return pin(matmul(a, b), w); });
  }
  {
    auto a = leafy({2, 6}, rng, "a");
    auto b = leafy({6}, rng, "b");
    auto w = Tensor::randn({2, 6}, 1.0, rng, false);
    fd_op("add_broadcast", {a, b}, [&] { return pin(add(a, b), w); });
  }
  {
    auto a = leafy({2, 6}, rng, "a");
    auto b = leafy({2, 6}, rng, "b");
    auto w = Tensor::randn({2, 6}, 1.0, rng, false);
    fd_op("mul", {a, b}, [&] { return pin(mul(a, b), w); });
    fd_op("sub", {a, b}, [&] { return pin(sub(a, b), w); });
    fd_op("scale", {a}, [&] { return pin(scale(a, -1.7), w); });
    fd_op("neg", {a}, [&] { return pin(neg(a), w); });
    fd_op("square", {a}, [&] { return pin(square(a), w); });
    fd_op("exp", {a}, [&] { return pin(nn::exp(scale(a, 0.3)), w); });
    fd_op("sigmoid", {a}, [&] { return pin(sigmoid(a), w); });
    fd_op("logsigmoid", {a}, [&] { return pin(logsigmoid(a), w); });
    fd_op("gelu", {a}, [&] { return pin(gelu(a), w); });
    fd_op("softmax", {a}, [&] { return pin(softmax_lastdim(a), w); });
    fd_op("log_softmax", {a}, [&] { return pin(log_softmax_lastdim(a), w); });
    fd_op("reduce_sum_lastdim", {a}, [&] {
      auto w2 = Tensor::constant({2}, {0.7, -1.3});
      return reduce_sum(mul(reduce_sum_lastdim(a), w2));
    });
  }
  {
    // keep log inputs well away from zero
    Rng r2 = make_rng(5);
    auto a = Tensor::randn({2, 6}, 0.05, r2, true, "a");
    for (auto& v : a.value()) v += 2.0;
    auto w = Tensor::randn({2, 6}, 1.0, r2, false);
    fd_op("log", {a}, [&] { return pin(nn::log(a), w); });
  }
  {
    auto x = leafy({5, 8}, rng, "x");
    auto g = leafy({8}, rng, "g");
    auto b = leafy({8}, rng, "b");
    auto w = Tensor::randn({5, 8}, 1.0, rng, false);
    fd_op("layernorm", {x, g, b}, [&] { return pin(layernorm(x, g, b), w); });
  }
  {
    auto t = leafy({7, 4}, rng, "table");
    std::vector<long> ids = {0, 3, 3, 6, 1};
    auto w = Tensor::randn({5, 4}, 1.0, rng, false);
    fd_op("embed_lookup", {t}, [&] { return pin(embed_lookup(t, ids), w); });
  }
  {
    auto x = leafy({3, 5}, rng, "x");
    std::vector<long> ids = {0, 7, 7, 14, 2};
    auto w = Tensor::randn({5}, 1.0, rng, false);
    fd_op("gather_flat", {x}, [&] { return pin(gather_flat(x, ids), w); });
  }
  {
    auto a = leafy({3, 2}, rng, "a");
    auto b = leafy({3, 4}, rng, "b");
    auto w = Tensor::randn({3, 6}, 1.0, rng, false);
    fd_op("concat", {a, b}, [&] { return pin(concat({a, b}, 1), w); });
  }
  {
    auto x = leafy({4, 6}, rng, "x");
    auto w = Tensor::randn({4, 3}, 1.0, rng, false);
    fd_op("slice", {x}, [&] { return pin(slice(x, 1, 2, 3), w); });
  }
}

TEST_CASE("gradient accumulation uses += until zeroed") {
  auto x = Tensor::constant({2}, {1.5, -2.0});
  x.node->requires_grad = true;
  auto loss = [&] { return reduce_sum(square(x)); };
  backward(loss());
  std::vector<double> once = x.grad();
  backward(loss());
  for (int i = 0; i < 2; i++) CHECK(x.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("backward_into sink matches in-place gradients bitwise") {
  Rng rng = make_rng(19);
  auto a = leafy({3, 3}, rng, "a");
  auto b = leafy({3, 3}, rng, "b");
  auto build = [&] { return mean_all(square(matmul(gelu(a), b))); };
  backward(build());
  auto ga = a.grad(), gb = b.grad();
  std::fill(a.grad().begin(), a.grad().end(), 0.0);
  std::fill(b.grad().begin(), b.grad().end(), 0.0);
  GradSink sink;
  backward_into(build(), sink);
  CHECK(sink.at(a.node.get()) == ga);
  CHECK(sink.at(b.node.get()) == gb);
  // in-place grads untouched by the sink pass
  for (double v : a.grad()) CHECK(v == 0.0);
}

TEST_CASE("NoGrad builds no graph") {
  Rng rng = make_rng(1);
  auto a = leafy({2, 2}, rng, "a");
  NoGrad ng;
  auto out = mean_all(square(a));
  CHECK_FALSE(out.requires_grad());
  CHECK(out.node->parents.empty());
}

TEST_CASE("shape errors are descriptive") {
  auto a = Tensor::constant({2, 3}, std::vector<double>(6, 1.0));
  auto b = Tensor::constant({2, 2}, std::vector<double>(4, 1.0));
  CHECK_THROWS_AS((void)matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)mul(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)add(b, a), std::invalid_argument);
  CHECK_THROWS_AS((void)Tensor::constant({0, 3}, {}), std::invalid_argument);
  CHECK_THROWS_AS((void)embed_lookup(a, {5}), std::invalid_argument);
  CHECK_THROWS_AS((void)slice(a, 1, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(backward(a), std::invalid_argument);  // non-scalar loss
}

TEST_CASE("adam matches hand recurrence for two steps") {
  auto p = Tensor::constant({3}, {1.0, -0.5, 2.0});
  p.node->requires_grad = true;
  p.node->name = "p";
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt({p}, cfg);

  std::vector<double> grads = {0.3, -1.1, 0.0};
  std::vector<double> m(3, 0.0), v(3, 0.0), ref = p.value();
  for (int t = 1; t <= 2; t++) {
    p.node->ensure_grad();
    for (int i = 0; i < 3; i++) p.grad()[i] = grads[i];
    opt.step();
    for (int i = 0; i < 3; i++) {
      m[i] = 0.9 * m[i] + 0.1 * grads[i];
      v[i] = 0.999 * v[i] + 0.001 * grads[i] * grads[i];
      double mhat = m[i] / (1.0 - std::pow(0.9, t));
      double vhat = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      CHECK(p.value()[i] == doctest::Approx(ref[i]).epsilon(1e-15));
    }
    opt.zero_grads();
    for (double g : p.grad()) CHECK(g == 0.0);
  }
  CHECK(opt.step_count() == 2);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  auto p = Tensor::constant({2}, {1.0, 1.0});
  p.node->requires_grad = true;
  p.node->name = "layer.w";
  Adam opt({p});
  p.node->ensure_grad();
  p.grad()[1] = std::nan("");
  try {
    opt.step();
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("layer.w") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bitwise identical") {
  Rng rng = make_rng(99);
  auto a = Tensor::randn({3, 5}, 0.7, rng, true, "block.w");
  auto b = Tensor::randn({5}, 0.7, rng, true, "block.b");
  std::string path = "test_ckpt.bin";
  save_checkpoint(path, 0xdeadbeefULL, {a, b});

  auto ck = load_checkpoint(path);
  CHECK(ck.config_hash == 0xdeadbeefULL);
  CHECK(ck.entries.size() == 2);
  CHECK(ck.entries.at("block.w").data == a.value());
  CHECK(ck.entries.at("block.b").data == b.value());

  auto a2 = Tensor::zeros({3, 5}, true, "block.w");
  auto b2 = Tensor::zeros({5}, true, "block.b");
  std::vector<Tensor> params = {a2, b2};
  restore_params(ck, params);
  CHECK(a2.value() == a.value());
  CHECK(b2.value() == b.value());

  // truncated file rejected
  auto all = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, all - 9);
  CHECK_THROWS_AS((void)load_checkpoint(path), std::runtime_error);
  // wrong magic rejected
  FILE* f = fopen(path.c_str(), "r+b");
  fwrite("XXXX", 1, 4, f);
  fclose(f);
  CHECK_THROWS_AS((void)load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);

  // shape mismatch on restore rejected
  save_checkpoint(path, 1, {a});
  auto ck2 = load_checkpoint(path);
  auto wrong = Tensor::zeros({5, 3}, true, "block.w");
  std::vector<Tensor> wp = {wrong};
  CHECK_THROWS_AS(restore_params(ck2, wp), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("rng determinism: same seed, same stream") {
  Rng r1 = make_rng(123), r2 = make_rng(123);
  auto a = Tensor::randn({4, 4}, 1.0, r1, false);
  auto b = Tensor::randn({4, 4}, 1.0, r2, false);
  CHECK(a.value() == b.value());
  CHECK(derive_seed(7, "stream", 3) == derive_seed(7, "stream", 3));
  CHECK(derive_seed(7, "stream", 3) != derive_seed(7, "stream", 4));
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
}

TEST_CASE("worker pool reduces deterministically") {
  WorkerPool pool(4);
  std::vector<double> out(64, 0.0);
  pool.run(64, [&](int i) { out[i] = std::sqrt((double)i) * 3.5; });
  for (int rep = 0; rep < 3; rep++) {
    std::vector<double> out2(64, 0.0);
    pool.run(64, [&](int i) { out2[i] = std::sqrt((double)i) * 3.5; });
    CHECK(out == out2);
  }
  CHECK_THROWS(pool.run(4, [&](int i) {
    if (i == 2) throw std::runtime_error("boom");
  }));
}
