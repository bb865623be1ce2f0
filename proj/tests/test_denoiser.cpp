#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "modiff/conditioning.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/graph.hpp"
#include "modiff/rng.hpp"
#include "modiff/tensor.hpp"

using namespace modiff;

namespace {

Tensor<double> randn(int r, int c, uint64_t seed) {
  Tensor<double> t(r, c);
  NormalSampler rng(seed);
  fill_normal(t, rng);
  return t;
}

Tensor<double> identity(int n) {
  Tensor<double> t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

DenoiserHyper tiny_hyper(Modality m) {
  DenoiserHyper h;
  h.input_channels = 6;
  h.base_channels = 4;
  h.channel_mults = {1, 1, 2};
  h.heads = 1;
  h.attn_dim = 4;
  h.ctx_dim = 4;
  h.time_sin_dim = 4;
  h.time_mlp_dim = 8;
  h.modality = m;
  h.mel_bands = 5;
  if (m == Modality::kText) h.vocab_size = 7;
  return h;
}

// The zero-init head makes a fresh model output zero; give the head real
// weights so forward carries signal.
void wake_head(DenoiserModel<double>& model, uint64_t seed) {
  NormalSampler rng(seed);
  fill_normal(model.params["head.w"], rng);
  fill_normal(model.params["head.b"], rng);
}

}  // namespace

TEST_CASE("time embedding at t=0 is zeros then ones") {
  const auto e = time_embedding<double>(0, 10);
  REQUIRE(e.rows == 1);
  REQUIRE(e.cols == 10);
  for (int i = 0; i < 5; ++i) {
    CHECK(e.at(0, i) == 0.0);
    CHECK(e.at(0, 5 + i) == 1.0);
  }
}

TEST_CASE("time embedding matches direct trigonometric evaluation") {
  // sin(7 * 10000^(-2i/8)) and cos of the same, i = 0..3.
  const double sins[4] = {0.6569865987187891, 0.6442176872376911, 0.06994284733753277,
                          0.006999942833473391};
  const double coss[4] = {0.7539022543433046, 0.7648421872844884, 0.9975510002532796,
                          0.9999755001000415};
  const auto e = time_embedding<double>(7, 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(e.at(0, i) == doctest::Approx(sins[i]).epsilon(1e-14));
    CHECK(e.at(0, 4 + i) == doctest::Approx(coss[i]).epsilon(1e-14));
  }
}

TEST_CASE("time embedding is deterministic and rejects odd widths") {
  const auto a = time_embedding<double>(123, 16);
  const auto b = time_embedding<double>(123, 16);
  REQUIRE(a.numel() == b.numel());
  CHECK(std::memcmp(a.v.data(), b.v.data(), a.numel() * sizeof(double)) == 0);
  CHECK_THROWS_AS(time_embedding<double>(3, 5), ParameterError);
  CHECK_THROWS_AS(time_embedding<double>(3, 1), ParameterError);
  CHECK_THROWS_AS(time_embedding<double>(3, 0), ParameterError);
}

TEST_CASE("single context row gets softmax weight one") {
  // With m=1 every query attends to the lone row with weight exactly 1, so
  // every output row equals the projected value row whatever the logits are.
  const auto x = randn(3, 4, 11);
  const auto c = randn(1, 4, 12);
  AttentionParams<double> p;
  p.wq = randn(4, 4, 13);
  p.wk = randn(4, 4, 14);
  p.wv = randn(4, 4, 15);
  p.wo = randn(4, 4, 16);

  for (int heads : {1, 2}) {
    p.heads = heads;
    const auto out = cross_attention(x, c, p);
    REQUIRE(out.rows == 3);
    REQUIRE(out.cols == 4);
    // Expected row: (c wv) wo, computed by plain loops.
    double v[4] = {0, 0, 0, 0};
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) v[j] += c.at(0, k) * p.wv.at(k, j);
    double want[4] = {0, 0, 0, 0};
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) want[j] += v[k] * p.wo.at(k, j);
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < 4; ++j) CHECK(out.at(r, j) == doctest::Approx(want[j]).epsilon(1e-12));
  }
}

TEST_CASE("identical keys average the value rows") {
  // Two distinct context rows whose keys coincide (the key projection only
  // sees coordinates where they agree) weigh uniformly, so with identity
  // value/output projections the result is the plain mean of the rows.
  const auto x = randn(3, 4, 21);
  Tensor<double> c(2, 4);
  const double c0[4] = {1.0, 2.0, 5.0, 6.0};
  const double c1[4] = {1.0, 2.0, 7.0, 8.0};
  for (int j = 0; j < 4; ++j) {
    c.at(0, j) = c0[j];
    c.at(1, j) = c1[j];
  }
  AttentionParams<double> p;
  p.wq = randn(4, 4, 22);
  p.wk = Tensor<double>(4, 4);
  p.wk.at(0, 0) = 1.0;
  p.wk.at(1, 1) = 1.0;  // keys keep only the two agreeing coordinates
  p.wv = identity(4);
  p.wo = identity(4);
  p.heads = 1;
  const auto out = cross_attention(x, c, p);
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 4; ++j)
      CHECK(out.at(r, j) == doctest::Approx(0.5 * (c0[j] + c1[j])).epsilon(1e-12));
}

TEST_CASE("attention matches a scalar triple-loop oracle") {
  // 3x4 queries over a 5x4 context, one head, identity projections.
  const auto x = randn(3, 4, 31);
  const auto c = randn(5, 4, 32);
  AttentionParams<double> p;
  p.wq = identity(4);
  p.wk = identity(4);
  p.wv = identity(4);
  p.wo = identity(4);
  p.heads = 1;
  const auto out = cross_attention(x, c, p);

  const double inv = 1.0 / std::sqrt(4.0);
  for (int i = 0; i < 3; ++i) {
    double logits[5], mx = -1e300;
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += x.at(i, k) * c.at(j, k);
      logits[j] = s * inv;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (int j = 0; j < 5; ++j) z += std::exp(logits[j] - mx);
    for (int k = 0; k < 4; ++k) {
      double want = 0.0;
      for (int j = 0; j < 5; ++j) want += std::exp(logits[j] - mx) / z * c.at(j, k);
      CHECK(out.at(i, k) == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("attention weights on each query row sum to one") {
  // Identity context rows with an all-ones value projection turn the output
  // into the row sums of the softmax weights; those must all be 1.
  const auto x = randn(3, 4, 41);
  AttentionParams<double> p;
  p.wq = randn(4, 4, 42);
  p.wk = randn(4, 4, 43);
  p.wv = Tensor<double>(4, 4);
  p.wv.fill(1.0);
  p.wo = identity(4);
  p.heads = 2;
  const auto out = cross_attention(x, identity(4), p);
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 4; ++j) CHECK(out.at(r, j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention rejects mismatched shapes") {
  AttentionParams<double> p;
  p.wq = identity(4);
  p.wk = identity(4);
  p.wv = identity(4);
  p.wo = identity(4);
  p.heads = 1;
  CHECK_THROWS_AS(cross_attention(randn(3, 4, 51), randn(2, 5, 52), p), DimensionError);
  p.heads = 3;  // does not divide width 4
  CHECK_THROWS_AS(cross_attention(randn(3, 4, 53), randn(2, 4, 54), p), ParameterError);
}

TEST_CASE("forward preserves the input shape") {
  auto model = build_denoiser<double>(tiny_hyper(Modality::kNone));
  init_params(model, 99);
  wake_head(model, 1234);
  for (int n : {16, 40, 200, 37}) {
    const auto mt = randn(n, 6, 60 + uint64_t(n));
    const auto out = denoiser_predict<double>(model, mt, 17, nullptr);
    CHECK(out.rows == n);
    CHECK(out.cols == 6);
    CHECK(all_finite(out));
  }
}

TEST_CASE("fresh model with zero-init head predicts exactly zero") {
  auto model = build_denoiser<double>(tiny_hyper(Modality::kNone));
  init_params(model, 7);
  const auto mt = randn(24, 6, 71);
  const auto out = denoiser_predict<double>(model, mt, 500, nullptr);
  for (size_t i = 0; i < out.numel(); ++i) CHECK(out.v[i] == 0.0);
}

TEST_CASE("forward is bit-identical across independent builds") {
  const auto mt = randn(40, 6, 81);
  Tensor<double> a, b;
  for (int run = 0; run < 2; ++run) {
    auto model = build_denoiser<double>(tiny_hyper(Modality::kNone));
    init_params(model, 31337);
    wake_head(model, 4242);
    (run == 0 ? a : b) = denoiser_predict<double>(model, mt, 123, nullptr);
  }
  REQUIRE(a.numel() == b.numel());
  CHECK(std::memcmp(a.v.data(), b.v.data(), a.numel() * sizeof(double)) == 0);
}

TEST_CASE("unconditional run ignores the condition object") {
  // A none-modality condition carrying stale payload must not reach the net:
  // the context it builds is empty and the prediction matches the bare run.
  auto model = build_denoiser<double>(tiny_hyper(Modality::kNone));
  init_params(model, 5);
  wake_head(model, 55);
  const auto mt = randn(16, 6, 91);

  ConditionInput cond;
  cond.modality = Modality::kNone;
  cond.mel = randn(12, 5, 92);      // garbage payload, must be ignored
  cond.tokens = {1, 2, 3};

  Graph<double> g;
  auto pr = insert_params(g, model, false);
  auto ctx = build_context(g, model, pr, cond);
  CHECK_FALSE(ctx.valid());
  const auto with_cond = g.val(denoiser_forward(g, model, pr, mt, 9, ctx));
  const auto bare = denoiser_predict<double>(model, mt, 9, nullptr);
  REQUIRE(with_cond.numel() == bare.numel());
  CHECK(std::memcmp(with_cond.v.data(), bare.v.data(), bare.numel() * sizeof(double)) == 0);
}

TEST_CASE("context rows change the conditional prediction") {
  auto model = build_denoiser<double>(tiny_hyper(Modality::kAudio));
  init_params(model, 6);
  wake_head(model, 66);
  const auto mt = randn(16, 6, 101);
  const auto ctx_a = randn(3, 4, 102);
  const auto ctx_b = randn(3, 4, 103);
  const auto out_a = denoiser_predict(model, mt, 40, &ctx_a);
  const auto out_b = denoiser_predict(model, mt, 40, &ctx_b);
  double diff = 0.0;
  for (size_t i = 0; i < out_a.numel(); ++i) diff = std::max(diff, std::abs(out_a.v[i] - out_b.v[i]));
  CHECK(diff > 1e-8);
}

TEST_CASE("forward rejects invalid inputs") {
  auto uncond = build_denoiser<double>(tiny_hyper(Modality::kNone));
  init_params(uncond, 1);
  auto cond = build_denoiser<double>(tiny_hyper(Modality::kAudio));
  init_params(cond, 2);
  const auto mt = randn(16, 6, 111);
  const auto ctx = randn(3, 4, 112);
  const auto wide_ctx = randn(3, 5, 113);

  CHECK_THROWS_AS(denoiser_predict(uncond, mt, 0, &ctx), ParameterError);
  CHECK_THROWS_AS(denoiser_predict(cond, mt, 0, &wide_ctx), DimensionError);
  CHECK_THROWS_AS(denoiser_predict<double>(uncond, randn(16, 9, 114), 0, nullptr), DimensionError);
  CHECK_THROWS_AS(denoiser_predict<double>(uncond, Tensor<double>(0, 6), 0, nullptr), DimensionError);
}

TEST_CASE("hyperparameter validation rejects bad geometry") {
  auto h = tiny_hyper(Modality::kNone);
  h.attn_dim = 5;
  h.heads = 2;
  CHECK_THROWS_AS(build_denoiser<double>(h), ParameterError);
  h = tiny_hyper(Modality::kNone);
  h.time_sin_dim = 3;
  CHECK_THROWS_AS(build_denoiser<double>(h), ParameterError);
  h = tiny_hyper(Modality::kNone);
  h.input_channels = 7;
  CHECK_THROWS_AS(build_denoiser<double>(h), ParameterError);
  h = tiny_hyper(Modality::kText);
  h.vocab_size = 1;
  CHECK_THROWS_AS(build_denoiser<double>(h), ParameterError);
}

TEST_CASE("analytic gradients match finite differences on a tiny model") {
  DenoiserHyper h = tiny_hyper(Modality::kAudio);
  h.base_channels = 2;
  h.channel_mults = {1, 1, 1};
  h.heads = 2;
  h.attn_dim = 2;
  h.ctx_dim = 3;
  h.mel_bands = 4;
  auto model = build_denoiser<double>(h);
  REQUIRE(model.params.total_params() <= 2000);
  init_params(model, 2024);
  wake_head(model, 777);

  const auto mt = randn(16, 6, 121);
  const auto target = randn(16, 6, 122);
  const auto mel = randn(5, 4, 123);
  const int t = 250;

  const auto loss_of = [&](Graph<double>& g, const ParamRefs<double>& pr) {
    auto ctx = audio_context(g, h, pr, mel);
    auto out = denoiser_forward(g, model, pr, mt, t, ctx);
    auto d = g.sub(out, g.constant(target));
    return g.mean_all(g.mul(d, d));
  };

  Graph<double> g;
  auto pr = insert_params(g, model, true);
  auto loss = loss_of(g, pr);
  REQUIRE(std::isfinite(g.val(loss).at(0, 0)));
  g.backward(loss);

  const double fd_h = 1e-5;
  size_t total = 0, ok = 0;
  for (const auto& e : model.params.entries) {
    const auto analytic = g.grad(pr.at(e.name));
    Tensor<double>& theta = model.params[e.name];
    for (size_t i = 0; i < theta.numel(); ++i) {
      const double keep = theta.v[i];
      double up, dn;
      {
        theta.v[i] = keep + fd_h;
        Graph<double> g2;
        auto pr2 = insert_params(g2, model, false);
        up = g2.val(loss_of(g2, pr2)).at(0, 0);
      }
      {
        theta.v[i] = keep - fd_h;
        Graph<double> g2;
        auto pr2 = insert_params(g2, model, false);
        dn = g2.val(loss_of(g2, pr2)).at(0, 0);
      }
      theta.v[i] = keep;
      const double numeric = (up - dn) / (2.0 * fd_h);
      const double got = analytic.v[i];
      const double rel = std::abs(numeric - got) / std::max({1.0, std::abs(numeric), std::abs(got)});
      ++total;
      if (rel < 1e-4) ++ok;
    }
  }
  REQUIRE(total == model.params.total_params());
  // At least 99 percent of parameters within 1e-4 relative error.
  CHECK(double(ok) >= 0.99 * double(total));
}

TEST_CASE("text context produces well-shaped rows and checks token ids") {
  DenoiserHyper h = tiny_hyper(Modality::kText);
  auto model = build_denoiser<double>(h);
  init_params(model, 77);

  Graph<double> g;
  auto pr = insert_params(g, model, false);
  auto ctx = text_context(g, h, pr, {2, 5, 1});
  CHECK(g.val(ctx).rows == 3);
  CHECK(g.val(ctx).cols == h.ctx_dim);
  CHECK(all_finite(g.val(ctx)));

  // Empty prompts fall back to a single pad token.
  auto empty_ctx = text_context(g, h, pr, {});
  CHECK(g.val(empty_ctx).rows == 1);
  CHECK_THROWS_AS(text_context(g, h, pr, {h.vocab_size}), ParameterError);
  CHECK_THROWS_AS(text_context(g, h, pr, {-1}), ParameterError);
}
