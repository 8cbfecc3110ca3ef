#include <cmath>
#include <utility>
#include <vector>

#include <doctest.h>

#include "lap/attention.hpp"
#include "lap/gradcheck.hpp"
#include "lap/rng.hpp"
#include "lap/tensor.hpp"

using namespace lap;

namespace {

std::vector<double> rand_values(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor rand_leaf(std::vector<size_t> shape, Rng& rng, bool grad = false) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return Tensor::leaf(std::move(shape), rand_values(n, rng), grad);
}

using Mat = std::vector<std::vector<double>>;

Mat from_tensor(const Tensor& t) {
  REQUIRE(t.rank() == 2);
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (size_t i = 0; i < t.dim(0); ++i)
    for (size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i * t.dim(1) + j);
  return m;
}

Mat matmul_ref(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b[0].size(); ++j)
      for (size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

std::vector<double> softmax_ref(const std::vector<double>& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  std::vector<double> e(s.size());
  double total = 0.0;
  for (size_t i = 0; i < s.size(); ++i) total += e[i] = std::exp(s[i] - mx);
  for (double& v : e) v /= total;
  return e;
}

std::vector<double> layer_norm_ref(const std::vector<double>& x, const std::vector<double>& gain,
                                   const std::vector<double>& bias, double eps = 1e-6) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * (x[i] - mu) * inv + bias[i];
  return out;
}

// Plain-loop reference for one self-attention layer, kept independent of the
// tensor ops so both sides can disagree.
Mat self_attention_ref(const Tensor& x, SelfAttentionParams& params,
                       const SelfAttentionConfig& config) {
  Mat X = from_tensor(x);
  size_t n = X[0].size();
  double scale = 1.0 / std::sqrt(static_cast<double>(config.qk_width()));

  Mat combined;
  for (auto& head : params.heads) {
    Mat Q = matmul_ref(from_tensor(head.query_w), X);
    Mat K = matmul_ref(from_tensor(head.key_w), X);
    Mat V = matmul_ref(from_tensor(head.value_w), X);
    Mat attn(n, std::vector<double>(n));
    for (size_t j = 0; j < n; ++j) {
      std::vector<double> s(n, 0.0);
      for (size_t k = 0; k < n; ++k)
        for (size_t r = 0; r < Q.size(); ++r) s[k] += Q[r][j] * K[r][k];
      for (double& v : s) v *= scale;
      attn[j] = softmax_ref(s);
    }
    for (size_t r = 0; r < V.size(); ++r) {
      std::vector<double> row(n, 0.0);
      for (size_t j = 0; j < n; ++j)
        for (size_t k = 0; k < n; ++k) row[j] += attn[j][k] * V[r][k];
      combined.push_back(std::move(row));
    }
  }

  Mat mixed = matmul_ref(from_tensor(params.out_proj), combined);
  const auto& g1 = params.ln_gain.values();
  const auto& b1 = params.ln_bias.values();
  Mat W1 = from_tensor(params.pfl.w1);
  Mat W2 = from_tensor(params.pfl.w2);
  const auto& fb1 = params.pfl.b1.values();
  const auto& fb2 = params.pfl.b2.values();
  const auto& g2 = params.pfl.ln_gain.values();
  const auto& b2 = params.pfl.ln_bias.values();

  Mat rows(n);
  for (size_t j = 0; j < n; ++j) {
    std::vector<double> y(X.size());
    for (size_t r = 0; r < X.size(); ++r) y[r] = X[r][j] + mixed[r][j];
    std::vector<double> normed = layer_norm_ref(y, g1, b1);
    std::vector<double> hidden(W1.size());
    for (size_t r = 0; r < W1.size(); ++r) {
      double acc = fb1[r];
      for (size_t c = 0; c < normed.size(); ++c) acc += W1[r][c] * normed[c];
      hidden[r] = std::max(0.0, acc);
    }
    std::vector<double> z = normed;
    for (size_t r = 0; r < W2.size(); ++r) {
      double acc = fb2[r];
      for (size_t c = 0; c < hidden.size(); ++c) acc += W2[r][c] * hidden[c];
      z[r] += acc;
    }
    rows[j] = layer_norm_ref(z, g2, b2);
  }
  return rows;
}

LabelAttentionConfig tiny_config(QueryMode q, CombineMode c, bool pfl) {
  LabelAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 4;
  cfg.d_qk = 3;
  cfg.d_v = 3;
  cfg.d_out = 3;
  cfg.use_pfl = pfl;
  cfg.query_mode = q;
  cfg.combine_mode = c;
  return cfg;
}

}  // namespace

TEST_CASE("attention weights: zero query gives uniform distribution") {
  Rng rng(11);
  Tensor q = Tensor::zeros({3});
  Tensor keys = rand_leaf({3, 4}, rng);
  Tensor a = lal_attention_weights(q, keys, 3);
  REQUIRE(a.shape() == std::vector<size_t>{4});
  for (size_t i = 0; i < 4; ++i) CHECK(a.at(i) == doctest::Approx(0.25).epsilon(1e-15));

  Tensor keys3 = rand_leaf({3, 3}, rng);
  Tensor a3 = lal_attention_weights(q, keys3, 3);
  for (size_t i = 0; i < 3; ++i) CHECK(a3.at(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("attention weights: single word gets full mass") {
  Tensor q = Tensor::leaf({2}, {0.3, -1.4});
  Tensor keys = Tensor::leaf({2, 1}, {5.0, -2.0});
  Tensor a = lal_attention_weights(q, keys, 2);
  REQUIRE(a.size() == 1);
  CHECK(a.at(0) == 1.0);
}

TEST_CASE("attention weights: two keys against scalar softmax") {
  Tensor q = Tensor::leaf({2}, {1.0, 0.0});
  Tensor keys = Tensor::leaf({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor a = lal_attention_weights(q, keys, 2);

  double s0 = 1.0 / std::sqrt(2.0), s1 = 0.0;
  double e0 = std::exp(s0), e1 = std::exp(s1);
  CHECK(a.at(0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(a.at(1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
  CHECK(a.at(0) + a.at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention weights: shape mismatches throw") {
  Tensor q = Tensor::leaf({3}, {1, 2, 3});
  Tensor keys = Tensor::leaf({2, 4}, std::vector<double>(8, 0.0));
  CHECK_THROWS_AS(lal_attention_weights(q, keys, 3), TensorError);
  Tensor keys_ok = Tensor::leaf({3, 4}, std::vector<double>(12, 0.0));
  CHECK_THROWS_AS(lal_attention_weights(q, keys_ok, 4), TensorError);
}

TEST_CASE("keys and values: identity projection returns the input") {
  Rng rng(3);
  Tensor x = rand_leaf({3, 5}, rng);
  Tensor eye = Tensor::leaf({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto [keys, values] = compute_keys_values(x, eye, eye);
  CHECK(keys.values() == x.values());
  CHECK(values.values() == x.values());
}

TEST_CASE("keys and values: naive matmul oracle") {
  Rng rng(17);
  Tensor x = rand_leaf({4, 5}, rng);
  Tensor wk = rand_leaf({3, 4}, rng);
  Tensor wv = rand_leaf({2, 4}, rng);
  auto [keys, values] = compute_keys_values(x, wk, wv);

  Mat K = matmul_ref(from_tensor(wk), from_tensor(x));
  Mat V = matmul_ref(from_tensor(wv), from_tensor(x));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 5; ++j)
      CHECK(keys.at(i * 5 + j) == doctest::Approx(K[i][j]).epsilon(1e-12));
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 5; ++j)
      CHECK(values.at(i * 5 + j) == doctest::Approx(V[i][j]).epsilon(1e-12));
}

TEST_CASE("context vector: one-hot attention picks one column") {
  Rng rng(5);
  Tensor values = rand_leaf({3, 4}, rng);
  Tensor attn = Tensor::leaf({4}, {0.0, 0.0, 1.0, 0.0});
  Tensor ctx = context_vector(attn, values);
  for (size_t r = 0; r < 3; ++r) CHECK(ctx.at(r) == values.at(r * 4 + 2));
}

TEST_CASE("context vector: identical columns make attention irrelevant") {
  Tensor values = Tensor::leaf({2, 3}, {7.0, 7.0, 7.0, -1.5, -1.5, -1.5});
  Tensor a1 = Tensor::leaf({3}, {1.0, 0.0, 0.0});
  Tensor a2 = Tensor::leaf({3}, {0.2, 0.3, 0.5});
  Tensor c1 = context_vector(a1, values);
  Tensor c2 = context_vector(a2, values);
  for (size_t r = 0; r < 2; ++r) CHECK(c1.at(r) == doctest::Approx(c2.at(r)).epsilon(1e-12));
  CHECK(c1.at(0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(c1.at(1) == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("context vector: weighted sum oracle") {
  Rng rng(29);
  Tensor values = rand_leaf({4, 3}, rng);
  std::vector<double> raw = {0.5, 0.25, 0.25};
  Tensor attn = Tensor::leaf({3}, raw);
  Tensor ctx = context_vector(attn, values);
  for (size_t r = 0; r < 4; ++r) {
    double want = 0.0;
    for (size_t j = 0; j < 3; ++j) want += raw[j] * values.at(r * 3 + j);
    CHECK(ctx.at(r) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("head forward: shape and standardized rows") {
  Rng rng(41);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, false);
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 5}, rng);
  Tensor out = lal_head_forward(x, params.heads[0], cfg, rng, false);
  REQUIRE(out.shape() == std::vector<size_t>{5, 3});
  for (size_t j = 0; j < 5; ++j) {
    double mu = 0.0, var = 0.0;
    for (size_t k = 0; k < 3; ++k) mu += out.at(j * 3 + k);
    mu /= 3.0;
    for (size_t k = 0; k < 3; ++k) {
      double d = out.at(j * 3 + k) - mu;
      var += d * d;
    }
    var /= 3.0;
    CHECK(std::abs(mu) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("head forward: zero query adds the mean value column") {
  LabelAttentionConfig cfg;
  cfg.num_heads = 1;
  cfg.d_model = cfg.d_qk = cfg.d_v = cfg.d_out = 3;
  cfg.use_pfl = false;
  Rng rng(1);

  LabelAttentionHeadParams head;
  head.query_vec = Tensor::zeros({3});
  head.key_w = rand_leaf({3, 3}, rng);
  std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  head.value_w = Tensor::leaf({3, 3}, eye);
  head.out_w = Tensor::leaf({3, 3}, eye);
  head.ln_gain = Tensor::full({3}, 1.0);
  head.ln_bias = Tensor::zeros({3});

  Tensor x = Tensor::leaf({3, 2}, {1.0, -2.0, 0.5, 3.0, -1.0, 0.25});
  Tensor out = lal_head_forward(x, head, cfg, rng, false);

  std::vector<double> ones(3, 1.0), zeros(3, 0.0);
  for (size_t j = 0; j < 2; ++j) {
    std::vector<double> y(3);
    for (size_t r = 0; r < 3; ++r) {
      double mean = (x.at(r * 2) + x.at(r * 2 + 1)) / 2.0;
      y[r] = x.at(r * 2 + j) + mean;
    }
    std::vector<double> want = layer_norm_ref(y, ones, zeros);
    for (size_t r = 0; r < 3; ++r)
      CHECK(out.at(j * 3 + r) == doctest::Approx(want[r]).epsilon(1e-12));
  }
}

TEST_CASE("head forward: query matrix gives per-word distributions") {
  Rng rng(23);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kMatrix, CombineMode::kConcat, false);
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);
  Tensor attn;
  Tensor out = lal_head_forward(x, params.heads[0], cfg, rng, false, &attn);
  REQUIRE(out.shape() == std::vector<size_t>{3, 3});
  REQUIRE(attn.shape() == std::vector<size_t>{3, 3});

  Mat Q = matmul_ref(from_tensor(params.heads[0].query_mat), from_tensor(x));
  Mat K = matmul_ref(from_tensor(params.heads[0].key_w), from_tensor(x));
  double scale = 1.0 / std::sqrt(3.0);
  for (size_t j = 0; j < 3; ++j) {
    std::vector<double> s(3, 0.0);
    for (size_t k = 0; k < 3; ++k)
      for (size_t r = 0; r < 3; ++r) s[k] += Q[r][j] * K[r][k];
    for (double& v : s) v *= scale;
    std::vector<double> want = softmax_ref(s);
    double total = 0.0;
    for (size_t k = 0; k < 3; ++k) {
      CHECK(attn.at(j * 3 + k) == doctest::Approx(want[k]).epsilon(1e-12));
      total += attn.at(j * 3 + k);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("label attention layer: shapes across the ablation grid") {
  for (QueryMode q : {QueryMode::kVector, QueryMode::kMatrix}) {
    for (CombineMode c : {CombineMode::kConcat, CombineMode::kProject}) {
      CAPTURE(to_string(q));
      CAPTURE(to_string(c));
      Rng rng(7);
      LabelAttentionConfig cfg = tiny_config(q, c, true);
      LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
      Tensor x = rand_leaf({4, 3}, rng);
      AttentionOutput out = lal_forward(x, params, cfg, rng, false);

      CHECK(out.word_reps.shape() == std::vector<size_t>{3, 6});
      if (q == QueryMode::kVector) {
        CHECK(out.head_attention.shape() == std::vector<size_t>{2, 3});
      } else {
        CHECK(out.head_attention.shape() == std::vector<size_t>{2, 3, 3});
      }
      CHECK(out.per_head_outputs.shape() == std::vector<size_t>{2, 3, 3});
    }
  }
}

TEST_CASE("label attention layer: concat keeps head slices identifiable") {
  Rng rng(13);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, false);
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);
  AttentionOutput out = lal_forward(x, params, cfg, rng, false);

  for (size_t h = 0; h < 2; ++h) {
    Tensor sl = slice(out.word_reps, 1, h * 3, (h + 1) * 3);
    Tensor per = slice(out.per_head_outputs, 0, h, h + 1);
    CHECK(sl.values() == reshape(per, {3, 3}).values());
  }
}

TEST_CASE("label attention layer: value weights only touch their own head") {
  Rng rng(19);
  LabelAttentionConfig cfg;
  cfg.num_heads = 3;
  cfg.d_model = 4;
  cfg.d_qk = cfg.d_v = cfg.d_out = 3;
  cfg.use_pfl = false;
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);

  Rng r1(1), r2(1);
  AttentionOutput before = lal_forward(x, params, cfg, r1, false);
  params.heads[1].value_w.values_mut()[0] += 0.5;
  AttentionOutput after = lal_forward(x, params, cfg, r2, false);

  auto head_slice = [](const AttentionOutput& o, size_t h) {
    return slice(o.word_reps, 1, h * 3, (h + 1) * 3).values();
  };
  CHECK(head_slice(before, 0) == head_slice(after, 0));
  CHECK(head_slice(before, 2) == head_slice(after, 2));
  CHECK(head_slice(before, 1) != head_slice(after, 1));
}

TEST_CASE("label attention layer: single head concat equals the head output") {
  Rng rng(31);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, false);
  cfg.num_heads = 1;
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);
  Rng r1(1), r2(1);
  AttentionOutput out = lal_forward(x, params, cfg, r1, false);
  Tensor direct = lal_head_forward(x, params.heads[0], cfg, r2, false);
  CHECK(out.word_reps.values() == direct.values());
}

TEST_CASE("parameter count: hand count on a tiny config") {
  Rng rng(2);
  LabelAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 3;
  cfg.d_qk = cfg.d_v = cfg.d_out = 2;
  cfg.use_pfl = false;

  // per head: q 2 + wk 6 + wv 6 + wo 4 + ln 4 = 22
  LabelAttentionParams vec = LabelAttentionParams::init(cfg, rng);
  CHECK(vec.parameter_count() == 44);

  cfg.combine_mode = CombineMode::kProject;
  LabelAttentionParams proj = LabelAttentionParams::init(cfg, rng);
  CHECK(proj.parameter_count() == 44 + 16);

  cfg.combine_mode = CombineMode::kConcat;
  cfg.use_pfl = true;  // width 4, hidden 8: 32 + 8 + 32 + 4 + 4 + 4 = 84
  LabelAttentionParams with_pfl = LabelAttentionParams::init(cfg, rng);
  CHECK(with_pfl.parameter_count() == 44 + 84);

  std::vector<NamedParam> named;
  with_pfl.collect("lal", named);
  size_t total = 0;
  for (auto& p : named) total += p.tensor.size();
  CHECK(total == with_pfl.parameter_count());
}

TEST_CASE("config: unresolved head count validates but cannot build params") {
  LabelAttentionConfig cfg;
  cfg.num_heads = 0;  // one head per constituency label, resolved at model build
  cfg.d_model = 4;
  cfg.d_qk = cfg.d_v = cfg.d_out = 2;
  CHECK_NOTHROW(cfg.validate());

  Rng rng(1);
  CHECK_THROWS_WITH_AS(LabelAttentionParams::init(cfg, rng),
                       "label attention params: head count still unresolved (num_heads = 0)",
                       TensorError);

  cfg.d_qk = 0;
  CHECK_THROWS_AS(cfg.validate(), TensorError);
}

TEST_CASE("parameter count: query matrices cost H * d_qk * (d_model - 1) extra") {
  Rng rng(3);
  for (CombineMode c : {CombineMode::kConcat, CombineMode::kProject}) {
    LabelAttentionConfig cfg;
    cfg.num_heads = 3;
    cfg.d_model = 5;
    cfg.d_qk = 4;
    cfg.d_v = 3;
    cfg.d_out = 2;
    cfg.combine_mode = c;

    cfg.query_mode = QueryMode::kVector;
    size_t vec_count = LabelAttentionParams::init(cfg, rng).parameter_count();
    cfg.query_mode = QueryMode::kMatrix;
    size_t mat_count = LabelAttentionParams::init(cfg, rng).parameter_count();
    CHECK(mat_count - vec_count == cfg.num_heads * cfg.d_qk * (cfg.d_model - 1));
  }
}

TEST_CASE("dropout on the context vector") {
  Rng rng(53);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, false);
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);

  SUBCASE("inference mode ignores the rate") {
    cfg.residual_dropout_p = 0.9;
    Rng r1(1);
    AttentionOutput dropped = lal_forward(x, params, cfg, r1, false);
    cfg.residual_dropout_p = 0.0;
    Rng r2(2);
    AttentionOutput plain = lal_forward(x, params, cfg, r2, false);
    CHECK(dropped.word_reps.values() == plain.word_reps.values());
  }

  SUBCASE("training draws a seeded mask") {
    cfg.residual_dropout_p = 0.5;
    Rng r1(9), r2(9), r3(10);
    AttentionOutput a = lal_forward(x, params, cfg, r1, true);
    AttentionOutput b = lal_forward(x, params, cfg, r2, true);
    AttentionOutput c = lal_forward(x, params, cfg, r3, true);
    CHECK(a.word_reps.values() == b.word_reps.values());
    CHECK(a.word_reps.values() != c.word_reps.values());
  }
}

TEST_CASE("self attention: three words against the plain-loop reference") {
  Rng rng(61);
  SelfAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 4;
  cfg.d_qk = 2;
  cfg.d_v = 2;
  cfg.pfl_hidden = 6;
  SelfAttentionParams params = SelfAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng);

  Rng fwd(1);
  AttentionOutput out = self_attention_forward(x, params, cfg, fwd, false);
  REQUIRE(out.word_reps.shape() == std::vector<size_t>{3, 4});
  REQUIRE(out.head_attention.shape() == std::vector<size_t>{2, 3, 3});

  Mat want = self_attention_ref(x, params, cfg);
  for (size_t j = 0; j < 3; ++j)
    for (size_t r = 0; r < 4; ++r)
      CHECK(out.word_reps.at(j * 4 + r) == doctest::Approx(want[j][r]).epsilon(1e-9));

  for (size_t h = 0; h < 2; ++h)
    for (size_t j = 0; j < 3; ++j) {
      double total = 0.0;
      for (size_t k = 0; k < 3; ++k) total += out.head_attention.at((h * 3 + j) * 3 + k);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("self attention: a single word attends to itself") {
  Rng rng(67);
  SelfAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 4;
  SelfAttentionParams params = SelfAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 1}, rng);
  Rng fwd(1);
  AttentionOutput out = self_attention_forward(x, params, cfg, fwd, false);
  REQUIRE(out.head_attention.shape() == std::vector<size_t>{2, 1, 1});
  CHECK(out.head_attention.at(0) == 1.0);
  CHECK(out.head_attention.at(1) == 1.0);
}

TEST_CASE("self attention: permutation equivariance") {
  Rng rng(71);
  SelfAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 4;
  SelfAttentionParams params = SelfAttentionParams::init(cfg, rng);

  Tensor x = rand_leaf({4, 3}, rng);
  std::vector<size_t> perm = {2, 0, 1};
  std::vector<double> px(4 * 3);
  for (size_t r = 0; r < 4; ++r)
    for (size_t j = 0; j < 3; ++j) px[r * 3 + j] = x.at(r * 3 + perm[j]);
  Tensor xp = Tensor::leaf({4, 3}, px);

  Rng r1(1), r2(1);
  AttentionOutput out = self_attention_forward(x, params, cfg, r1, false);
  AttentionOutput pout = self_attention_forward(xp, params, cfg, r2, false);
  for (size_t j = 0; j < 3; ++j)
    for (size_t r = 0; r < 4; ++r)
      CHECK(pout.word_reps.at(j * 4 + r) ==
            doctest::Approx(out.word_reps.at(perm[j] * 4 + r)).epsilon(1e-9));
}

TEST_CASE("gradients: attention weights") {
  Rng rng(83);
  Tensor q = rand_leaf({3}, rng, true);
  Tensor keys = rand_leaf({3, 4}, rng, true);
  Tensor w = rand_leaf({4}, rng);
  auto loss = [&] { return sum(mul(lal_attention_weights(q, keys, 3), w)); };
  auto report = check_gradients(loss, {{"q", q}, {"keys", keys}}, 1e-5, 1e-5);
  CHECK(report.ok());
  CHECK(report.checked == 15);
}

TEST_CASE("gradients: head forward, vector query") {
  Rng rng(89);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, false);
  cfg.num_heads = 1;
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng, true);
  Tensor w = rand_leaf({3, 3}, rng);

  Rng fwd(1);
  auto loss = [&] { return sum(mul(lal_head_forward(x, params.heads[0], cfg, fwd, false), w)); };
  std::vector<NamedParam> named;
  params.collect("lal", named);
  named.push_back({"x", x});
  auto report = check_gradients(loss, named, 1e-5, 1e-5);
  CHECK(report.ok());
  INFO("worst " << report.worst << " rel err " << report.max_rel_err);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("gradients: full layer, vector query with concat and feed forward") {
  Rng rng(97);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kVector, CombineMode::kConcat, true);
  cfg.num_heads = 3;
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 4}, rng, true);
  Tensor w = rand_leaf({4, 9}, rng);

  Rng fwd(1);
  auto loss = [&] { return sum(mul(lal_forward(x, params, cfg, fwd, false).word_reps, w)); };
  std::vector<NamedParam> named;
  params.collect("lal", named);
  named.push_back({"x", x});
  auto report = check_gradients(loss, named, 1e-5, 1e-4);
  CHECK(report.ok());
  INFO("worst " << report.worst << " rel err " << report.max_rel_err);

  size_t nonzero = 0;
  for (auto& p : named)
    if (p.tensor.has_grad())
      for (double g : p.tensor.grad())
        if (g != 0.0) ++nonzero;
  CHECK(nonzero > 0);
}

TEST_CASE("gradients: full layer, query matrix with shared projection") {
  Rng rng(101);
  LabelAttentionConfig cfg = tiny_config(QueryMode::kMatrix, CombineMode::kProject, true);
  LabelAttentionParams params = LabelAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng, true);
  Tensor w = rand_leaf({3, 6}, rng);

  Rng fwd(1);
  auto loss = [&] { return sum(mul(lal_forward(x, params, cfg, fwd, false).word_reps, w)); };
  std::vector<NamedParam> named;
  params.collect("lal", named);
  named.push_back({"x", x});
  auto report = check_gradients(loss, named, 1e-5, 1e-4);
  CHECK(report.ok());
}

TEST_CASE("gradients: self attention layer") {
  Rng rng(103);
  SelfAttentionConfig cfg;
  cfg.num_heads = 2;
  cfg.d_model = 4;
  cfg.pfl_hidden = 6;
  SelfAttentionParams params = SelfAttentionParams::init(cfg, rng);
  Tensor x = rand_leaf({4, 3}, rng, true);
  Tensor w = rand_leaf({3, 4}, rng);

  Rng fwd(1);
  auto loss = [&] { return sum(mul(self_attention_forward(x, params, cfg, fwd, false).word_reps, w)); };
  std::vector<NamedParam> named;
  params.collect("enc", named);
  named.push_back({"x", x});
  auto report = check_gradients(loss, named, 1e-5, 1e-4);
  CHECK(report.ok());
}
