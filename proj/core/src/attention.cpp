#include "lap/attention.hpp"

#include <cmath>
#include <utility>

namespace lap {
namespace {

Tensor init_matrix(size_t rows, size_t cols, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(cols));
  return Tensor::random_uniform({rows, cols}, bound, rng, true);
}

Tensor init_vector(size_t n, size_t fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  return Tensor::random_uniform({n}, bound, rng, true);
}

}  // namespace

const char* to_string(QueryMode m) {
  return m == QueryMode::kVector ? "vector" : "matrix";
}

const char* to_string(CombineMode m) {
  return m == CombineMode::kConcat ? "concat" : "project";
}

void LabelAttentionConfig::validate() const {
  // num_heads == 0 is the unresolved one-head-per-label sentinel; building
  // parameters from it is rejected in LabelAttentionParams::init instead.
  if (d_model == 0 || d_qk == 0 || d_v == 0 || d_out == 0) {
    throw TensorError("label attention config has a zero dimension");
  }
}

void SelfAttentionConfig::validate() const {
  if (num_heads == 0 || d_model == 0) {
    throw TensorError("self attention config has a zero dimension");
  }
  if (qk_width() == 0 || v_width() == 0) {
    throw TensorError("self attention config: d_model smaller than num_heads");
  }
}

FeedForwardParams FeedForwardParams::init(size_t width, size_t hidden, Rng& rng) {
  FeedForwardParams p;
  p.w1 = init_matrix(hidden, width, rng);
  p.b1 = Tensor::zeros({hidden}, true);
  p.w2 = init_matrix(width, hidden, rng);
  p.b2 = Tensor::zeros({width}, true);
  p.ln_gain = Tensor::full({width}, 1.0, true);
  p.ln_bias = Tensor::zeros({width}, true);
  return p;
}

void FeedForwardParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b2", b2});
  out.push_back({prefix + ".ln_gain", ln_gain});
  out.push_back({prefix + ".ln_bias", ln_bias});
}

size_t FeedForwardParams::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + ln_gain.size() + ln_bias.size();
}

LabelAttentionParams LabelAttentionParams::init(const LabelAttentionConfig& config, Rng& rng) {
  config.validate();
  if (config.num_heads == 0) {
    throw TensorError("label attention params: head count still unresolved (num_heads = 0)");
  }
  LabelAttentionParams p;
  p.heads.reserve(config.num_heads);
  for (size_t h = 0; h < config.num_heads; ++h) {
    LabelAttentionHeadParams head;
    if (config.query_mode == QueryMode::kVector) {
      head.query_vec = init_vector(config.d_qk, config.d_qk, rng);
    } else {
      head.query_mat = init_matrix(config.d_qk, config.d_model, rng);
    }
    head.key_w = init_matrix(config.d_qk, config.d_model, rng);
    head.value_w = init_matrix(config.d_v, config.d_model, rng);
    head.out_w = init_matrix(config.d_out, config.d_v, rng);
    head.ln_gain = Tensor::full({config.d_out}, 1.0, true);
    head.ln_bias = Tensor::zeros({config.d_out}, true);
    p.heads.push_back(std::move(head));
  }
  if (config.combine_mode == CombineMode::kProject) {
    size_t w = config.output_width();
    p.projection = init_matrix(w, w, rng);
  }
  if (config.use_pfl) {
    p.pfl = FeedForwardParams::init(config.output_width(), config.pfl_width(), rng);
  }
  return p;
}

void LabelAttentionParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  for (size_t h = 0; h < heads.size(); ++h) {
    std::string hp = prefix + ".h" + std::to_string(h);
    LabelAttentionHeadParams& head = heads[h];
    if (head.query_vec.node_ptr()) out.push_back({hp + ".q", head.query_vec});
    if (head.query_mat.node_ptr()) out.push_back({hp + ".wq", head.query_mat});
    out.push_back({hp + ".wk", head.key_w});
    out.push_back({hp + ".wv", head.value_w});
    out.push_back({hp + ".wo", head.out_w});
    out.push_back({hp + ".ln_gain", head.ln_gain});
    out.push_back({hp + ".ln_bias", head.ln_bias});
  }
  if (projection.node_ptr()) out.push_back({prefix + ".proj", projection});
  if (pfl.w1.node_ptr()) pfl.collect(prefix + ".pfl", out);
}

size_t LabelAttentionParams::parameter_count() const {
  size_t total = 0;
  for (const LabelAttentionHeadParams& head : heads) {
    if (head.query_vec.node_ptr()) total += head.query_vec.size();
    if (head.query_mat.node_ptr()) total += head.query_mat.size();
    total += head.key_w.size() + head.value_w.size() + head.out_w.size();
    total += head.ln_gain.size() + head.ln_bias.size();
  }
  if (projection.node_ptr()) total += projection.size();
  if (pfl.w1.node_ptr()) total += pfl.parameter_count();
  return total;
}

Tensor lal_attention_weights(const Tensor& query_vec, const Tensor& keys, size_t d) {
  if (query_vec.rank() != 1 || keys.rank() != 2 || keys.dim(0) != query_vec.dim(0)) {
    throw TensorError("attention weights: query " + shape_str(query_vec.shape()) +
                      " does not match keys " + shape_str(keys.shape()));
  }
  if (d != query_vec.dim(0)) {
    throw TensorError("attention weights: scale dimension mismatch");
  }
  Tensor scores = matmul(reshape(query_vec, {1, d}), keys);
  scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(d)));
  return reshape(softmax(scores, 1), {keys.dim(1)});
}

std::pair<Tensor, Tensor> compute_keys_values(const Tensor& x, const Tensor& key_w,
                                              const Tensor& value_w) {
  return {matmul(key_w, x), matmul(value_w, x)};
}

Tensor context_vector(const Tensor& attention, const Tensor& values) {
  if (attention.rank() != 1 || values.rank() != 2 || values.dim(1) != attention.dim(0)) {
    throw TensorError("context vector: attention " + shape_str(attention.shape()) +
                      " does not match values " + shape_str(values.shape()));
  }
  return reshape(matmul(values, reshape(attention, {attention.dim(0), 1})), {values.dim(0)});
}

Tensor lal_head_forward(const Tensor& x, const LabelAttentionHeadParams& head,
                        const LabelAttentionConfig& config, Rng& rng, bool training,
                        Tensor* attention_out) {
  if (x.rank() != 2 || x.dim(0) != config.d_model) {
    throw TensorError("label attention head: input " + shape_str(x.shape()) +
                      " does not match d_model " + std::to_string(config.d_model));
  }
  auto [keys, values] = compute_keys_values(x, head.key_w, head.value_w);
  Tensor residual;
  if (config.query_mode == QueryMode::kVector) {
    Tensor attn = lal_attention_weights(head.query_vec, keys, config.d_qk);
    if (attention_out) *attention_out = attn;
    Tensor ctx = context_vector(attn, values);
    ctx = dropout(ctx, config.residual_dropout_p, rng, training);
    residual = add_colvec(values, ctx);
  } else {
    Tensor queries = matmul(head.query_mat, x);
    Tensor scores = matmul(transpose(queries), keys);
    scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(config.d_qk)));
    Tensor attn = softmax(scores, 1);
    if (attention_out) *attention_out = attn;
    Tensor ctx = matmul(values, transpose(attn));
    ctx = dropout(ctx, config.residual_dropout_p, rng, training);
    residual = add(values, ctx);
  }
  Tensor projected = matmul(head.out_w, residual);
  return layer_norm(transpose(projected), head.ln_gain, head.ln_bias);
}

Tensor feed_forward(const Tensor& word_rows, FeedForwardParams& pfl) {
  Tensor hidden = relu(add_rowvec(matmul(word_rows, transpose(pfl.w1)), pfl.b1));
  Tensor out = add_rowvec(matmul(hidden, transpose(pfl.w2)), pfl.b2);
  return layer_norm(add(word_rows, out), pfl.ln_gain, pfl.ln_bias);
}

AttentionOutput lal_forward(const Tensor& x, LabelAttentionParams& params,
                            const LabelAttentionConfig& config, Rng& rng, bool training) {
  config.validate();
  if (params.heads.size() != config.num_heads) {
    throw TensorError("label attention: expected " + std::to_string(config.num_heads) +
                      " heads, have " + std::to_string(params.heads.size()));
  }
  size_t n = x.dim(1);
  std::vector<Tensor> head_rows, attn_slices, out_slices;
  head_rows.reserve(config.num_heads);
  for (size_t h = 0; h < config.num_heads; ++h) {
    Tensor attn;
    Tensor rows = lal_head_forward(x, params.heads[h], config, rng, training, &attn);
    if (config.query_mode == QueryMode::kVector) {
      attn_slices.push_back(reshape(attn, {1, n}));
    } else {
      attn_slices.push_back(reshape(attn, {1, n, n}));
    }
    out_slices.push_back(reshape(rows, {1, n, config.d_out}));
    head_rows.push_back(std::move(rows));
  }

  AttentionOutput out;
  out.word_reps = concat(head_rows, 1);
  if (config.combine_mode == CombineMode::kProject) {
    out.word_reps = matmul(out.word_reps, transpose(params.projection));
  }
  if (config.use_pfl) {
    out.word_reps = feed_forward(out.word_reps, params.pfl);
  }
  out.head_attention = concat(attn_slices, 0);
  out.per_head_outputs = concat(out_slices, 0);
  return out;
}

SelfAttentionParams SelfAttentionParams::init(const SelfAttentionConfig& config, Rng& rng) {
  config.validate();
  SelfAttentionParams p;
  p.heads.reserve(config.num_heads);
  for (size_t h = 0; h < config.num_heads; ++h) {
    SelfAttentionHeadParams head;
    head.query_w = init_matrix(config.qk_width(), config.d_model, rng);
    head.key_w = init_matrix(config.qk_width(), config.d_model, rng);
    head.value_w = init_matrix(config.v_width(), config.d_model, rng);
    p.heads.push_back(std::move(head));
  }
  p.out_proj = init_matrix(config.d_model, config.num_heads * config.v_width(), rng);
  p.ln_gain = Tensor::full({config.d_model}, 1.0, true);
  p.ln_bias = Tensor::zeros({config.d_model}, true);
  p.pfl = FeedForwardParams::init(config.d_model, config.pfl_width(), rng);
  return p;
}

void SelfAttentionParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  for (size_t h = 0; h < heads.size(); ++h) {
    std::string hp = prefix + ".h" + std::to_string(h);
    out.push_back({hp + ".wq", heads[h].query_w});
    out.push_back({hp + ".wk", heads[h].key_w});
    out.push_back({hp + ".wv", heads[h].value_w});
  }
  out.push_back({prefix + ".wo", out_proj});
  out.push_back({prefix + ".ln_gain", ln_gain});
  out.push_back({prefix + ".ln_bias", ln_bias});
  pfl.collect(prefix + ".pfl", out);
}

AttentionOutput self_attention_forward(const Tensor& x, SelfAttentionParams& params,
                                       const SelfAttentionConfig& config, Rng& rng,
                                       bool training) {
  config.validate();
  if (x.rank() != 2 || x.dim(0) != config.d_model) {
    throw TensorError("self attention: input " + shape_str(x.shape()) +
                      " does not match d_model " + std::to_string(config.d_model));
  }
  size_t n = x.dim(1);
  double scale = 1.0 / std::sqrt(static_cast<double>(config.qk_width()));

  std::vector<Tensor> contexts, attn_slices, out_slices;
  contexts.reserve(config.num_heads);
  for (const SelfAttentionHeadParams& head : params.heads) {
    Tensor queries = matmul(head.query_w, x);
    Tensor keys = matmul(head.key_w, x);
    Tensor values = matmul(head.value_w, x);
    Tensor attn = softmax(mul_scalar(matmul(transpose(queries), keys), scale), 1);
    Tensor ctx = matmul(values, transpose(attn));
    attn_slices.push_back(reshape(attn, {1, n, n}));
    out_slices.push_back(reshape(transpose(ctx), {1, n, config.v_width()}));
    contexts.push_back(std::move(ctx));
  }

  Tensor mixed = matmul(params.out_proj, concat(contexts, 0));
  mixed = dropout(mixed, config.residual_dropout_p, rng, training);
  Tensor rows = layer_norm(transpose(add(x, mixed)), params.ln_gain, params.ln_bias);

  AttentionOutput out;
  out.word_reps = feed_forward(rows, params.pfl);
  out.head_attention = concat(attn_slices, 0);
  out.per_head_outputs = concat(out_slices, 0);
  return out;
}

}  // namespace lap
