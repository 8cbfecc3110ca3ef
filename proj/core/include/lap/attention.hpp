#pragma once

#include <string>
#include <vector>

#include "lap/gradcheck.hpp"
#include "lap/rng.hpp"
#include "lap/tensor.hpp"

namespace lap {

// Query parametrization of an attention head: a single learned query vector
// (one attention distribution per head, over words) or a full query matrix
// (one distribution per word, as in ordinary self-attention).
enum class QueryMode { kVector, kMatrix };

// How per-head outputs are combined: concatenated slices that stay
// head-identifiable, or mixed through a shared projection matrix.
enum class CombineMode { kConcat, kProject };

const char* to_string(QueryMode m);
const char* to_string(CombineMode m);

struct LabelAttentionConfig {
  size_t num_heads = 0;  // 0 means: one head per constituency label, resolved at model build
  size_t d_model = 0;
  size_t d_qk = 128;
  size_t d_v = 128;
  size_t d_out = 128;
  size_t pfl_hidden = 0;  // 0 means 2 * output_width()
  bool use_pfl = true;
  double residual_dropout_p = 0.0;
  QueryMode query_mode = QueryMode::kVector;
  CombineMode combine_mode = CombineMode::kConcat;

  size_t output_width() const { return num_heads * d_out; }
  size_t pfl_width() const { return pfl_hidden ? pfl_hidden : 2 * output_width(); }
  void validate() const;
};

// Shared position-wise feed-forward sublayer with its residual layer norm.
struct FeedForwardParams {
  Tensor w1, b1, w2, b2;
  Tensor ln_gain, ln_bias;

  static FeedForwardParams init(size_t width, size_t hidden, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  size_t parameter_count() const;
};

struct LabelAttentionHeadParams {
  Tensor query_vec;  // [d_qk], query_mode == kVector
  Tensor query_mat;  // [d_qk x d_model], query_mode == kMatrix
  Tensor key_w;      // [d_qk x d_model]
  Tensor value_w;    // [d_v x d_model]
  Tensor out_w;      // [d_out x d_v]
  Tensor ln_gain, ln_bias;  // [d_out]
};

struct LabelAttentionParams {
  std::vector<LabelAttentionHeadParams> heads;
  Tensor projection;      // [width x width], combine_mode == kProject
  FeedForwardParams pfl;  // use_pfl only

  static LabelAttentionParams init(const LabelAttentionConfig& config, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  size_t parameter_count() const;
};

struct AttentionOutput {
  Tensor word_reps;         // [n x output_width]
  Tensor head_attention;    // [H x n] with query vectors, [H x n x n] with query matrices
  Tensor per_head_outputs;  // [H x n x d_out]
};

// softmax((q . K) / sqrt(d)): one attention distribution over the n words.
Tensor lal_attention_weights(const Tensor& query_vec, const Tensor& keys, size_t d);

// K_i = Wk X and V_i = Wv X for one head.
std::pair<Tensor, Tensor> compute_keys_values(const Tensor& x, const Tensor& key_w, const Tensor& value_w);

// c_i = V_i a_i: attention-weighted mixture of value columns.
Tensor context_vector(const Tensor& attention, const Tensor& values);

// One label-attention head over X[d_model x n] -> [n x d_out] word matrix.
Tensor lal_head_forward(const Tensor& x, const LabelAttentionHeadParams& head,
                        const LabelAttentionConfig& config, Rng& rng, bool training,
                        Tensor* attention_out = nullptr);

AttentionOutput lal_forward(const Tensor& x, LabelAttentionParams& params,
                            const LabelAttentionConfig& config, Rng& rng, bool training);

struct SelfAttentionConfig {
  size_t num_heads = 0;
  size_t d_model = 0;
  size_t d_qk = 0;  // 0 means d_model / num_heads
  size_t d_v = 0;
  size_t pfl_hidden = 0;  // 0 means 2 * d_model
  double residual_dropout_p = 0.0;

  size_t qk_width() const { return d_qk ? d_qk : d_model / num_heads; }
  size_t v_width() const { return d_v ? d_v : d_model / num_heads; }
  size_t pfl_width() const { return pfl_hidden ? pfl_hidden : 2 * d_model; }
  void validate() const;
};

struct SelfAttentionHeadParams {
  Tensor query_w, key_w, value_w;  // [d_qk|d_v x d_model]
};

struct SelfAttentionParams {
  std::vector<SelfAttentionHeadParams> heads;
  Tensor out_proj;          // [d_model x H*d_v]
  Tensor ln_gain, ln_bias;  // [d_model]
  FeedForwardParams pfl;

  static SelfAttentionParams init(const SelfAttentionConfig& config, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

// Scaled dot-product multi-head self-attention with residual + layer norm +
// feed-forward sublayer. word_reps comes back as [n x d_model].
AttentionOutput self_attention_forward(const Tensor& x, SelfAttentionParams& params,
                                       const SelfAttentionConfig& config, Rng& rng, bool training);

// Position-wise feed-forward sublayer on row-major word reps [n x width]:
// LN(x + W2 relu(W1 x + b1) + b2).
Tensor feed_forward(const Tensor& word_rows, FeedForwardParams& pfl);

}  // namespace lap
