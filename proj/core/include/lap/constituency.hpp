#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lap/errors.hpp"
#include "lap/gradcheck.hpp"
#include "lap/rng.hpp"
#include "lap/tensor.hpp"

namespace lap {

// Fencepost span (start, end) covering words start+1..end (1-indexed),
// carrying a constituency label id. Label 0 is the empty label.
struct LabeledSpan {
  size_t start = 0;
  size_t end = 0;
  size_t label = 0;

  friend bool operator==(const LabeledSpan& a, const LabeledSpan& b) {
    return a.start == b.start && a.end == b.end && a.label == b.label;
  }
  friend bool operator<(const LabeledSpan& a, const LabeledSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;  // outer spans first
    return a.label < b.label;
  }
};

// A constituency tree as its span set. Decoder outputs carry the full binary
// skeleton including empty-labeled spans; gold trees list labeled spans only.
struct ParseTree {
  size_t length = 0;
  std::vector<LabeledSpan> spans;

  void sort_spans();
  void validate() const;  // bounds, nesting, (0, length) present, unique (i, j)
  std::vector<LabeledSpan> labeled_spans() const;
  std::unordered_set<size_t> labeled_span_keys(size_t num_labels) const;
};

// Scores for every span and label. Entries for label 0 (empty) are fixed at
// 0. Charts built from scorer outputs (or one leaf tensor) stay
// differentiable via pick_score.
class SpanChart {
 public:
  SpanChart(size_t n, size_t num_labels);
  static SpanChart from_tensor(size_t n, size_t num_labels, const Tensor& scores);

  size_t length() const { return n_; }
  size_t num_labels() const { return num_labels_; }
  size_t key(size_t i, size_t j, size_t label) const {
    return (i * (n_ + 1) + j) * num_labels_ + label;
  }

  double value(size_t i, size_t j, size_t label) const;
  void set_value(size_t i, size_t j, size_t label, double v);
  void set_row(size_t i, size_t j, const Tensor& row);  // length num_labels-1, labels 1..
  Tensor pick_score(size_t i, size_t j, size_t label) const;
  bool differentiable() const { return flat_.node_ptr() != nullptr || !rows_.empty(); }

 private:
  void check_span(size_t i, size_t j, size_t label) const;

  size_t n_, num_labels_;
  std::vector<double> dense_;
  Tensor flat_;
  std::vector<Tensor> rows_;
};

// One-layer feed-forward span classifier: W2 relu(LN(W1 s + b1)) + b2.
// Produces scores for labels 1..num_labels-1; the empty label is not scored.
struct SpanScorerParams {
  Tensor w1, b1;
  Tensor ln_gain, ln_bias;
  Tensor w2, b2;
  Tensor start_rep, stop_rep;  // learned boundary word representations

  static SpanScorerParams init(size_t width, size_t hidden, size_t num_labels, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

// word_reps [n x width] framed with the learned boundary rows -> [(n+2) x width].
Tensor augment_word_reps(const Tensor& word_reps, const Tensor& start_rep, const Tensor& stop_rep);

// Per-head fencepost differences: forward half rows j - i, backward half rows
// j+1 - i+1 of the augmented matrix, concatenated across heads.
Tensor span_vector(const Tensor& augmented, size_t i, size_t j, size_t num_heads);

Tensor span_scores(const Tensor& span_vec, SpanScorerParams& params);

// Scores every span 0 <= i < j <= n into a differentiable chart.
SpanChart score_all_spans(const Tensor& word_reps, SpanScorerParams& params, size_t num_heads,
                          size_t num_labels);

// Sum of label scores over the tree's labeled spans.
double tree_score(const SpanChart& chart, const ParseTree& tree);

// Max-scoring binary tree. With gold, decodes over score + Hamming augment
// (+1 per predicted labeled span absent from gold). Ties break to the lowest
// label id and lowest split point.
std::pair<ParseTree, double> cky_decode(const SpanChart& chart, const ParseTree* gold = nullptr);

// max(0, max_T[s(T) + Hamming(T, gold)] - s(gold)) as a differentiable scalar.
Tensor hinge_loss(const SpanChart& chart, const ParseTree& gold);

}  // namespace lap
