#include "lap/constituency.hpp"

#include <algorithm>
#include <cmath>

namespace lap {
namespace {

Tensor init_matrix(size_t rows, size_t cols, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(cols));
  return Tensor::random_uniform({rows, cols}, bound, rng, true);
}

}  // namespace

void ParseTree::sort_spans() { std::sort(spans.begin(), spans.end()); }

void ParseTree::validate() const {
  if (length == 0) throw InputError("parse tree: zero length");
  bool has_root = false;
  for (const LabeledSpan& s : spans) {
    if (s.start >= s.end || s.end > length) {
      throw InputError("parse tree: span (" + std::to_string(s.start) + ", " +
                       std::to_string(s.end) + ") invalid for length " + std::to_string(length));
    }
    if (s.start == 0 && s.end == length) has_root = true;
  }
  if (!has_root) throw InputError("parse tree: missing full span (0, " +
                                  std::to_string(length) + ")");
  for (size_t a = 0; a < spans.size(); ++a) {
    for (size_t b = a + 1; b < spans.size(); ++b) {
      const LabeledSpan& x = spans[a];
      const LabeledSpan& y = spans[b];
      if (x.start == y.start && x.end == y.end) {
        throw InputError("parse tree: duplicate span (" + std::to_string(x.start) + ", " +
                         std::to_string(x.end) + ")");
      }
      bool disjoint = x.end <= y.start || y.end <= x.start;
      bool nested = (x.start <= y.start && y.end <= x.end) ||
                    (y.start <= x.start && x.end <= y.end);
      if (!disjoint && !nested) {
        throw InputError("parse tree: crossing spans (" + std::to_string(x.start) + ", " +
                         std::to_string(x.end) + ") and (" + std::to_string(y.start) + ", " +
                         std::to_string(y.end) + ")");
      }
    }
  }
}

std::vector<LabeledSpan> ParseTree::labeled_spans() const {
  std::vector<LabeledSpan> out;
  for (const LabeledSpan& s : spans)
    if (s.label != 0) out.push_back(s);
  std::sort(out.begin(), out.end());
  return out;
}

std::unordered_set<size_t> ParseTree::labeled_span_keys(size_t num_labels) const {
  std::unordered_set<size_t> keys;
  for (const LabeledSpan& s : spans)
    if (s.label != 0) keys.insert((s.start * (length + 1) + s.end) * num_labels + s.label);
  return keys;
}

SpanChart::SpanChart(size_t n, size_t num_labels) : n_(n), num_labels_(num_labels) {
  if (n == 0 || num_labels < 2) {
    throw InputError("span chart: need n >= 1 and at least one real label");
  }
  dense_.assign((n + 1) * (n + 1) * num_labels, 0.0);
}

SpanChart SpanChart::from_tensor(size_t n, size_t num_labels, const Tensor& scores) {
  SpanChart chart(n, num_labels);
  if (scores.size() != chart.dense_.size()) {
    throw InputError("span chart: tensor has " + std::to_string(scores.size()) +
                     " entries, expected " + std::to_string(chart.dense_.size()));
  }
  chart.dense_ = scores.values();
  for (size_t i = 0; i <= n; ++i)
    for (size_t j = 0; j <= n; ++j)
      if (chart.dense_[chart.key(i, j, 0)] != 0.0) {
        throw InputError("span chart: empty-label score must be 0");
      }
  chart.flat_ = scores;
  return chart;
}

void SpanChart::check_span(size_t i, size_t j, size_t label) const {
  if (i >= j || j > n_ || label >= num_labels_) {
    throw InputError("span chart: no entry (" + std::to_string(i) + ", " + std::to_string(j) +
                     ", " + std::to_string(label) + ") in a length-" + std::to_string(n_) +
                     " chart with " + std::to_string(num_labels_) + " labels");
  }
}

double SpanChart::value(size_t i, size_t j, size_t label) const {
  check_span(i, j, label);
  return dense_[key(i, j, label)];
}

void SpanChart::set_value(size_t i, size_t j, size_t label, double v) {
  check_span(i, j, label);
  if (label == 0) throw InputError("span chart: the empty label keeps score 0");
  dense_[key(i, j, label)] = v;
}

void SpanChart::set_row(size_t i, size_t j, const Tensor& row) {
  check_span(i, j, 1);
  if (row.size() != num_labels_ - 1) {
    throw InputError("span chart: row of " + std::to_string(row.size()) + " scores, expected " +
                     std::to_string(num_labels_ - 1));
  }
  if (rows_.empty()) rows_.resize((n_ + 1) * (n_ + 1));
  rows_[i * (n_ + 1) + j] = row;
  for (size_t l = 1; l < num_labels_; ++l) dense_[key(i, j, l)] = row.at(l - 1);
}

Tensor SpanChart::pick_score(size_t i, size_t j, size_t label) const {
  check_span(i, j, label);
  if (label == 0) throw InputError("span chart: the empty label is not scored");
  if (flat_.node_ptr()) return pick(flat_, key(i, j, label));
  if (!rows_.empty() && rows_[i * (n_ + 1) + j].node_ptr()) {
    return pick(rows_[i * (n_ + 1) + j], label - 1);
  }
  throw InputError("span chart: not differentiable (no tensor backing)");
}

SpanScorerParams SpanScorerParams::init(size_t width, size_t hidden, size_t num_labels,
                                        Rng& rng) {
  if (width == 0 || hidden == 0 || num_labels < 2) {
    throw InputError("span scorer: bad dimensions");
  }
  SpanScorerParams p;
  p.w1 = init_matrix(hidden, width, rng);
  p.b1 = Tensor::zeros({hidden}, true);
  p.ln_gain = Tensor::full({hidden}, 1.0, true);
  p.ln_bias = Tensor::zeros({hidden}, true);
  p.w2 = init_matrix(num_labels - 1, hidden, rng);
  p.b2 = Tensor::zeros({num_labels - 1}, true);
  double bound = std::sqrt(1.0 / static_cast<double>(width));
  p.start_rep = Tensor::random_uniform({width}, bound, rng, true);
  p.stop_rep = Tensor::random_uniform({width}, bound, rng, true);
  return p;
}

void SpanScorerParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".ln_gain", ln_gain});
  out.push_back({prefix + ".ln_bias", ln_bias});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b2", b2});
  out.push_back({prefix + ".start", start_rep});
  out.push_back({prefix + ".stop", stop_rep});
}

Tensor augment_word_reps(const Tensor& word_reps, const Tensor& start_rep,
                         const Tensor& stop_rep) {
  if (word_reps.rank() != 2 || start_rep.size() != word_reps.dim(1) ||
      stop_rep.size() != word_reps.dim(1)) {
    throw TensorError("augment: boundary width does not match word_reps " +
                      shape_str(word_reps.shape()));
  }
  size_t w = word_reps.dim(1);
  return concat({reshape(start_rep, {1, w}), word_reps, reshape(stop_rep, {1, w})}, 0);
}

Tensor span_vector(const Tensor& augmented, size_t i, size_t j, size_t num_heads) {
  size_t rows = augmented.dim(0);
  size_t width = augmented.dim(1);
  size_t n = rows - 2;
  if (i >= j || j > n) {
    throw InputError("span vector: invalid span (" + std::to_string(i) + ", " +
                     std::to_string(j) + ") for length " + std::to_string(n));
  }
  if (num_heads == 0 || width % num_heads != 0 || (width / num_heads) % 2 != 0) {
    throw InputError("span vector: width " + std::to_string(width) +
                     " does not split into even halves over " + std::to_string(num_heads) +
                     " heads");
  }
  size_t d = width / num_heads;
  Tensor fwd = sub(slice(augmented, 0, j, j + 1), slice(augmented, 0, i, i + 1));
  Tensor bwd = sub(slice(augmented, 0, j + 1, j + 2), slice(augmented, 0, i + 1, i + 2));
  std::vector<Tensor> parts;
  parts.reserve(2 * num_heads);
  for (size_t h = 0; h < num_heads; ++h) {
    parts.push_back(slice(fwd, 1, h * d, h * d + d / 2));
    parts.push_back(slice(bwd, 1, h * d + d / 2, (h + 1) * d));
  }
  return reshape(concat(parts, 1), {width});
}

Tensor span_scores(const Tensor& span_vec, SpanScorerParams& params) {
  if (span_vec.rank() != 1 || span_vec.dim(0) != params.w1.dim(1)) {
    throw TensorError("span scores: vector " + shape_str(span_vec.shape()) +
                      " does not match scorer width " + std::to_string(params.w1.dim(1)));
  }
  Tensor pre = matmul(params.w1, reshape(span_vec, {span_vec.dim(0), 1}));
  pre = reshape(add_colvec(pre, params.b1), {1, params.w1.dim(0)});
  Tensor hidden = relu(layer_norm(pre, params.ln_gain, params.ln_bias));
  Tensor out = add_colvec(matmul(params.w2, transpose(hidden)), params.b2);
  return reshape(out, {params.w2.dim(0)});
}

SpanChart score_all_spans(const Tensor& word_reps, SpanScorerParams& params, size_t num_heads,
                          size_t num_labels) {
  size_t n = word_reps.dim(0);
  SpanChart chart(n, num_labels);
  Tensor augmented = augment_word_reps(word_reps, params.start_rep, params.stop_rep);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j <= n; ++j) {
      chart.set_row(i, j, span_scores(span_vector(augmented, i, j, num_heads), params));
    }
  }
  return chart;
}

double tree_score(const SpanChart& chart, const ParseTree& tree) {
  if (tree.length != chart.length()) {
    throw InputError("tree score: tree length " + std::to_string(tree.length) +
                     " != chart length " + std::to_string(chart.length()));
  }
  double total = 0.0;
  for (const LabeledSpan& s : tree.labeled_spans()) total += chart.value(s.start, s.end, s.label);
  return total;
}

std::pair<ParseTree, double> cky_decode(const SpanChart& chart, const ParseTree* gold) {
  const size_t n = chart.length();
  const size_t L = chart.num_labels();
  std::unordered_set<size_t> gold_keys;
  if (gold) {
    if (gold->length != n) {
      throw InputError("decode: gold length " + std::to_string(gold->length) +
                       " != chart length " + std::to_string(n));
    }
    gold_keys = gold->labeled_span_keys(L);
  }

  auto label_score = [&](size_t i, size_t j, size_t l) {
    if (l == 0) return 0.0;
    double v = chart.value(i, j, l);
    if (gold && gold_keys.find(chart.key(i, j, l)) == gold_keys.end()) v += 1.0;
    return v;
  };

  const size_t stride = n + 1;
  std::vector<double> best(stride * stride, 0.0);
  std::vector<size_t> best_label(stride * stride, 0), best_split(stride * stride, 0);

  for (size_t len = 1; len <= n; ++len) {
    for (size_t i = 0; i + len <= n; ++i) {
      size_t j = i + len;
      size_t bl = 0;
      double bs = label_score(i, j, 0);
      for (size_t l = 1; l < L; ++l) {
        double v = label_score(i, j, l);
        if (v > bs) {
          bs = v;
          bl = l;
        }
      }
      best_label[i * stride + j] = bl;
      if (len == 1) {
        best[i * stride + j] = bs;
      } else {
        size_t bk = i + 1;
        double child = best[i * stride + (i + 1)] + best[(i + 1) * stride + j];
        for (size_t k = i + 2; k < j; ++k) {
          double c = best[i * stride + k] + best[k * stride + j];
          if (c > child) {
            child = c;
            bk = k;
          }
        }
        best_split[i * stride + j] = bk;
        best[i * stride + j] = bs + child;
      }
    }
  }

  ParseTree tree;
  tree.length = n;
  std::vector<std::pair<size_t, size_t>> stack = {{0, n}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    tree.spans.push_back({i, j, best_label[i * stride + j]});
    if (j - i > 1) {
      size_t k = best_split[i * stride + j];
      stack.push_back({k, j});
      stack.push_back({i, k});
    }
  }
  tree.sort_spans();
  return {std::move(tree), best[0 * stride + n]};
}

Tensor hinge_loss(const SpanChart& chart, const ParseTree& gold) {
  gold.validate();
  auto [pred, aug_score] = cky_decode(chart, &gold);
  (void)aug_score;

  std::vector<LabeledSpan> gold_spans = gold.labeled_spans();
  std::vector<LabeledSpan> pred_spans = pred.labeled_spans();
  if (gold_spans == pred_spans) return Tensor::scalar(0.0);

  std::unordered_set<size_t> gold_keys = gold.labeled_span_keys(chart.num_labels());
  double delta = 0.0;
  for (const LabeledSpan& s : pred_spans) {
    if (gold_keys.find(chart.key(s.start, s.end, s.label)) == gold_keys.end()) delta += 1.0;
  }

  auto pick_sum = [&](const std::vector<LabeledSpan>& spans) {
    Tensor acc = Tensor::scalar(0.0);
    for (const LabeledSpan& s : spans) acc = add(acc, chart.pick_score(s.start, s.end, s.label));
    return acc;
  };
  Tensor margin = add_scalar(sub(pick_sum(pred_spans), pick_sum(gold_spans)), delta);
  return relu(margin);
}

}  // namespace lap
