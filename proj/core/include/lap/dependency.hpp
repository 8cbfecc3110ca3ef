#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lap/errors.hpp"
#include "lap/gradcheck.hpp"
#include "lap/rng.hpp"
#include "lap/tensor.hpp"

namespace lap {

// Dependency arcs for an n-word sentence. heads[i] is the head of word i+1
// in 0..n where 0 is the artificial root; labels[i] is the arc's
// dependency-label id.
struct DepArcs {
  std::vector<size_t> heads;
  std::vector<size_t> labels;

  size_t size() const { return heads.size(); }
  void validate() const;  // tree rooted at 0 with exactly one root child
};

// Arc and label scorer parameters. Word representations pass through separate
// one-layer perceptrons for their dependent and head roles; the biaffine arc
// score is hd_i' W hh_j + u.hd_i + v.hh_j + b. The label scorer applies the
// same form per label with stacked weights.
struct BiaffineParams {
  Tensor wd, bd;      // dependent perceptron [r x width], [r]
  Tensor wh, bh;      // head perceptron [r x width], [r]
  Tensor root_rep;    // learned root word representation [width]
  Tensor w;           // [r x r]
  Tensor u, v;        // [r]
  Tensor b;           // [1]
  Tensor wl;          // per-label matrices stacked [m*r x r]
  Tensor ul, vl;      // [m x r]
  Tensor bl;          // [m]

  static BiaffineParams init(size_t width, size_t rank, size_t num_labels, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  size_t rank() const { return wd.shape()[0]; }
  size_t num_labels() const { return bl.shape()[0]; }
};

// Arc scores plus the role representations they were computed from, kept for
// label scoring over decoded arcs.
struct DepScores {
  Tensor arc_scores;  // [(n+1) x n]: candidate head j (row) for dependent i (col)
  Tensor dep_reps;    // [r x n]
  Tensor head_reps;   // [r x (n+1)], column 0 = root
};

// word_reps [n x width] -> biaffine scores of every (head, dependent) pair,
// with the learned root representation filling head column 0.
DepScores biaffine_arc_scores(const Tensor& word_reps, BiaffineParams& params);

// Label scores [m] for attaching word `dependent` (0-based) to candidate
// `head` (0 = root).
Tensor label_scores(const DepScores& scores, const BiaffineParams& params, size_t dependent,
                    size_t head);

// -sum_i [log P(gold head_i | i) + log P(gold label_i | i, head_i)].
// gold_label_scores[i] holds label scores at the gold (dependent, head) pair.
Tensor dep_loss(const Tensor& arc_scores, const std::vector<Tensor>& gold_label_scores,
                const DepArcs& gold);

// Head assignment from arc scores; labels are left 0. Default is the
// maximum-scoring arborescence with exactly one root child (Chu-Liu/Edmonds);
// greedy takes the per-word argmax without any tree constraint. All argmax
// ties break to the lowest index.
DepArcs decode_arcs(const Tensor& arc_scores, bool greedy = false);

// Fills in argmax labels for already-decoded heads.
DepArcs label_arcs(const Tensor& word_reps, const DepArcs& arcs, BiaffineParams& params);

}  // namespace lap
