#include "lap/dependency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lap {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor init_matrix(size_t rows, size_t cols, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(cols));
  return Tensor::random_uniform({rows, cols}, bound, rng, true);
}

Tensor init_vector(size_t n, size_t fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  return Tensor::random_uniform({n}, bound, rng, true);
}

// Maximum arborescence rooted at node 0 over dense scores s[h][v] (square;
// the diagonal and column 0 are never read). Returns the parent of every
// node, with entry 0 unused. Argmax ties break to the lowest head index.
std::vector<size_t> max_arborescence(const std::vector<std::vector<double>>& s) {
  const size_t n = s.size();
  std::vector<size_t> par(n, 0);
  for (size_t v = 1; v < n; ++v) {
    size_t best = 0;
    for (size_t h = 1; h < n; ++h) {
      if (h == v) continue;
      if (s[h][v] > s[best][v]) best = h;
    }
    par[v] = best;
  }

  std::vector<int> state(n, 0);  // 0 fresh, 1 on current walk, 2 done
  state[0] = 2;
  std::vector<size_t> cycle;
  for (size_t v = 1; v < n && cycle.empty(); ++v) {
    if (state[v] != 0) continue;
    std::vector<size_t> path;
    size_t u = v;
    while (state[u] == 0) {
      state[u] = 1;
      path.push_back(u);
      u = par[u];
    }
    if (state[u] == 1) {
      size_t at = 0;
      while (path[at] != u) ++at;
      cycle.assign(path.begin() + at, path.end());
    }
    for (size_t w : path) state[w] = 2;
  }
  if (cycle.empty()) return par;

  std::vector<bool> in_cycle(n, false);
  for (size_t v : cycle) in_cycle[v] = true;
  std::vector<size_t> sorted_cycle = cycle;
  std::sort(sorted_cycle.begin(), sorted_cycle.end());

  std::vector<size_t> to_new(n, 0);
  std::vector<size_t> to_old;
  for (size_t v = 0; v < n; ++v) {
    if (!in_cycle[v]) {
      to_new[v] = to_old.size();
      to_old.push_back(v);
    }
  }
  const size_t c = to_old.size();
  const size_t m = c + 1;
  std::vector<std::vector<double>> contracted(m, std::vector<double>(m, kNegInf));
  std::vector<size_t> enter_v(m, 0);
  std::vector<size_t> leave_v(m, 0);

  for (size_t h = 0; h < n; ++h) {
    if (in_cycle[h]) continue;
    for (size_t u = 1; u < n; ++u) {
      if (u == h || in_cycle[u]) continue;
      contracted[to_new[h]][to_new[u]] = s[h][u];
    }
    double best_gain = kNegInf;
    size_t best_entry = sorted_cycle[0];
    for (size_t v : sorted_cycle) {
      double gain = s[h][v] - s[par[v]][v];
      if (gain > best_gain) {
        best_gain = gain;
        best_entry = v;
      }
    }
    contracted[to_new[h]][c] = best_gain;
    enter_v[to_new[h]] = best_entry;
  }
  for (size_t u = 1; u < n; ++u) {
    if (in_cycle[u]) continue;
    double best_score = kNegInf;
    size_t best_exit = sorted_cycle[0];
    for (size_t v : sorted_cycle) {
      if (s[v][u] > best_score) {
        best_score = s[v][u];
        best_exit = v;
      }
    }
    contracted[c][to_new[u]] = best_score;
    leave_v[to_new[u]] = best_exit;
  }

  std::vector<size_t> par2 = max_arborescence(contracted);

  std::vector<size_t> out(n, 0);
  for (size_t v : cycle) out[v] = par[v];
  for (size_t u = 1; u < n; ++u) {
    if (in_cycle[u]) continue;
    size_t p = par2[to_new[u]];
    out[u] = p == c ? leave_v[to_new[u]] : to_old[p];
  }
  out[enter_v[par2[c]]] = to_old[par2[c]];
  return out;
}

}  // namespace

void DepArcs::validate() const {
  const size_t n = heads.size();
  if (n == 0) throw InputError("dependency arcs: empty sentence");
  if (labels.size() != n) {
    throw InputError("dependency arcs: " + std::to_string(n) + " heads vs " +
                     std::to_string(labels.size()) + " labels");
  }
  size_t root_children = 0;
  for (size_t i = 0; i < n; ++i) {
    if (heads[i] > n) {
      throw InputError("dependency arcs: head " + std::to_string(heads[i]) +
                       " out of range for " + std::to_string(n) + " words");
    }
    if (heads[i] == i + 1) {
      throw InputError("dependency arcs: word " + std::to_string(i + 1) + " heads itself");
    }
    if (heads[i] == 0) ++root_children;
  }
  if (root_children != 1) {
    throw InputError("dependency arcs: want exactly one root child, got " +
                     std::to_string(root_children));
  }
  for (size_t i = 0; i < n; ++i) {
    size_t u = i + 1;
    size_t steps = 0;
    while (u != 0) {
      u = heads[u - 1];
      if (++steps > n) {
        throw InputError("dependency arcs: cycle through word " + std::to_string(i + 1));
      }
    }
  }
}

BiaffineParams BiaffineParams::init(size_t width, size_t rank, size_t num_labels, Rng& rng) {
  if (width == 0 || rank == 0 || num_labels == 0) {
    throw InputError("biaffine params: width, rank, and label count must be positive");
  }
  BiaffineParams p;
  p.wd = init_matrix(rank, width, rng);
  p.bd = Tensor::zeros({rank}, true);
  p.wh = init_matrix(rank, width, rng);
  p.bh = Tensor::zeros({rank}, true);
  p.root_rep = init_vector(width, width, rng);
  p.w = init_matrix(rank, rank, rng);
  p.u = init_vector(rank, rank, rng);
  p.v = init_vector(rank, rank, rng);
  p.b = Tensor::zeros({1}, true);
  p.wl = init_matrix(num_labels * rank, rank, rng);
  p.ul = init_matrix(num_labels, rank, rng);
  p.vl = init_matrix(num_labels, rank, rng);
  p.bl = Tensor::zeros({num_labels}, true);
  return p;
}

void BiaffineParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".wd", wd});
  out.push_back({prefix + ".bd", bd});
  out.push_back({prefix + ".wh", wh});
  out.push_back({prefix + ".bh", bh});
  out.push_back({prefix + ".root_rep", root_rep});
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".u", u});
  out.push_back({prefix + ".v", v});
  out.push_back({prefix + ".b", b});
  out.push_back({prefix + ".wl", wl});
  out.push_back({prefix + ".ul", ul});
  out.push_back({prefix + ".vl", vl});
  out.push_back({prefix + ".bl", bl});
}

DepScores biaffine_arc_scores(const Tensor& word_reps, BiaffineParams& params) {
  if (word_reps.shape().size() != 2) {
    throw TensorError("biaffine_arc_scores: word_reps must be a matrix");
  }
  const size_t n = word_reps.shape()[0];
  const size_t width = word_reps.shape()[1];
  if (n == 0) throw InputError("biaffine_arc_scores: empty sentence");
  if (params.wd.shape()[1] != width) {
    throw TensorError("biaffine_arc_scores: word width " + std::to_string(width) +
                      " does not match scorer width " + std::to_string(params.wd.shape()[1]));
  }
  const size_t r = params.rank();

  Tensor cols = transpose(word_reps);
  Tensor head_in = concat({reshape(params.root_rep, {width, 1}), cols}, 1);

  DepScores out;
  out.dep_reps = relu(add_colvec(matmul(params.wd, cols), params.bd));
  out.head_reps = relu(add_colvec(matmul(params.wh, head_in), params.bh));

  Tensor bilinear = matmul(transpose(matmul(params.w, out.head_reps)), out.dep_reps);
  Tensor dep_term = reshape(matmul(reshape(params.u, {1, r}), out.dep_reps), {n});
  Tensor head_term = reshape(matmul(reshape(params.v, {1, r}), out.head_reps), {n + 1});
  out.arc_scores =
      add_broadcast(add_colvec(add_rowvec(bilinear, dep_term), head_term), params.b);
  return out;
}

Tensor label_scores(const DepScores& scores, const BiaffineParams& params, size_t dependent,
                    size_t head) {
  const size_t n = scores.dep_reps.shape()[1];
  if (dependent >= n) {
    throw InputError("label_scores: dependent " + std::to_string(dependent) +
                     " out of range for " + std::to_string(n) + " words");
  }
  if (head > n) {
    throw InputError("label_scores: head " + std::to_string(head) + " out of range for " +
                     std::to_string(n) + " words");
  }
  const size_t r = params.rank();
  const size_t m = params.num_labels();

  Tensor hd = slice(scores.dep_reps, 1, dependent, dependent + 1);
  Tensor hh = slice(scores.head_reps, 1, head, head + 1);
  Tensor per_label = reshape(matmul(params.wl, hh), {m, r});
  Tensor bilinear = matmul(per_label, hd);
  Tensor dep_term = matmul(params.ul, hd);
  Tensor head_term = matmul(params.vl, hh);
  return add(reshape(add(add(bilinear, dep_term), head_term), {m}), params.bl);
}

Tensor dep_loss(const Tensor& arc_scores, const std::vector<Tensor>& gold_label_scores,
                const DepArcs& gold) {
  gold.validate();
  const size_t n = gold.size();
  if (arc_scores.shape() != std::vector<size_t>{n + 1, n}) {
    throw TensorError("dep_loss: want [" + std::to_string(n + 1) + " x " + std::to_string(n) +
                      "] arc scores");
  }
  if (gold_label_scores.size() != n) {
    throw TensorError("dep_loss: " + std::to_string(gold_label_scores.size()) +
                      " label score vectors for " + std::to_string(n) + " words");
  }
  Tensor loss = Tensor::scalar(0.0);
  for (size_t i = 0; i < n; ++i) {
    Tensor head_logits = reshape(slice(arc_scores, 1, i, i + 1), {n + 1});
    loss = add(loss, cross_entropy(head_logits, gold.heads[i]));
    loss = add(loss, cross_entropy(gold_label_scores[i], gold.labels[i]));
  }
  return loss;
}

DepArcs decode_arcs(const Tensor& arc_scores, bool greedy) {
  const std::vector<size_t>& shape = arc_scores.shape();
  if (shape.size() != 2 || shape[1] == 0 || shape[0] != shape[1] + 1) {
    throw TensorError("decode_arcs: want [(n+1) x n] arc scores");
  }
  const size_t n = shape[1];
  const std::vector<double>& vals = arc_scores.values();

  DepArcs arcs;
  arcs.heads.assign(n, 0);
  arcs.labels.assign(n, 0);

  if (greedy) {
    for (size_t i = 0; i < n; ++i) {
      size_t best = 0;
      for (size_t j = 1; j <= n; ++j) {
        if (j == i + 1) continue;
        if (vals[j * n + i] > vals[best * n + i]) best = j;
      }
      arcs.heads[i] = best;
    }
    return arcs;
  }

  std::vector<std::vector<double>> s(n + 1, std::vector<double>(n + 1, kNegInf));
  for (size_t j = 0; j <= n; ++j) {
    for (size_t i = 0; i < n; ++i) {
      if (j != i + 1) s[j][i + 1] = vals[j * n + i];
    }
  }

  // One candidate root child at a time keeps the single-root constraint
  // inside an unconstrained solver.
  double best_total = kNegInf;
  std::vector<size_t> best_par;
  for (size_t rho = 1; rho <= n; ++rho) {
    std::vector<std::vector<double>> masked = s;
    for (size_t d = 1; d <= n; ++d) {
      if (d != rho) masked[0][d] = -1e30;
    }
    std::vector<size_t> par = max_arborescence(masked);
    double total = 0.0;
    for (size_t d = 1; d <= n; ++d) total += s[par[d]][d];
    if (total > best_total) {
      best_total = total;
      best_par = par;
    }
  }
  for (size_t i = 0; i < n; ++i) arcs.heads[i] = best_par[i + 1];
  return arcs;
}

DepArcs label_arcs(const Tensor& word_reps, const DepArcs& arcs, BiaffineParams& params) {
  const size_t n = word_reps.shape()[0];
  if (arcs.size() != n) {
    throw InputError("label_arcs: " + std::to_string(arcs.size()) + " arcs for " +
                     std::to_string(n) + " words");
  }
  DepScores scores = biaffine_arc_scores(word_reps, params);
  DepArcs out = arcs;
  out.labels.assign(n, 0);
  const size_t m = params.num_labels();
  for (size_t i = 0; i < n; ++i) {
    Tensor scored = label_scores(scores, params, i, arcs.heads[i]);
    const std::vector<double>& ls = scored.values();
    size_t best = 0;
    for (size_t l = 1; l < m; ++l) {
      if (ls[l] > ls[best]) best = l;
    }
    out.labels[i] = best;
  }
  return out;
}

}  // namespace lap
