#include "lap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace lap {

std::string shape_str(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace detail {

std::vector<double>& GradMap::at(const Node* n) {
  auto& v = buf[n];
  if (v.size() != n->value.size()) v.assign(n->value.size(), 0.0);
  return v;
}

namespace {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::shared_ptr<Node> make_leaf(std::vector<size_t> shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw TensorError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                      shape_str(shape));
  for (size_t d : shape)
    if (d == 0) throw TensorError("zero dimension in shape " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->is_leaf = true;
  return n;
}

// Result node: records parents and the backward closure only when a parent
// actually needs gradients, so inference graphs stay flat.
std::shared_ptr<Node> make_result(std::vector<size_t> shape, std::vector<double> value,
                                  std::vector<std::shared_ptr<Node>> parents, BackpropFn fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->is_leaf = false;
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) needs = true;
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backprop = std::move(fn);
  }
  return n;
}

}  // namespace
}  // namespace detail

using detail::GradMap;
using detail::Node;

Tensor Tensor::leaf(std::vector<size_t> shape, std::vector<double> data, bool requires_grad) {
  return from_node(detail::make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<size_t> shape, double v, bool requires_grad) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return leaf(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return leaf({1}, {v}, requires_grad); }

Tensor Tensor::random_uniform(std::vector<size_t> shape, double bound, Rng& rng, bool requires_grad) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> data(n);
  for (double& x : data) x = rng.uniform(-bound, bound);
  return leaf(std::move(shape), std::move(data), requires_grad);
}

const std::vector<size_t>& Tensor::shape() const {
  if (!node_) throw TensorError("use of empty tensor");
  return node_->shape;
}

size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
  if (!node_) throw TensorError("use of empty tensor");
  return node_->value;
}

std::vector<double>& Tensor::values_mut() {
  if (!node_) throw TensorError("use of empty tensor");
  if (!node_->is_leaf) throw TensorError("values of a derived tensor are not mutable");
  return node_->value;
}

double Tensor::item() const {
  const auto& v = values();
  if (v.size() != 1) throw TensorError("item() on non-scalar tensor of shape " + shape_str(shape()));
  return v[0];
}

double Tensor::at(size_t flat) const {
  const auto& v = values();
  if (flat >= v.size()) throw TensorError("flat index " + std::to_string(flat) + " out of range");
  return v[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }

const std::vector<double>& Tensor::grad() const {
  if (!node_) throw TensorError("use of empty tensor");
  if (node_->grad.size() != node_->value.size())
    throw TensorError("gradient not populated; run backward() first");
  return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

void Tensor::zero_grad() {
  if (!node_) return;
  node_->grad.assign(node_->value.size(), 0.0);
}

// ---------------------------------------------------------------------------
// primitive ops
// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw TensorError("matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  const size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw TensorError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_node(detail::make_result(
      {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
      [an, bn, m, k, n](const std::vector<double>& g, GradMap& grads) {
        if (an->requires_grad) {
          auto& ga = grads.at(an);
          const auto& bv2 = bn->value;
          for (size_t i = 0; i < m; ++i)
            for (size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* grow = g.data() + i * n;
              const double* brow = bv2.data() + p * n;
              for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
        }
        if (bn->requires_grad) {
          auto& gb = grads.at(bn);
          const auto& av2 = an->value;
          for (size_t p = 0; p < k; ++p)
            for (size_t i = 0; i < m; ++i) {
              const double aip = av2[i * k + p];
              if (aip == 0.0) continue;
              const double* grow = g.data() + i * n;
              double* gbrow = gb.data() + p * n;
              for (size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
        }
      }));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw TensorError("transpose: expects rank-2, got " + shape_str(a.shape()));
  const size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto& av = a.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Node* an = a.node();
  return Tensor::from_node(
      detail::make_result({n, m}, std::move(out), {a.node_ptr()},
                          [an, m, n](const std::vector<double>& g, GradMap& grads) {
                            auto& ga = grads.at(an);
                            for (size_t i = 0; i < m; ++i)
                              for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                          }));
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, name);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_node(detail::make_result(
      a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
      [an, bn, bwd](const std::vector<double>& g, GradMap& grads) {
        if (an->requires_grad) {
          auto& ga = grads.at(an);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(an->value[i], bn->value[i], true);
        }
        if (bn->requires_grad) {
          auto& gb = grads.at(bn);
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * bwd(an->value[i], bn->value[i], false);
        }
      }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, bool) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, bool wrt_a) { return wrt_a ? 1.0 : -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, bool wrt_a) { return wrt_a ? y : x; });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& x : out) x += c;
  return Tensor::from_node(detail::make_result(a.shape(), std::move(out), {a.node_ptr()},
                                               [an = a.node()](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                               }));
}

Tensor add_broadcast(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    throw TensorError("add_broadcast: offset must be a single-element tensor, got " +
                      shape_str(s.shape()));
  }
  std::vector<double> out(a.values());
  const double c = s.values()[0];
  for (double& x : out) x += c;
  return Tensor::from_node(detail::make_result(
      a.shape(), std::move(out), {a.node_ptr(), s.node_ptr()},
      [an = a.node(), sn = s.node()](const std::vector<double>& g, GradMap& grads) {
        auto& ga = grads.at(an);
        auto& gs = grads.at(sn);
        double total = 0.0;
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          total += g[i];
        }
        gs[0] += total;
      }));
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& x : out) x *= c;
  return Tensor::from_node(detail::make_result(a.shape(), std::move(out), {a.node_ptr()},
                                               [an = a.node(), c](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
                                               }));
}

Tensor add_colvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2) throw TensorError("add_colvec: matrix must be rank-2, got " + shape_str(m.shape()));
  const size_t d = m.dim(0), n = m.dim(1);
  if (v.size() != d)
    throw TensorError("add_colvec: vector length " + std::to_string(v.size()) + " != rows of " +
                      shape_str(m.shape()));
  std::vector<double> out(m.values());
  const auto& vv = v.values();
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += vv[i];
  Node* mn = m.node();
  Node* vn = v.node();
  return Tensor::from_node(detail::make_result(
      m.shape(), std::move(out), {m.node_ptr(), v.node_ptr()},
      [mn, vn, d, n](const std::vector<double>& g, GradMap& grads) {
        if (mn->requires_grad) {
          auto& gm = grads.at(mn);
          for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (vn->requires_grad) {
          auto& gv = grads.at(vn);
          for (size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += g[i * n + j];
            gv[i] += acc;
          }
        }
      }));
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2) throw TensorError("add_rowvec: matrix must be rank-2, got " + shape_str(m.shape()));
  const size_t r = m.dim(0), n = m.dim(1);
  if (v.size() != n)
    throw TensorError("add_rowvec: vector length " + std::to_string(v.size()) + " != cols of " +
                      shape_str(m.shape()));
  std::vector<double> out(m.values());
  const auto& vv = v.values();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += vv[j];
  Node* mn = m.node();
  Node* vn = v.node();
  return Tensor::from_node(detail::make_result(
      m.shape(), std::move(out), {m.node_ptr(), v.node_ptr()},
      [mn, vn, r, n](const std::vector<double>& g, GradMap& grads) {
        if (mn->requires_grad) {
          auto& gm = grads.at(mn);
          for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (vn->requires_grad) {
          auto& gv = grads.at(vn);
          for (size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (size_t i = 0; i < r; ++i) acc += g[i * n + j];
            gv[j] += acc;
          }
        }
      }));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  // subgradient at 0 is 0
  return Tensor::from_node(detail::make_result(a.shape(), std::move(out), {a.node_ptr()},
                                               [an = a.node()](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (size_t i = 0; i < g.size(); ++i)
                                                   if (an->value[i] > 0.0) ga[i] += g[i];
                                               }));
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& x : out) x = std::exp(x);
  auto node = detail::make_result(a.shape(), std::move(out), {a.node_ptr()}, nullptr);
  if (node->requires_grad) {
    Node* an = a.node();
    Node* self = node.get();
    node->backprop = [an, self](const std::vector<double>& g, GradMap& grads) {
      auto& ga = grads.at(an);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * self->value[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& x : out) {
    if (x <= 0.0) throw TensorError("log: nonpositive input");
    x = std::log(x);
  }
  return Tensor::from_node(detail::make_result(a.shape(), std::move(out), {a.node_ptr()},
                                               [an = a.node()](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (size_t i = 0; i < g.size(); ++i)
                                                   ga[i] += g[i] / an->value[i];
                                               }));
}

Tensor softmax(const Tensor& a, size_t axis) {
  const auto& shape = a.shape();
  if (axis >= shape.size())
    throw TensorError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  const size_t n = shape[axis];
  if (n == 0) throw TensorError("softmax: empty axis");
  size_t inner = 1, outer = 1;
  for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  for (size_t i = 0; i < axis; ++i) outer *= shape[i];

  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * n * inner + in;
      double mx = av[base];
      for (size_t i = 1; i < n; ++i) mx = std::max(mx, av[base + i * inner]);
      double z = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double e = std::exp(av[base + i * inner] - mx);
        out[base + i * inner] = e;
        z += e;
      }
      for (size_t i = 0; i < n; ++i) out[base + i * inner] /= z;
    }

  auto node = detail::make_result(shape, std::move(out), {a.node_ptr()}, nullptr);
  if (node->requires_grad) {
    Node* an = a.node();
    Node* self = node.get();
    node->backprop = [an, self, n, inner, outer](const std::vector<double>& g, GradMap& grads) {
      auto& ga = grads.at(an);
      const auto& y = self->value;
      for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) {
          const size_t base = o * n * inner + in;
          double dot = 0.0;
          for (size_t i = 0; i < n; ++i) dot += g[base + i * inner] * y[base + i * inner];
          for (size_t i = 0; i < n; ++i)
            ga[base + i * inner] += y[base + i * inner] * (g[base + i * inner] - dot);
        }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() != 2) throw TensorError("layer_norm: expects rank-2 input, got " + shape_str(x.shape()));
  const size_t n = x.dim(0), d = x.dim(1);
  if (gain.size() != d || bias.size() != d)
    throw TensorError("layer_norm: gain/bias length must equal row width " + std::to_string(d));
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  std::vector<double> out(n * d);
  std::vector<double> xhat(n * d);
  std::vector<double> inv_std(n);
  for (size_t r = 0; r < n; ++r) {
    const double* row = xv.data() + r * d;
    double mean = 0.0;
    for (size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  Node* xn = x.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  return Tensor::from_node(detail::make_result(
      x.shape(), std::move(out), {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      [xn, gn, bn, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const std::vector<double>& g,
                                                                               GradMap& grads) {
        const auto& gv2 = gn->value;
        for (size_t r = 0; r < n; ++r) {
          const double* grow = g.data() + r * d;
          const double* hrow = xhat.data() + r * d;
          if (gn->requires_grad) {
            auto& gg = grads.at(gn);
            for (size_t j = 0; j < d; ++j) gg[j] += grow[j] * hrow[j];
          }
          if (bn->requires_grad) {
            auto& gb = grads.at(bn);
            for (size_t j = 0; j < d; ++j) gb[j] += grow[j];
          }
          if (xn->requires_grad) {
            auto& gx = grads.at(xn);
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (size_t j = 0; j < d; ++j) {
              const double dh = grow[j] * gv2[j];
              mean_dh += dh;
              mean_dh_h += dh * hrow[j];
            }
            mean_dh /= static_cast<double>(d);
            mean_dh_h /= static_cast<double>(d);
            for (size_t j = 0; j < d; ++j) {
              const double dh = grow[j] * gv2[j];
              gx[r * d + j] += inv_std[r] * (dh - mean_dh - hrow[j] * mean_dh_h);
            }
          }
        }
      }));
}

Tensor concat(const std::vector<Tensor>& parts, size_t axis) {
  if (parts.empty()) throw TensorError("concat: no inputs");
  const auto& s0 = parts[0].shape();
  if (axis >= s0.size()) throw TensorError("concat: axis out of range");
  size_t axis_total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != s0.size()) throw TensorError("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != s0[i])
        throw TensorError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    axis_total += s[axis];
  }
  std::vector<size_t> out_shape = s0;
  out_shape[axis] = axis_total;
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  size_t total = outer * axis_total * inner;
  std::vector<double> out(total);
  std::vector<size_t> offsets(parts.size());
  {
    size_t off = 0;
    for (size_t p = 0; p < parts.size(); ++p) {
      offsets[p] = off;
      off += parts[p].dim(axis);
    }
  }
  for (size_t p = 0; p < parts.size(); ++p) {
    const auto& pv = parts[p].values();
    const size_t pa = parts[p].dim(axis);
    for (size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * pa * inner, pv.begin() + (o + 1) * pa * inner,
                out.begin() + (o * axis_total + offsets[p]) * inner);
  }
  std::vector<std::shared_ptr<Node>> parent_ptrs;
  parent_ptrs.reserve(parts.size());
  std::vector<Node*> raw;
  std::vector<size_t> axis_dims;
  for (const auto& p : parts) {
    parent_ptrs.push_back(p.node_ptr());
    raw.push_back(p.node());
    axis_dims.push_back(p.dim(axis));
  }
  return Tensor::from_node(detail::make_result(
      out_shape, std::move(out), std::move(parent_ptrs),
      [raw = std::move(raw), offsets = std::move(offsets), axis_dims = std::move(axis_dims), outer, inner,
       axis_total](const std::vector<double>& g, GradMap& grads) {
        for (size_t p = 0; p < raw.size(); ++p) {
          if (!raw[p]->requires_grad) continue;
          auto& gp = grads.at(raw[p]);
          const size_t pa = axis_dims[p];
          for (size_t o = 0; o < outer; ++o) {
            const double* src = g.data() + (o * axis_total + offsets[p]) * inner;
            double* dst = gp.data() + o * pa * inner;
            for (size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
          }
        }
      }));
}

Tensor slice(const Tensor& a, size_t axis, size_t start, size_t end) {
  const auto& s = a.shape();
  if (axis >= s.size()) throw TensorError("slice: axis out of range");
  if (start >= end || end > s[axis])
    throw TensorError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                      ") invalid for axis of size " + std::to_string(s[axis]));
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const size_t len = end - start, full = s[axis];
  std::vector<size_t> out_shape = s;
  out_shape[axis] = len;
  std::vector<double> out(outer * len * inner);
  const auto& av = a.values();
  for (size_t o = 0; o < outer; ++o)
    std::copy(av.begin() + (o * full + start) * inner, av.begin() + (o * full + end) * inner,
              out.begin() + o * len * inner);
  Node* an = a.node();
  return Tensor::from_node(detail::make_result(
      out_shape, std::move(out), {a.node_ptr()},
      [an, outer, inner, len, full, start](const std::vector<double>& g, GradMap& grads) {
        auto& ga = grads.at(an);
        for (size_t o = 0; o < outer; ++o) {
          const double* src = g.data() + o * len * inner;
          double* dst = ga.data() + (o * full + start) * inner;
          for (size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      }));
}

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  if (n != a.size())
    throw TensorError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return Tensor::from_node(detail::make_result(std::move(shape), a.values(), {a.node_ptr()},
                                               [an = a.node()](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                               }));
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  return Tensor::from_node(detail::make_result({1}, {acc}, {a.node_ptr()},
                                               [an = a.node()](const std::vector<double>& g, GradMap& grads) {
                                                 auto& ga = grads.at(an);
                                                 for (double& x : ga) x += g[0];
                                               }));
}

Tensor pick(const Tensor& a, size_t flat_index) {
  if (flat_index >= a.size())
    throw TensorError("pick: index " + std::to_string(flat_index) + " out of range for " +
                      shape_str(a.shape()));
  return Tensor::from_node(detail::make_result(
      {1}, {a.values()[flat_index]}, {a.node_ptr()},
      [an = a.node(), flat_index](const std::vector<double>& g, GradMap& grads) {
        grads.at(an)[flat_index] += g[0];
      }));
}

Tensor gather_rows(const Tensor& a, const std::vector<size_t>& indices) {
  if (a.rank() != 2) throw TensorError("gather_rows: expects rank-2, got " + shape_str(a.shape()));
  const size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  const auto& av = a.values();
  for (size_t idx : indices) {
    if (idx >= rows) throw TensorError("gather_rows: row " + std::to_string(idx) + " out of range");
    out.insert(out.end(), av.begin() + idx * cols, av.begin() + (idx + 1) * cols);
  }
  Node* an = a.node();
  return Tensor::from_node(detail::make_result(
      {indices.size(), cols}, std::move(out), {a.node_ptr()},
      [an, indices, cols](const std::vector<double>& g, GradMap& grads) {
        auto& ga = grads.at(an);
        for (size_t r = 0; r < indices.size(); ++r)
          for (size_t j = 0; j < cols; ++j) ga[indices[r] * cols + j] += g[r * cols + j];
      }));
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw TensorError("dropout: probability must be in [0,1)");
  if (!training || p == 0.0) return a;
  std::vector<double> mask(a.size());
  const double scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform01() < p ? 0.0 : scale;
  std::vector<double> out(a.values());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return Tensor::from_node(detail::make_result(
      a.shape(), std::move(out), {a.node_ptr()},
      [an = a.node(), mask = std::move(mask)](const std::vector<double>& g, GradMap& grads) {
        auto& ga = grads.at(an);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
      }));
}

Tensor logsumexp(const Tensor& x) {
  if (x.rank() != 1) throw TensorError("logsumexp: expects rank-1, got " + shape_str(x.shape()));
  double mx = x.values()[0];
  for (double v : x.values()) mx = std::max(mx, v);
  // max is treated as a constant shift; the gradient path through
  // exp/sum/log yields exactly the softmax weights.
  Tensor shifted = add_scalar(x, -mx);
  return add_scalar(log(sum(exp(shifted))), mx);
}

Tensor cross_entropy(const Tensor& logits, size_t target) {
  return sub(logsumexp(logits), pick(logits, target));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw TensorError("backward: loss must be a scalar tensor");
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Post-order over parent links: inputs first, loss last.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  GradMap grads;
  grads.at(root)[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->requires_grad || !node->backprop) continue;
    node->backprop(grads.at(node), grads);
  }
  for (Node* node : order) {
    if (!node->is_leaf || !node->requires_grad) continue;
    auto found = grads.buf.find(node);
    if (found == grads.buf.end()) continue;
    if (node->grad.size() != node->value.size()) node->grad.assign(node->value.size(), 0.0);
    for (size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += found->second[i];
  }
}

}  // namespace lap
