#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lap/rng.hpp"

namespace lap {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const std::vector<size_t>& shape);

namespace detail {

struct Node;

// Accumulation buffers used during one backward sweep. Non-leaf gradients
// live only here; leaf gradients are added onto the node afterwards so
// repeated backward calls accumulate on leaves.
struct GradMap {
  std::unordered_map<const Node*, std::vector<double>> buf;
  std::vector<double>& at(const Node* n);
};

using BackpropFn = std::function<void(const std::vector<double>& gout, GradMap& grads)>;

struct Node {
  std::vector<size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // leaves only; sized on first backward
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  BackpropFn backprop;
};

}  // namespace detail

// Dense double-precision tensor handle. Copying a Tensor aliases the same
// underlying node; the recorded parent links of non-leaf nodes form the
// replayable computation record used by backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(std::vector<size_t> shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // Uniform(-bound, bound) entries drawn from rng.
  static Tensor random_uniform(std::vector<size_t> shape, double bound, Rng& rng, bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const;
  size_t rank() const { return shape().size(); }
  size_t dim(size_t i) const { return shape().at(i); }
  size_t size() const;

  const std::vector<double>& values() const;
  // Mutable leaf storage, for optimizer updates and checkpoint restore.
  std::vector<double>& values_mut();
  double item() const;
  double at(size_t flat) const;

  bool requires_grad() const;
  bool is_leaf() const;
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- primitive operations (all differentiable unless noted) ---

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
// Adds a learned single-element tensor to every entry of a.
Tensor add_broadcast(const Tensor& a, const Tensor& s);
Tensor mul_scalar(const Tensor& a, double c);

// M[d x n] + v[d] replicated over columns / M[m x n] + v[n] over rows.
Tensor add_colvec(const Tensor& m, const Tensor& v);
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor softmax(const Tensor& a, size_t axis);
// Row-wise layer normalization of x[n x d] with learned gain[d], bias[d].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6);

Tensor concat(const std::vector<Tensor>& parts, size_t axis);
Tensor slice(const Tensor& a, size_t axis, size_t start, size_t end);
Tensor reshape(const Tensor& a, std::vector<size_t> shape);
Tensor sum(const Tensor& a);
Tensor pick(const Tensor& a, size_t flat_index);
// rows[k x C] from a[R x C]; gradient scatters back to the used rows only.
Tensor gather_rows(const Tensor& a, const std::vector<size_t>& indices);
// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

// log(sum(exp(x))) of a 1-D tensor, stabilized by max subtraction.
Tensor logsumexp(const Tensor& x);
// logsumexp(logits) - logits[target], for a 1-D logits tensor.
Tensor cross_entropy(const Tensor& logits, size_t target);

// Reverse-mode sweep from a scalar loss. Gradients accumulate on
// requires_grad leaves; call zero_grad between steps to reset.
void backward(const Tensor& loss);

}  // namespace lap
