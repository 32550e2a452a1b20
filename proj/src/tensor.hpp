#pragma once

// Dense row-major tensors with a tape-free reverse-mode graph: every op
// result that depends on a gradient-requiring input keeps its parents and a
// backward closure. backward() walks the graph in reverse topological order.
//
// Instantiated for float (training, inference) and double (gradient checks).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tunes::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.clear(); }

  T item() const;
  T at(std::size_t r, std::size_t c) const { return node_->value[r * node_->shape.back() + c]; }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// a[m,k] * b[k,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[m,k] * w[k,n] + bias[n]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

// rows of table[v,d] selected by idx -> [idx.size(), d]
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> idx);

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Per-row normalization over the last axis, eps = 1e-5.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias);

inline constexpr double kLayerNormEps = 1e-5;

// tanh approximation
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

// Multi-head causal self-attention over independent segments of the row
// axis. q, k, v are [n, h] with h divisible by heads; segment lengths sum to
// n. Row i attends to rows of its own segment at positions <= its own.
// If `score_area` is non-null it is incremented by sum(len^2) over segments.
template <typename T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                           std::span<const std::size_t> segments, std::uint64_t* score_area = nullptr);

// Mean negative log-likelihood of targets under softmax(logits) over rows
// whose target != ignore_id. Throws EmptyTarget if every row is ignored.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets, int ignore_id);

// Reverse-mode sweep from a scalar. Gradients accumulate into every reachable
// node that requires them; the recorded graph is released afterwards.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace tunes::nn
