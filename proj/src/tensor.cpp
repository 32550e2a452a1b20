#include "tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "error.hpp"

namespace tunes::nn {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<MatR<T>> mat(std::vector<T>& v, std::size_t r, std::size_t c) {
  return Eigen::Map<MatR<T>>(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

template <typename T>
Eigen::Map<const MatR<T>> cmat(const std::vector<T>& v, std::size_t r, std::size_t c) {
  return Eigen::Map<const MatR<T>>(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(Errc::ShapeMismatch, op + ": " + detail);
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* op, const char* arg) {
  if (!t.defined()) shape_error(op, std::string(arg) + " is undefined");
  if (t.ndim() != 2) shape_error(op, std::string(arg) + " must be 2-D, got " + shape_str(t.shape()));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
  auto node = std::make_shared<Node<T>>();
  node->value.assign(shape_size(shape), T(0));
  node->shape = std::move(shape);
  if (g_grad_enabled) {
    for (const auto* in : inputs) {
      if (in->defined() && in->requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const auto* in : inputs) {
        if (in->defined()) node->parents.push_back(in->node_ptr());
      }
    }
  }
  return Tensor<T>(std::move(node));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) shape_error("zeros", "dimensions must be positive, got " + shape_str(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->value.assign(shape_size(shape), T(0));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) shape_error("from", "dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_size(shape) != data.size()) {
    shape_error("from", shape_str(shape) + " holds " + std::to_string(shape_size(shape)) + " values, got " +
                            std::to_string(data.size()));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) shape_error("item", "tensor is not a scalar: " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul", "a");
  require_2d(b, "matmul", "b");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<T> out = make_result<T>({m, n}, {&a, &b});
  mat(out.node()->value, m, n).noalias() = cmat(a.node()->value, m, k) * cmat(b.node()->value, k, n);
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    Node<T>* pb = b.node();
    o->backward_fn = [o, pa, pb, m, k, n] {
      auto dc = cmat(o->grad, m, n);
      if (pa->requires_grad) mat(pa->ensure_grad(), m, k).noalias() += dc * cmat(pb->value, k, n).transpose();
      if (pb->requires_grad) mat(pb->ensure_grad(), k, n).noalias() += cmat(pa->value, m, k).transpose() * dc;
    };
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_2d(x, "linear", "x");
  require_2d(w, "linear", "w");
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k) shape_error("linear", shape_str(x.shape()) + " x " + shape_str(w.shape()));
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != n)) {
    shape_error("linear", "bias " + shape_str(bias.shape()) + " for output width " + std::to_string(n));
  }
  Tensor<T> out = make_result<T>({m, n}, {&x, &w, &bias});
  auto y = mat(out.node()->value, m, n);
  y.noalias() = cmat(x.node()->value, m, k) * cmat(w.node()->value, k, n);
  if (bias.defined()) {
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.node()->value.data(),
                                                                         static_cast<Eigen::Index>(n));
  }
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* px = x.node();
    Node<T>* pw = w.node();
    Node<T>* pb = bias.defined() ? bias.node() : nullptr;
    o->backward_fn = [o, px, pw, pb, m, k, n] {
      auto dy = cmat(o->grad, m, n);
      if (px->requires_grad) mat(px->ensure_grad(), m, k).noalias() += dy * cmat(pw->value, k, n).transpose();
      if (pw->requires_grad) mat(pw->ensure_grad(), k, n).noalias() += cmat(px->value, m, k).transpose() * dy;
      if (pb && pb->requires_grad) {
        // Row by row: Eigen's vectorized colwise sum reassociates depending on
        // buffer alignment, which breaks run-to-run reproducibility.
        auto& gb = pb->ensure_grad();
        for (std::size_t r = 0; r < m; ++r) {
          const T* row = o->grad.data() + r * n;
          for (std::size_t c = 0; c < n; ++c) gb[c] += row[c];
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("add", shape_str(a.shape()) + " + " + shape_str(b.shape()));
  Tensor<T> out = make_result<T>(a.shape(), {&a, &b});
  auto& y = out.node()->value;
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    Node<T>* pb = b.node();
    o->backward_fn = [o, pa, pb] {
      for (Node<T>* p : {pa, pb}) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("mul", shape_str(a.shape()) + " * " + shape_str(b.shape()));
  Tensor<T> out = make_result<T>(a.shape(), {&a, &b});
  auto& y = out.node()->value;
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    Node<T>* pb = b.node();
    o->backward_fn = [o, pa, pb] {
      // pa and pb may alias (x * x); read values before accumulating.
      if (pa->requires_grad) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        auto& g = pb->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * pa->value[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = make_result<T>(a.shape(), {&a});
  auto& y = out.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.node()->value[i] * s;
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    o->backward_fn = [o, pa, s] {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * s;
    };
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  Tensor<T> out = make_result<T>({1}, {&a});
  T acc = 0;
  for (T v : a.node()->value) acc += v;
  out.node()->value[0] = acc;
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    o->backward_fn = [o, pa] {
      auto& g = pa->ensure_grad();
      for (auto& gi : g) gi += o->grad[0];
    };
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> idx) {
  require_2d(table, "gather_rows", "table");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  if (idx.empty()) shape_error("gather_rows", "empty index list");
  for (int i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= rows) {
      shape_error("gather_rows", "index " + std::to_string(i) + " outside " + std::to_string(rows) + " rows");
    }
  }
  Tensor<T> out = make_result<T>({idx.size(), d}, {&table});
  auto& y = out.node()->value;
  const auto& tv = table.node()->value;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d, y.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pt = table.node();
    std::vector<int> ids(idx.begin(), idx.end());
    o->backward_fn = [o, pt, ids = std::move(ids), d] {
      auto& g = pt->ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r) {
        const T* src = o->grad.data() + r * d;
        T* dst = g.data() + static_cast<std::size_t>(ids[r]) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "concat_rows", "a");
  require_2d(b, "concat_rows", "b");
  if (a.dim(1) != b.dim(1)) shape_error("concat_rows", shape_str(a.shape()) + " ++ " + shape_str(b.shape()));
  Tensor<T> out = make_result<T>({a.dim(0) + b.dim(0), a.dim(1)}, {&a, &b});
  auto& y = out.node()->value;
  std::copy(a.node()->value.begin(), a.node()->value.end(), y.begin());
  std::copy(b.node()->value.begin(), b.node()->value.end(), y.begin() + static_cast<std::ptrdiff_t>(a.size()));
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    Node<T>* pb = b.node();
    o->backward_fn = [o, pa, pb] {
      const std::size_t na = pa->value.size();
      if (pa->requires_grad) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < na; ++i) g[i] += o->grad[i];
      }
      if (pb->requires_grad) {
        auto& g = pb->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[na + i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  Tensor<T> out = make_result<T>(std::move(shape), {&a});
  out.node()->value = a.node()->value;
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pa = a.node();
    o->backward_fn = [o, pa] {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    };
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias) {
  require_2d(x, "layer_norm", "x");
  const std::size_t n = x.dim(0), h = x.dim(1);
  if (gain.shape() != Shape{h} || bias.shape() != Shape{h}) {
    shape_error("layer_norm", "gain/bias must be [" + std::to_string(h) + "]");
  }
  Tensor<T> out = make_result<T>({n, h}, {&x, &gain, &bias});
  auto& y = out.node()->value;
  const auto& xv = x.node()->value;
  const auto& gv = gain.node()->value;
  const auto& bv = bias.node()->value;
  const bool track = out.requires_grad();
  std::vector<T> xhat(track ? n * h : 0), rstd(track ? n : 0);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = xv.data() + r * h;
    T mean = 0;
    for (std::size_t c = 0; c < h; ++c) mean += row[c];
    mean /= static_cast<T>(h);
    T var = 0;
    for (std::size_t c = 0; c < h; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<T>(h);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (std::size_t c = 0; c < h; ++c) {
      const T xh = (row[c] - mean) * rs;
      y[r * h + c] = xh * gv[c] + bv[c];
      if (track) xhat[r * h + c] = xh;
    }
    if (track) rstd[r] = rs;
  }
  if (track) {
    Node<T>* o = out.node();
    Node<T>* px = x.node();
    Node<T>* pg = gain.node();
    Node<T>* pb = bias.node();
    o->backward_fn = [o, px, pg, pb, n, h, xhat = std::move(xhat), rstd = std::move(rstd)] {
      const auto& dy = o->grad;
      if (pg->requires_grad || pb->requires_grad) {
        auto& gg = pg->ensure_grad();
        auto& gb = pb->ensure_grad();
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < h; ++c) {
            gg[c] += dy[r * h + c] * xhat[r * h + c];
            gb[c] += dy[r * h + c];
          }
        }
      }
      if (!px->requires_grad) return;
      auto& gx = px->ensure_grad();
      const auto& gv = pg->value;
      std::vector<T> dxh(h);
      for (std::size_t r = 0; r < n; ++r) {
        T mean_d = 0, mean_dx = 0;
        for (std::size_t c = 0; c < h; ++c) {
          dxh[c] = dy[r * h + c] * gv[c];
          mean_d += dxh[c];
          mean_dx += dxh[c] * xhat[r * h + c];
        }
        mean_d /= static_cast<T>(h);
        mean_dx /= static_cast<T>(h);
        for (std::size_t c = 0; c < h; ++c) {
          gx[r * h + c] += rstd[r] * (dxh[c] - mean_d - xhat[r * h + c] * mean_dx);
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  Tensor<T> out = make_result<T>(x.shape(), {&x});
  auto& y = out.node()->value;
  const auto& xv = x.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = xv[i];
    y[i] = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  }
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* px = x.node();
    o->backward_fn = [o, px] {
      auto& g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = px->value[i];
        const T t = std::tanh(kC * (v + kA * v * v * v));
        const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * kC * (T(1) + T(3) * kA * v * v);
        g[i] += o->grad[i] * d;
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_2d(x, "softmax_rows", "x");
  const std::size_t n = x.dim(0), v = x.dim(1);
  Tensor<T> out = make_result<T>({n, v}, {&x});
  auto& y = out.node()->value;
  const auto& xv = x.node()->value;
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = xv.data() + r * v;
    T* dst = y.data() + r * v;
    const T mx = *std::max_element(row, row + v);
    T total = 0;
    for (std::size_t c = 0; c < v; ++c) total += (dst[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < v; ++c) dst[c] /= total;
  }
  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* px = x.node();
    o->backward_fn = [o, px, n, v] {
      auto& g = px->ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        const T* p = o->value.data() + r * v;
        const T* dy = o->grad.data() + r * v;
        T dot = 0;
        for (std::size_t c = 0; c < v; ++c) dot += p[c] * dy[c];
        for (std::size_t c = 0; c < v; ++c) g[r * v + c] += p[c] * (dy[c] - dot);
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                           std::span<const std::size_t> segments, std::uint64_t* score_area) {
  require_2d(q, "causal_attention", "q");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    shape_error("causal_attention", "q/k/v shapes differ: " + shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                                        ", " + shape_str(v.shape()));
  }
  const std::size_t n = q.dim(0), h = q.dim(1);
  if (heads <= 0 || h % static_cast<std::size_t>(heads) != 0) {
    shape_error("causal_attention", "width " + std::to_string(h) + " not divisible by " + std::to_string(heads) +
                                        " heads");
  }
  std::size_t total = 0;
  for (auto len : segments) {
    if (len == 0) shape_error("causal_attention", "empty segment");
    total += len;
  }
  if (total != n) {
    shape_error("causal_attention", "segments cover " + std::to_string(total) + " of " + std::to_string(n) + " rows");
  }
  const std::size_t hd = h / static_cast<std::size_t>(heads);
  const T scale_f = T(1) / std::sqrt(static_cast<T>(hd));

  Tensor<T> out = make_result<T>({n, h}, {&q, &k, &v});
  const auto& qv = q.node()->value;
  const auto& kv = k.node()->value;
  const auto& vv = v.node()->value;
  auto& y = out.node()->value;

  // Probabilities per (segment, head), each a len x len block (upper part zero).
  std::vector<std::size_t> prob_offset(segments.size());
  std::size_t prob_total = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    prob_offset[s] = prob_total;
    prob_total += static_cast<std::size_t>(heads) * segments[s] * segments[s];
  }
  std::vector<T> probs(prob_total, T(0));

  std::size_t start = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const std::size_t len = segments[s];
    if (score_area) *score_area += static_cast<std::uint64_t>(len) * len;
    for (int hh = 0; hh < heads; ++hh) {
      T* pblock = probs.data() + prob_offset[s] + static_cast<std::size_t>(hh) * len * len;
      const std::size_t col = static_cast<std::size_t>(hh) * hd;
      for (std::size_t i = 0; i < len; ++i) {
        const T* qi = qv.data() + (start + i) * h + col;
        T* prow = pblock + i * len;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const T* kj = kv.data() + (start + j) * h + col;
          T dot = 0;
          for (std::size_t c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          prow[j] = dot * scale_f;
          mx = std::max(mx, prow[j]);
        }
        T denom = 0;
        for (std::size_t j = 0; j <= i; ++j) denom += (prow[j] = std::exp(prow[j] - mx));
        T* yi = y.data() + (start + i) * h + col;
        for (std::size_t j = 0; j <= i; ++j) {
          prow[j] /= denom;
          const T* vj = vv.data() + (start + j) * h + col;
          for (std::size_t c = 0; c < hd; ++c) yi[c] += prow[j] * vj[c];
        }
      }
    }
    start += len;
  }

  if (out.requires_grad()) {
    Node<T>* o = out.node();
    Node<T>* pq = q.node();
    Node<T>* pk = k.node();
    Node<T>* pv = v.node();
    std::vector<std::size_t> segs(segments.begin(), segments.end());
    o->backward_fn = [o, pq, pk, pv, heads, h, hd, scale_f, segs = std::move(segs), probs = std::move(probs),
                      prob_offset = std::move(prob_offset)] {
      const auto& dy = o->grad;
      auto& gq = pq->ensure_grad();
      auto& gk = pk->ensure_grad();
      auto& gv = pv->ensure_grad();
      std::vector<T> dp;
      std::size_t start = 0;
      for (std::size_t s = 0; s < segs.size(); ++s) {
        const std::size_t len = segs[s];
        dp.assign(len, T(0));
        for (int hh = 0; hh < heads; ++hh) {
          const T* pblock = probs.data() + prob_offset[s] + static_cast<std::size_t>(hh) * len * len;
          const std::size_t col = static_cast<std::size_t>(hh) * hd;
          for (std::size_t i = 0; i < len; ++i) {
            const T* prow = pblock + i * len;
            const T* dyi = dy.data() + (start + i) * h + col;
            T weighted = 0;
            for (std::size_t j = 0; j <= i; ++j) {
              const T* vj = pv->value.data() + (start + j) * h + col;
              T d = 0;
              for (std::size_t c = 0; c < hd; ++c) d += dyi[c] * vj[c];
              dp[j] = d;
              weighted += prow[j] * d;
              T* gvj = gv.data() + (start + j) * h + col;
              for (std::size_t c = 0; c < hd; ++c) gvj[c] += prow[j] * dyi[c];
            }
            const T* qi = pq->value.data() + (start + i) * h + col;
            T* gqi = gq.data() + (start + i) * h + col;
            for (std::size_t j = 0; j <= i; ++j) {
              const T ds = prow[j] * (dp[j] - weighted) * scale_f;
              const T* kj = pk->value.data() + (start + j) * h + col;
              T* gkj = gk.data() + (start + j) * h + col;
              for (std::size_t c = 0; c < hd; ++c) {
                gqi[c] += ds * kj[c];
                gkj[c] += ds * qi[c];
              }
            }
          }
        }
        start += len;
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets, int ignore_id) {
  require_2d(logits, "cross_entropy", "logits");
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != n) {
    shape_error("cross_entropy", std::to_string(targets.size()) + " targets for " + std::to_string(n) + " rows");
  }
  std::size_t counted = 0;
  for (int t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      shape_error("cross_entropy", "target " + std::to_string(t) + " outside " + std::to_string(v) + " classes");
    }
    ++counted;
  }
  if (counted == 0) throw Error(Errc::EmptyTarget, "every target position is ignored");

  Tensor<T> out = make_result<T>({1}, {&logits});
  const auto& lv = logits.node()->value;
  const bool track = out.requires_grad();
  std::vector<T> probs(track ? n * v : 0);
  // Accumulate in double so the float path matches the double path closely.
  double total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] == ignore_id) continue;
    const T* row = lv.data() + r * v;
    const T mx = *std::max_element(row, row + v);
    T denom = 0;
    for (std::size_t c = 0; c < v; ++c) denom += std::exp(row[c] - mx);
    const T lse = mx + std::log(denom);
    total += static_cast<double>(lse - row[targets[r]]);
    if (track) {
      for (std::size_t c = 0; c < v; ++c) probs[r * v + c] = std::exp(row[c] - lse);
    }
  }
  out.node()->value[0] = static_cast<T>(total / static_cast<double>(counted));
  if (track) {
    Node<T>* o = out.node();
    Node<T>* pl = logits.node();
    std::vector<int> tg(targets.begin(), targets.end());
    o->backward_fn = [o, pl, n, v, counted, ignore_id, tg = std::move(tg), probs = std::move(probs)] {
      auto& g = pl->ensure_grad();
      const T coef = o->grad[0] / static_cast<T>(counted);
      for (std::size_t r = 0; r < n; ++r) {
        if (tg[r] == ignore_id) continue;
        for (std::size_t c = 0; c < v; ++c) {
          const T onehot = static_cast<int>(c) == tg[r] ? T(1) : T(0);
          g[r * v + c] += coef * (probs[r * v + c] - onehot);
        }
      }
    };
  }
  return out;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    shape_error("backward", "loss must be a scalar");
  }
  if (!loss.requires_grad()) return;

  // Post-order DFS. Nodes only ever point at nodes created before them, so
  // the graph is acyclic by construction.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn();
  }
  for (Node<T>* node : order) {
    node->backward_fn = nullptr;
    node->parents.clear();
  }
}

#define TUNES_INSTANTIATE(T)                                                                                   \
  template class Tensor<T>;                                                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const int>);                                      \
  template Tensor<T> concat_rows(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> gelu(const Tensor<T>&);                                                                   \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                                           \
  template Tensor<T> causal_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,               \
                                      std::span<const std::size_t>, std::uint64_t*);                           \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>, int);                               \
  template void backward(const Tensor<T>&);

TUNES_INSTANTIATE(float)
TUNES_INSTANTIATE(double)

#undef TUNES_INSTANTIATE

}  // namespace tunes::nn
