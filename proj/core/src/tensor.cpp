#include "dsrdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace dsrdiff {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

double* TensorNode::grad_data() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor make_op_result(Shape shape, std::vector<const Tensor*> parents) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(numel(n->shape)), 0.0);
  bool rg = false;
  if (g_grad_enabled) {
    for (const Tensor* p : parents) rg = rg || p->requires_grad();
  }
  n->requires_grad = rg;
  if (rg) {
    for (const Tensor* p : parents) n->parents.push_back(p->node());
  }
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t = make_op_result(std::move(shape), {});
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node_->value.begin(), t.node_->value.end(), v);
  return t;
}

Tensor Tensor::from_vec(Shape shape, std::vector<double> v, bool requires_grad) {
  require(numel(shape) == static_cast<int64_t>(v.size()),
          "from_vec: shape " + shape_str(shape) + " does not match data size " +
              std::to_string(v.size()));
  Tensor t = zeros(std::move(shape), requires_grad);
  t.node_->value = std::move(v);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_vec({1}, {v}, requires_grad);
}

double Tensor::item() const {
  require(size() == 1, "item: tensor is not scalar");
  return node_->value[0];
}

void Tensor::clear_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  Tensor t = make_op_result(node_->shape, {});
  t.node_->value = node_->value;
  return t;
}

void Tensor::fill_uniform(RandomEngine& rng, double lo, double hi) {
  for (auto& x : node_->value) x = rng.uniform(lo, hi);
}

void Tensor::fill_normal(RandomEngine& rng, double stddev) {
  for (auto& x : node_->value) x = stddev * rng.normal();
}

void backward(const Tensor& root) {
  require(root.defined() && root.size() == 1, "backward: root must be a scalar");
  TensorNode* r = root.node().get();
  if (!r->requires_grad) return;

  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* n;
    size_t next;
  };
  std::vector<Frame> stack{{r, 0}};
  visited.insert(r);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      TensorNode* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  r->grad_data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop();
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

// Elementwise op with closed-form local derivative.
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd f, Bwd dfdx) {
  Tensor out = make_op_result(a.shape(), {&a});
  const double* xa = a.data();
  double* xo = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) xo[i] = f(xa[i]);
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa, dfdx]() {
      if (!pa->requires_grad) return;
      double* ga = pa->grad_data();
      const double* g = self->grad.data();
      const double* x = pa->value.data();
      for (size_t i = 0; i < self->value.size(); ++i) ga[i] += g[i] * dfdx(x[i]);
    };
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_op_result(a.shape(), {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double* xo = out.data();
  for (int64_t i = 0; i < a.size(); ++i) xo[i] = xa[i] + xb[i];
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb]() {
      const double* g = self->grad.data();
      const size_t n = self->value.size();
      if (pa->requires_grad) {
        double* ga = pa->grad_data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_data();
        for (size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_op_result(a.shape(), {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double* xo = out.data();
  for (int64_t i = 0; i < a.size(); ++i) xo[i] = xa[i] - xb[i];
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb]() {
      const double* g = self->grad.data();
      const size_t n = self->value.size();
      if (pa->requires_grad) {
        double* ga = pa->grad_data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_data();
        for (size_t i = 0; i < n; ++i) gb[i] -= g[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_op_result(a.shape(), {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double* xo = out.data();
  for (int64_t i = 0; i < a.size(); ++i) xo[i] = xa[i] * xb[i];
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb]() {
      const double* g = self->grad.data();
      const size_t n = self->value.size();
      if (pa->requires_grad) {
        double* ga = pa->grad_data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_data();
        for (size_t i = 0; i < n; ++i) gb[i] += g[i] * pa->value[i];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return unary_op(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double x) {
                    const double s = 1.0 / (1.0 + std::exp(-x));
                    return s * (1.0 - s);
                  });
}

Tensor abs(const Tensor& a) {
  return unary_op(a, [](double x) { return std::fabs(x); },
                  [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; },
                  [](double x) { return 2.0 * x; });
}

Tensor clamp01(const Tensor& a) {
  return unary_op(a, [](double x) { return std::clamp(x, 0.0, 1.0); },
                  [](double x) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; });
}

Tensor mul_by_entry(const Tensor& a, const Tensor& s, int idx) {
  require(s.shape().size() == 1 && idx >= 0 && idx < s.dim(0),
          "mul_by_entry: bad scalar index");
  Tensor out = make_op_result(a.shape(), {&a, &s});
  const double c = s.data()[idx];
  const double* xa = a.data();
  double* xo = out.data();
  for (int64_t i = 0; i < a.size(); ++i) xo[i] = c * xa[i];
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* ps = s.node().get();
    self->backprop = [self, pa, ps, idx]() {
      const double* g = self->grad.data();
      const size_t n = self->value.size();
      const double c = ps->value[static_cast<size_t>(idx)];
      if (pa->requires_grad) {
        double* ga = pa->grad_data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i] * c;
      }
      if (ps->requires_grad) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) acc += g[i] * pa->value[i];
        ps->grad_data()[static_cast<size_t>(idx)] += acc;
      }
    };
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = make_op_result({1}, {&a});
  double acc = 0.0;
  const double* xa = a.data();
  for (int64_t i = 0; i < a.size(); ++i) acc += xa[i];
  out.data()[0] = acc;
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa]() {
      if (!pa->requires_grad) return;
      const double g = self->grad[0];
      double* ga = pa->grad_data();
      for (size_t i = 0; i < pa->value.size(); ++i) ga[i] += g;
    };
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  Tensor out = make_op_result({1}, {&a});
  double acc = 0.0;
  const double* xa = a.data();
  for (int64_t i = 0; i < a.size(); ++i) acc += xa[i];
  const double inv = 1.0 / static_cast<double>(a.size());
  out.data()[0] = acc * inv;
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa, inv]() {
      if (!pa->requires_grad) return;
      const double g = self->grad[0] * inv;
      double* ga = pa->grad_data();
      for (size_t i = 0; i < pa->value.size(); ++i) ga[i] += g;
    };
  }
  return out;
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "l1_loss");
  Tensor out = make_op_result({1}, {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += std::fabs(xa[i] - xb[i]);
  const double inv = 1.0 / static_cast<double>(a.size());
  out.data()[0] = acc * inv;
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb, inv]() {
      const double g = self->grad[0] * inv;
      const size_t n = pa->value.size();
      for (size_t i = 0; i < n; ++i) {
        const double d = pa->value[i] - pb->value[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (pa->requires_grad) pa->grad_data()[i] += g * s;
        if (pb->requires_grad) pb->grad_data()[i] -= g * s;
      }
    };
  }
  return out;
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse_loss");
  Tensor out = make_op_result({1}, {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = xa[i] - xb[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  out.data()[0] = acc * inv;
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb, inv]() {
      const double g = self->grad[0] * inv;
      const size_t n = pa->value.size();
      for (size_t i = 0; i < n; ++i) {
        const double d = 2.0 * (pa->value[i] - pb->value[i]);
        if (pa->requires_grad) pa->grad_data()[i] += g * d;
        if (pb->requires_grad) pb->grad_data()[i] -= g * d;
      }
    };
  }
  return out;
}

namespace {

// Copy-through op defined by an index map: out[i] = in[map[i]].
Tensor gather_op(const Tensor& a, Shape out_shape, std::vector<int64_t> map) {
  Tensor out = make_op_result(std::move(out_shape), {&a});
  const double* xa = a.data();
  double* xo = out.data();
  for (size_t i = 0; i < map.size(); ++i) xo[i] = xa[map[i]];
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa, map = std::move(map)]() {
      if (!pa->requires_grad) return;
      double* ga = pa->grad_data();
      const double* g = self->grad.data();
      for (size_t i = 0; i < map.size(); ++i) ga[map[i]] += g[i];
    };
  }
  return out;
}

}  // namespace

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape: element count mismatch");
  std::vector<int64_t> map(static_cast<size_t>(a.size()));
  for (size_t i = 0; i < map.size(); ++i) map[i] = static_cast<int64_t>(i);
  return gather_op(a, std::move(shape), std::move(map));
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels: empty input");
  const int h = parts[0].dim(0), w = parts[0].dim(1);
  int ctotal = 0;
  std::vector<const Tensor*> refs;
  for (const auto& p : parts) {
    require(p.shape().size() == 3 && p.dim(0) == h && p.dim(1) == w,
            "concat_channels: spatial mismatch");
    ctotal += p.dim(2);
    refs.push_back(&p);
  }
  Tensor out = make_op_result({h, w, ctotal}, refs);
  double* xo = out.data();
  int coff = 0;
  for (const auto& p : parts) {
    const int c = p.dim(2);
    const double* xp = p.data();
    for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
      for (int i = 0; i < c; ++i) xo[px * ctotal + coff + i] = xp[px * c + i];
    }
    coff += c;
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    std::vector<TensorNode*> ps;
    for (const auto& p : parts) ps.push_back(p.node().get());
    self->backprop = [self, ps, h, w, ctotal]() {
      const double* g = self->grad.data();
      int coff = 0;
      for (TensorNode* p : ps) {
        const int c = p->shape[2];
        if (p->requires_grad) {
          double* gp = p->grad_data();
          for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
            for (int i = 0; i < c; ++i) gp[px * c + i] += g[px * ctotal + coff + i];
          }
        }
        coff += c;
      }
    };
  }
  return out;
}

Tensor slice_channels(const Tensor& a, int c0, int c1) {
  require(a.shape().size() == 3 && 0 <= c0 && c0 < c1 && c1 <= a.dim(2),
          "slice_channels: bad range");
  const int h = a.dim(0), w = a.dim(1), c = a.dim(2), cs = c1 - c0;
  std::vector<int64_t> map(static_cast<size_t>(h) * w * cs);
  int64_t k = 0;
  for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
    for (int i = c0; i < c1; ++i) map[static_cast<size_t>(k++)] = px * c + i;
  }
  return gather_op(a, {h, w, cs}, std::move(map));
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_vec: empty input");
  int64_t total = 0;
  std::vector<const Tensor*> refs;
  for (const auto& p : parts) {
    require(p.shape().size() == 1, "concat_vec: inputs must be 1-D");
    total += p.size();
    refs.push_back(&p);
  }
  Tensor out = make_op_result({static_cast<int>(total)}, refs);
  double* xo = out.data();
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), xo + off);
    off += p.size();
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    std::vector<TensorNode*> ps;
    for (const auto& p : parts) ps.push_back(p.node().get());
    self->backprop = [self, ps]() {
      const double* g = self->grad.data();
      size_t off = 0;
      for (TensorNode* p : ps) {
        if (p->requires_grad) {
          double* gp = p->grad_data();
          for (size_t i = 0; i < p->value.size(); ++i) gp[i] += g[off + i];
        }
        off += p->value.size();
      }
    };
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  require(a.shape().size() == 2 && 0 <= r0 && r0 < r1 && r1 <= a.dim(0),
          "slice_rows: bad range");
  const int cols = a.dim(1);
  std::vector<int64_t> map(static_cast<size_t>(r1 - r0) * cols);
  int64_t k = 0;
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < cols; ++c) {
      map[static_cast<size_t>(k++)] = static_cast<int64_t>(r) * cols + c;
    }
  }
  return gather_op(a, {r1 - r0, cols}, std::move(map));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  const int cols = parts[0].dim(1);
  int rows = 0;
  std::vector<const Tensor*> refs;
  for (const auto& p : parts) {
    require(p.shape().size() == 2 && p.dim(1) == cols, "concat_rows: column mismatch");
    rows += p.dim(0);
    refs.push_back(&p);
  }
  Tensor out = make_op_result({rows, cols}, refs);
  double* xo = out.data();
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), xo + off);
    off += p.size();
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    std::vector<TensorNode*> ps;
    for (const auto& p : parts) ps.push_back(p.node().get());
    self->backprop = [self, ps]() {
      const double* g = self->grad.data();
      size_t off = 0;
      for (TensorNode* p : ps) {
        if (p->requires_grad) {
          double* gp = p->grad_data();
          for (size_t i = 0; i < p->value.size(); ++i) gp[i] += g[off + i];
        }
        off += p->value.size();
      }
    };
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  require(a.shape().size() == 2, "transpose2d: rank-2 required");
  const int r = a.dim(0), c = a.dim(1);
  std::vector<int64_t> map(static_cast<size_t>(r) * c);
  int64_t k = 0;
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) map[static_cast<size_t>(k++)] = static_cast<int64_t>(i) * c + j;
  }
  return gather_op(a, {c, r}, std::move(map));
}

Tensor hwc_to_chw(const Tensor& a) {
  require(a.shape().size() == 3, "hwc_to_chw: rank-3 required");
  const int h = a.dim(0), w = a.dim(1), c = a.dim(2);
  std::vector<int64_t> map(static_cast<size_t>(h) * w * c);
  int64_t k = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
      map[static_cast<size_t>(k++)] = px * c + ch;
    }
  }
  return gather_op(a, {c, h * w}, std::move(map));
}

Tensor chw_to_hwc(const Tensor& a, int h, int w) {
  require(a.shape().size() == 2 && a.dim(1) == h * w, "chw_to_hwc: size mismatch");
  const int c = a.dim(0);
  std::vector<int64_t> map(static_cast<size_t>(h) * w * c);
  int64_t k = 0;
  for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
    for (int ch = 0; ch < c; ++ch) {
      map[static_cast<size_t>(k++)] = static_cast<int64_t>(ch) * h * w + px;
    }
  }
  return gather_op(a, {h, w, c}, std::move(map));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = make_op_result({m, n}, {&a, &b});
  const double* xa = a.data();
  const double* xb = b.data();
  double* xo = out.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = xa[static_cast<int64_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = xb + static_cast<int64_t>(p) * n;
      double* orow = xo + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, pa, pb, m, k, n]() {
      const double* g = self->grad.data();
      if (pa->requires_grad) {
        double* ga = pa->grad_data();
        const double* vb = pb->value.data();
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = g + static_cast<int64_t>(i) * n;
            const double* brow = vb + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[static_cast<int64_t>(i) * k + p] += acc;
          }
        }
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_data();
        const double* va = pa->value.data();
        for (int p = 0; p < k; ++p) {
          for (int i = 0; i < m; ++i) {
            const double av = va[static_cast<int64_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* grow = g + static_cast<int64_t>(i) * n;
            double* brow = gb + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    };
  }
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require(a.shape().size() == 2, "softmax_rows: rank-2 required");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_op_result({m, n}, {&a});
  const double* xa = a.data();
  double* xo = out.data();
  for (int i = 0; i < m; ++i) {
    const double* row = xa + static_cast<int64_t>(i) * n;
    double* orow = xo + static_cast<int64_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= denom;
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa, m, n]() {
      if (!pa->requires_grad) return;
      double* ga = pa->grad_data();
      for (int i = 0; i < m; ++i) {
        const double* s = self->value.data() + static_cast<int64_t>(i) * n;
        const double* g = self->grad.data() + static_cast<int64_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * s[j];
        double* grow = ga + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) grow[j] += s[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  require(a.shape().size() == 2, "l2_normalize_rows: rank-2 required");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_op_result({m, n}, {&a});
  const double* xa = a.data();
  double* xo = out.data();
  for (int i = 0; i < m; ++i) {
    const double* row = xa + static_cast<int64_t>(i) * n;
    double* orow = xo + static_cast<int64_t>(i) * n;
    double ss = eps;
    for (int j = 0; j < n; ++j) ss += row[j] * row[j];
    const double inv = 1.0 / std::sqrt(ss);
    for (int j = 0; j < n; ++j) orow[j] = row[j] * inv;
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* pa = a.node().get();
    self->backprop = [self, pa, m, n, eps]() {
      if (!pa->requires_grad) return;
      double* ga = pa->grad_data();
      for (int i = 0; i < m; ++i) {
        const double* x = pa->value.data() + static_cast<int64_t>(i) * n;
        const double* g = self->grad.data() + static_cast<int64_t>(i) * n;
        double ss = eps, dot = 0.0;
        for (int j = 0; j < n; ++j) ss += x[j] * x[j];
        for (int j = 0; j < n; ++j) dot += g[j] * x[j];
        const double inv = 1.0 / std::sqrt(ss);
        const double inv3 = inv * inv * inv;
        double* grow = ga + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) grow[j] += g[j] * inv - x[j] * dot * inv3;
      }
    };
  }
  return out;
}

// Weight layout {Cout, kh, kw, Cin/groups}; input/output {H, W, C}.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, int groups) {
  require(x.shape().size() == 3, "conv2d: input must be {H,W,C}");
  require(w.shape().size() == 4, "conv2d: weight must be {Cout,kh,kw,Cin/g}");
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(1), kw = w.dim(2), cpg = w.dim(3);
  require(groups >= 1 && cin % groups == 0 && cout % groups == 0,
          "conv2d: bad group count");
  require(cpg == cin / groups, "conv2d: weight channels do not match input");
  require(!b.defined() || (b.shape().size() == 1 && b.dim(0) == cout),
          "conv2d: bad bias shape");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  require(ho >= 1 && wo >= 1, "conv2d: output would be empty");

  std::vector<const Tensor*> parents{&x, &w};
  if (b.defined()) parents.push_back(&b);
  Tensor out = make_op_result({ho, wo, cout}, parents);

  const int copg = cout / groups;
  const double* xv = x.data();
  const double* wv = w.data();
  const double* bv = b.defined() ? b.data() : nullptr;
  double* ov = out.data();

  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* opix = ov + (static_cast<int64_t>(oy) * wo + ox) * cout;
      if (bv) {
        for (int oc = 0; oc < cout; ++oc) opix[oc] = bv[oc];
      }
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= wd) continue;
          const double* xpix = xv + (static_cast<int64_t>(iy) * wd + ix) * cin;
          for (int g = 0; g < groups; ++g) {
            const double* xg = xpix + g * cpg;
            for (int ocg = 0; ocg < copg; ++ocg) {
              const int oc = g * copg + ocg;
              const double* wrow =
                  wv + ((static_cast<int64_t>(oc) * kh + ky) * kw + kx) * cpg;
              double acc = 0.0;
              for (int ic = 0; ic < cpg; ++ic) acc += xg[ic] * wrow[ic];
              opix[oc] += acc;
            }
          }
        }
      }
    }
  }

  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    TensorNode* pw = w.node().get();
    TensorNode* pb = b.defined() ? b.node().get() : nullptr;
    self->backprop = [self, px, pw, pb, h, wd, cin, cout, kh, kw, cpg, copg,
                      stride, pad, groups]() {
      const int ho = self->shape[0], wo = self->shape[1];
      const double* g = self->grad.data();
      const double* xv = px->value.data();
      const double* wv = pw->value.data();
      double* gx = px->requires_grad ? px->grad_data() : nullptr;
      double* gw = pw->requires_grad ? pw->grad_data() : nullptr;
      double* gb = (pb && pb->requires_grad) ? pb->grad_data() : nullptr;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const double* gpix = g + (static_cast<int64_t>(oy) * wo + ox) * cout;
          if (gb) {
            for (int oc = 0; oc < cout; ++oc) gb[oc] += gpix[oc];
          }
          if (!gx && !gw) continue;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              const int64_t xoff = (static_cast<int64_t>(iy) * wd + ix) * cin;
              for (int grp = 0; grp < groups; ++grp) {
                for (int ocg = 0; ocg < copg; ++ocg) {
                  const int oc = grp * copg + ocg;
                  const double go = gpix[oc];
                  if (go == 0.0) continue;
                  const int64_t woff =
                      ((static_cast<int64_t>(oc) * kh + ky) * kw + kx) * cpg;
                  for (int ic = 0; ic < cpg; ++ic) {
                    const int64_t xi = xoff + grp * cpg + ic;
                    if (gx) gx[xi] += go * wv[woff + ic];
                    if (gw) gw[woff + ic] += go * xv[xi];
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.shape().size() == 1 && w.shape().size() == 2 && w.dim(1) == x.dim(0),
          "linear: incompatible shapes");
  require(b.shape().size() == 1 && b.dim(0) == w.dim(0), "linear: bad bias");
  const int m = w.dim(0), n = w.dim(1);
  Tensor out = make_op_result({m}, {&x, &w, &b});
  const double* xv = x.data();
  const double* wv = w.data();
  const double* bv = b.data();
  double* ov = out.data();
  for (int i = 0; i < m; ++i) {
    double acc = bv[i];
    const double* wrow = wv + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += wrow[j] * xv[j];
    ov[i] = acc;
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    TensorNode* pw = w.node().get();
    TensorNode* pb = b.node().get();
    self->backprop = [self, px, pw, pb, m, n]() {
      const double* g = self->grad.data();
      if (pb->requires_grad) {
        double* gb = pb->grad_data();
        for (int i = 0; i < m; ++i) gb[i] += g[i];
      }
      if (pw->requires_grad) {
        double* gw = pw->grad_data();
        for (int i = 0; i < m; ++i) {
          double* grow = gw + static_cast<int64_t>(i) * n;
          for (int j = 0; j < n; ++j) grow[j] += g[i] * px->value[j];
        }
      }
      if (px->requires_grad) {
        double* gx = px->grad_data();
        for (int i = 0; i < m; ++i) {
          const double* wrow = pw->value.data() + static_cast<int64_t>(i) * n;
          for (int j = 0; j < n; ++j) gx[j] += g[i] * wrow[j];
        }
      }
    };
  }
  return out;
}

Tensor layer_norm_hwc(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps) {
  require(x.shape().size() == 3, "layer_norm_hwc: input must be {H,W,C}");
  const int c = x.dim(2);
  require(gamma.shape().size() == 1 && gamma.dim(0) == c &&
              beta.shape().size() == 1 && beta.dim(0) == c,
          "layer_norm_hwc: affine params must be {C}");
  Tensor out = make_op_result(x.shape(), {&x, &gamma, &beta});
  const int64_t npix = static_cast<int64_t>(x.dim(0)) * x.dim(1);
  const double* xv = x.data();
  const double* gv = gamma.data();
  const double* bv = beta.data();
  double* ov = out.data();
  for (int64_t p = 0; p < npix; ++p) {
    const double* xp = xv + p * c;
    double* op = ov + p * c;
    double mu = 0.0;
    for (int i = 0; i < c; ++i) mu += xp[i];
    mu /= c;
    double var = 0.0;
    for (int i = 0; i < c; ++i) {
      const double d = xp[i] - mu;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < c; ++i) op[i] = gv[i] * (xp[i] - mu) * inv + bv[i];
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    TensorNode* pg = gamma.node().get();
    TensorNode* pbt = beta.node().get();
    self->backprop = [self, px, pg, pbt, c, npix, eps]() {
      const double* g = self->grad.data();
      const double* xv = px->value.data();
      const double* gv = pg->value.data();
      double* gx = px->requires_grad ? px->grad_data() : nullptr;
      double* gg = pg->requires_grad ? pg->grad_data() : nullptr;
      double* gb = pbt->requires_grad ? pbt->grad_data() : nullptr;
      std::vector<double> xhat(static_cast<size_t>(c));
      for (int64_t p = 0; p < npix; ++p) {
        const double* xp = xv + p * c;
        const double* gp = g + p * c;
        double mu = 0.0;
        for (int i = 0; i < c; ++i) mu += xp[i];
        mu /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) {
          const double d = xp[i] - mu;
          var += d * d;
        }
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < c; ++i) xhat[static_cast<size_t>(i)] = (xp[i] - mu) * inv;
        if (gg || gb) {
          for (int i = 0; i < c; ++i) {
            if (gg) gg[i] += gp[i] * xhat[static_cast<size_t>(i)];
            if (gb) gb[i] += gp[i];
          }
        }
        if (gx) {
          double s1 = 0.0, s2 = 0.0;
          for (int i = 0; i < c; ++i) {
            const double dxh = gp[i] * gv[i];
            s1 += dxh;
            s2 += dxh * xhat[static_cast<size_t>(i)];
          }
          double* gxp = gx + p * c;
          for (int i = 0; i < c; ++i) {
            const double dxh = gp[i] * gv[i];
            gxp[i] += inv * (dxh - s1 / c - xhat[static_cast<size_t>(i)] * s2 / c);
          }
        }
      }
    };
  }
  return out;
}

// Window is clamped to the map when the map is smaller than ksize, so tiny
// feature maps still pool to one cell instead of erroring.
Tensor max_pool2d(const Tensor& x, int ksize, int stride) {
  require(x.shape().size() == 3, "max_pool2d: input must be {H,W,C}");
  require(ksize >= 1 && stride >= 1, "max_pool2d: bad kernel/stride");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int keh = std::min(ksize, h), kew = std::min(ksize, w);
  const int ho = (h - keh) / stride + 1;
  const int wo = (w - kew) / stride + 1;
  Tensor out = make_op_result({ho, wo, c}, {&x});
  std::vector<int64_t> argmax(static_cast<size_t>(ho) * wo * c);
  const double* xv = x.data();
  double* ov = out.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t bestIdx = -1;
        for (int ky = 0; ky < keh; ++ky) {
          for (int kx = 0; kx < kew; ++kx) {
            const int64_t idx =
                (static_cast<int64_t>(oy * stride + ky) * w + ox * stride + kx) * c + ch;
            if (xv[idx] > best) {
              best = xv[idx];
              bestIdx = idx;
            }
          }
        }
        const int64_t oidx = (static_cast<int64_t>(oy) * wo + ox) * c + ch;
        ov[oidx] = best;
        argmax[static_cast<size_t>(oidx)] = bestIdx;
      }
    }
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    self->backprop = [self, px, argmax = std::move(argmax)]() {
      if (!px->requires_grad) return;
      double* gx = px->grad_data();
      const double* g = self->grad.data();
      for (size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
    };
  }
  return out;
}

namespace {

struct LerpTap {
  int i0, i1;
  double f;  // weight of i1
};

LerpTap bilinear_tap(int o, int target, int source) {
  double pos = (o + 0.5) * static_cast<double>(source) / target - 0.5;
  pos = std::clamp(pos, 0.0, static_cast<double>(source - 1));
  const int i0 = static_cast<int>(pos);
  const int i1 = std::min(i0 + 1, source - 1);
  return {i0, i1, pos - i0};
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int th, int tw) {
  require(x.shape().size() == 3, "bilinear_resize: input must be {H,W,C}");
  require(th >= 1 && tw >= 1, "bilinear_resize: bad target size");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out = make_op_result({th, tw, c}, {&x});
  const double* xv = x.data();
  double* ov = out.data();
  for (int oy = 0; oy < th; ++oy) {
    const LerpTap ty = bilinear_tap(oy, th, h);
    for (int ox = 0; ox < tw; ++ox) {
      const LerpTap tx = bilinear_tap(ox, tw, w);
      const double* p00 = xv + (static_cast<int64_t>(ty.i0) * w + tx.i0) * c;
      const double* p01 = xv + (static_cast<int64_t>(ty.i0) * w + tx.i1) * c;
      const double* p10 = xv + (static_cast<int64_t>(ty.i1) * w + tx.i0) * c;
      const double* p11 = xv + (static_cast<int64_t>(ty.i1) * w + tx.i1) * c;
      double* op = ov + (static_cast<int64_t>(oy) * tw + ox) * c;
      const double w00 = (1 - ty.f) * (1 - tx.f), w01 = (1 - ty.f) * tx.f;
      const double w10 = ty.f * (1 - tx.f), w11 = ty.f * tx.f;
      for (int ch = 0; ch < c; ++ch) {
        op[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    self->backprop = [self, px, h, w, c, th, tw]() {
      if (!px->requires_grad) return;
      double* gx = px->grad_data();
      const double* g = self->grad.data();
      for (int oy = 0; oy < th; ++oy) {
        const LerpTap ty = bilinear_tap(oy, th, h);
        for (int ox = 0; ox < tw; ++ox) {
          const LerpTap tx = bilinear_tap(ox, tw, w);
          const double* gp = g + (static_cast<int64_t>(oy) * tw + ox) * c;
          const double w00 = (1 - ty.f) * (1 - tx.f), w01 = (1 - ty.f) * tx.f;
          const double w10 = ty.f * (1 - tx.f), w11 = ty.f * tx.f;
          for (int ch = 0; ch < c; ++ch) {
            gx[(static_cast<int64_t>(ty.i0) * w + tx.i0) * c + ch] += w00 * gp[ch];
            gx[(static_cast<int64_t>(ty.i0) * w + tx.i1) * c + ch] += w01 * gp[ch];
            gx[(static_cast<int64_t>(ty.i1) * w + tx.i0) * c + ch] += w10 * gp[ch];
            gx[(static_cast<int64_t>(ty.i1) * w + tx.i1) * c + ch] += w11 * gp[ch];
          }
        }
      }
    };
  }
  return out;
}

std::vector<int> partition_bounds(int n, int k) {
  require(n >= 1 && k >= 1, "partition_bounds: bad arguments");
  std::vector<int> b(static_cast<size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    b[static_cast<size_t>(i)] =
        static_cast<int>(std::llround(static_cast<double>(i) * n / k));
  }
  return b;
}

Tensor nearest_upsample_partition(const Tensor& cells, int th, int tw) {
  require(cells.shape().size() == 3 && cells.dim(0) == cells.dim(1),
          "nearest_upsample_partition: cells must be {K,K,C}");
  const int k = cells.dim(0), c = cells.dim(2);
  require(th >= k && tw >= k, "nearest_upsample_partition: target smaller than grid");
  const std::vector<int> bh = partition_bounds(th, k);
  const std::vector<int> bw = partition_bounds(tw, k);
  std::vector<int64_t> map(static_cast<size_t>(th) * tw * c);
  std::vector<int> rowcell(static_cast<size_t>(th)), colcell(static_cast<size_t>(tw));
  for (int i = 0; i < k; ++i) {
    for (int y = bh[static_cast<size_t>(i)]; y < bh[static_cast<size_t>(i) + 1]; ++y)
      rowcell[static_cast<size_t>(y)] = i;
    for (int x = bw[static_cast<size_t>(i)]; x < bw[static_cast<size_t>(i) + 1]; ++x)
      colcell[static_cast<size_t>(x)] = i;
  }
  int64_t m = 0;
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      const int64_t src =
          (static_cast<int64_t>(rowcell[static_cast<size_t>(y)]) * k +
           colcell[static_cast<size_t>(x)]) * c;
      for (int ch = 0; ch < c; ++ch) map[static_cast<size_t>(m++)] = src + ch;
    }
  }
  return gather_op(cells, {th, tw, c}, std::move(map));
}

Tensor block_mean_pool(const Tensor& x, int k) {
  require(x.shape().size() == 3, "block_mean_pool: input must be {H,W,C}");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  require(k >= 1 && k <= h && k <= w,
          "block_mean_pool: grid " + std::to_string(k) + " exceeds map " +
              shape_str(x.shape()));
  const std::vector<int> bh = partition_bounds(h, k);
  const std::vector<int> bw = partition_bounds(w, k);
  Tensor out = make_op_result({k, k, c}, {&x});
  const double* xv = x.data();
  double* ov = out.data();
  for (int by = 0; by < k; ++by) {
    for (int bx = 0; bx < k; ++bx) {
      const int y0 = bh[static_cast<size_t>(by)], y1 = bh[static_cast<size_t>(by) + 1];
      const int x0 = bw[static_cast<size_t>(bx)], x1 = bw[static_cast<size_t>(bx) + 1];
      const double inv = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
      double* op = ov + (static_cast<int64_t>(by) * k + bx) * c;
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int y = y0; y < y1; ++y) {
          for (int xx = x0; xx < x1; ++xx) {
            acc += xv[(static_cast<int64_t>(y) * w + xx) * c + ch];
          }
        }
        op[ch] = acc * inv;
      }
    }
  }
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    TensorNode* px = x.node().get();
    self->backprop = [self, px, h, w, c, k]() {
      if (!px->requires_grad) return;
      const std::vector<int> bh = partition_bounds(h, k);
      const std::vector<int> bw = partition_bounds(w, k);
      double* gx = px->grad_data();
      const double* g = self->grad.data();
      for (int by = 0; by < k; ++by) {
        for (int bx = 0; bx < k; ++bx) {
          const int y0 = bh[static_cast<size_t>(by)], y1 = bh[static_cast<size_t>(by) + 1];
          const int x0 = bw[static_cast<size_t>(bx)], x1 = bw[static_cast<size_t>(bx) + 1];
          const double inv = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
          const double* gp = g + (static_cast<int64_t>(by) * k + bx) * c;
          for (int ch = 0; ch < c; ++ch) {
            const double gv = gp[ch] * inv;
            for (int y = y0; y < y1; ++y) {
              for (int xx = x0; xx < x1; ++xx) {
                gx[(static_cast<int64_t>(y) * w + xx) * c + ch] += gv;
              }
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor broadcast_cells(const Tensor& cell, int k) {
  require(cell.shape().size() == 3 && cell.dim(0) == 1 && cell.dim(1) == 1,
          "broadcast_cells: input must be {1,1,C}");
  const int c = cell.dim(2);
  std::vector<int64_t> map(static_cast<size_t>(k) * k * c);
  int64_t m = 0;
  for (int i = 0; i < k * k; ++i) {
    for (int ch = 0; ch < c; ++ch) map[static_cast<size_t>(m++)] = ch;
  }
  return gather_op(cell, {k, k, c}, std::move(map));
}

Tensor pixel_unshuffle(const Tensor& x, int s) {
  require(x.shape().size() == 3, "pixel_unshuffle: input must be {H,W,C}");
  require(s >= 1, "pixel_unshuffle: bad factor");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  require(h % s == 0 && w % s == 0,
          "pixel_unshuffle: dims " + shape_str(x.shape()) +
              " not divisible by " + std::to_string(s));
  const int ho = h / s, wo = w / s, co = c * s * s;
  std::vector<int64_t> map(static_cast<size_t>(ho) * wo * co);
  int64_t m = 0;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) {
            // out channel ch*s*s + dy*s + dx
            map[static_cast<size_t>(m++)] =
                (static_cast<int64_t>(oy * s + dy) * w + ox * s + dx) * c + ch;
          }
        }
      }
    }
  }
  return gather_op(x, {ho, wo, co}, std::move(map));
}

Tensor pixel_shuffle(const Tensor& x, int s) {
  require(x.shape().size() == 3, "pixel_shuffle: input must be {H,W,C}");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  require(c % (s * s) == 0, "pixel_shuffle: channels not divisible by s^2");
  const int co = c / (s * s), ho = h * s, wo = w * s;
  std::vector<int64_t> map(static_cast<size_t>(ho) * wo * co);
  int64_t m = 0;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const int iy = oy / s, dy = oy % s;
      const int ix = ox / s, dx = ox % s;
      for (int ch = 0; ch < co; ++ch) {
        map[static_cast<size_t>(m++)] =
            (static_cast<int64_t>(iy) * w + ix) * c + ch * s * s + dy * s + dx;
      }
    }
  }
  return gather_op(x, {ho, wo, co}, std::move(map));
}

Tensor guidance_to_map(const Tensor& g, int k, int c) {
  require(g.shape().size() == 1 && g.dim(0) == k * k * c,
          "guidance_to_map: length " + std::to_string(g.defined() ? g.dim(0) : -1) +
              " != K*K*C");
  std::vector<int64_t> map(static_cast<size_t>(k) * k * c);
  int64_t m = 0;
  for (int by = 0; by < k; ++by) {
    for (int bx = 0; bx < k; ++bx) {
      for (int ch = 0; ch < c; ++ch) {
        map[static_cast<size_t>(m++)] = static_cast<int64_t>(ch) * k * k + by * k + bx;
      }
    }
  }
  return gather_op(g, {k, k, c}, std::move(map));
}

Tensor map_to_guidance(const Tensor& cells) {
  require(cells.shape().size() == 3 && cells.dim(0) == cells.dim(1),
          "map_to_guidance: input must be {K,K,C}");
  const int k = cells.dim(0), c = cells.dim(2);
  std::vector<int64_t> map(static_cast<size_t>(k) * k * c);
  int64_t m = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int by = 0; by < k; ++by) {
      for (int bx = 0; bx < k; ++bx) {
        map[static_cast<size_t>(m++)] = (static_cast<int64_t>(by) * k + bx) * c + ch;
      }
    }
  }
  return gather_op(cells, {k * k * c}, std::move(map));
}

}  // namespace dsrdiff
