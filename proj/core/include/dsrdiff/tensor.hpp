#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsrdiff/common.hpp"
#include "dsrdiff/random.hpp"

namespace dsrdiff {

// Shapes are dense row-major. Feature maps are {H, W, C}, matrices {R, C},
// vectors {N}. Index of (y, x, c) in an {H, W, C} tensor: (y*W + x)*C + c.
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // pushes this->grad into parents' grads

  double* grad_data();
};

// Value-semantic handle to an autograd tape node; copies alias the node.
// All arithmetic is double precision end to end: the schedule algebra needs
// it and the finite-difference test harness certifies the same code path it
// trains with.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_vec(Shape shape, std::vector<double> v,
                         bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }

  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }
  double item() const;

  double* grad() { return node_->grad_data(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void clear_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  // Deep copy of the values as a fresh constant leaf.
  Tensor detach() const;

  void fill_uniform(RandomEngine& rng, double lo, double hi);
  void fill_normal(RandomEngine& rng, double stddev = 1.0);

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op_result(Shape shape,
                               std::vector<const Tensor*> parents);
};

// Grad recording is on by default; a NoGradGuard suspends it for a scope
// (inference paths build no tape).
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse-mode sweep from a scalar root. Grads accumulate until cleared.
void backward(const Tensor& root);

// ---- elementwise / algebra ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp01(const Tensor& a);

// Multiplies every element of a by the idx-th entry of the 1-D tensor s.
Tensor mul_by_entry(const Tensor& a, const Tensor& s, int idx);

// ---- reductions / losses ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor l1_loss(const Tensor& a, const Tensor& b);  // mean |a - b|
Tensor mse_loss(const Tensor& a, const Tensor& b);

// ---- shape plumbing ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_channels(const std::vector<Tensor>& parts);  // {H,W,Ci}
Tensor slice_channels(const Tensor& a, int c0, int c1);
Tensor concat_vec(const std::vector<Tensor>& parts);  // 1-D
Tensor slice_rows(const Tensor& a, int r0, int r1);   // {R,C}
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor transpose2d(const Tensor& a);
Tensor hwc_to_chw(const Tensor& a);                 // {H,W,C} -> {C, H*W}
Tensor chw_to_hwc(const Tensor& a, int h, int w);   // {C, H*W} -> {H,W,C}

// ---- matrix ops ----
Tensor matmul(const Tensor& a, const Tensor& b);     // {m,k} x {k,n}
Tensor softmax_rows(const Tensor& a);                // {m,n}
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);

// ---- spatial ops on {H,W,C} ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, int groups);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // {N}
Tensor layer_norm_hwc(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-6);
Tensor max_pool2d(const Tensor& x, int ksize, int stride);
// Bilinear resampling at output pixel centers (align-corners-false, border
// clamp). Exact identity when target size equals source size.
Tensor bilinear_resize(const Tensor& x, int th, int tw);
// Replicates each cell of a {K,K,C} map over its rounded-partition region of
// the {th,tw} target grid.
Tensor nearest_upsample_partition(const Tensor& cells, int th, int tw);
// Mean over each cell of the rounded K x K partition: {H,W,C} -> {K,K,C}.
Tensor block_mean_pool(const Tensor& x, int k);
// Repeats a {1,1,C} cell over a {K,K,C} grid.
Tensor broadcast_cells(const Tensor& cell, int k);
// Space-to-channel: {H,W,c} -> {H/s, W/s, c*s*s}; out channel c*s*s + dy*s + dx.
Tensor pixel_unshuffle(const Tensor& x, int s);
Tensor pixel_shuffle(const Tensor& x, int s);  // exact inverse

// Guidance vector layout <-> spatial cells. A guidance vector stores, for
// channel c and cell (by, bx), element c*K*K + by*K + bx.
Tensor guidance_to_map(const Tensor& g, int k, int c);   // {K*K*C} -> {K,K,C}
Tensor map_to_guidance(const Tensor& cells);             // {K,K,C} -> {K*K*C}

// Rounded near-equal partition of n into k cells; returns k+1 boundaries.
std::vector<int> partition_bounds(int n, int k);

}  // namespace dsrdiff
