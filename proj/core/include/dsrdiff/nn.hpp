#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dsrdiff/tensor.hpp"

namespace dsrdiff {

// Visits every learnable tensor under a dotted name ("stem.w", "rb0.c1.b", ...).
using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

// 2-D convolution layer; weights live in {Cout, kh, kw, Cin/groups} order.
struct Conv2d {
  Tensor w, b;
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 0, groups = 1;

  static Conv2d make(int in_ch, int out_ch, int ksize, RandomEngine& rng,
                     int stride = 1, int pad = -1 /* -1: same for stride 1 */,
                     int groups = 1, bool zero_init = false);
  Tensor operator()(const Tensor& x) const;
  void zero();
  int64_t param_count() const { return w.size() + b.size(); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct Linear {
  Tensor w, b;  // w: {out, in}
  static Linear make(int in, int out, RandomEngine& rng, bool zero_init = false);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Per-pixel normalization across channels with learnable affine.
struct LayerNorm {
  Tensor gamma, beta;
  static LayerNorm make(int channels);
  Tensor operator()(const Tensor& x) const { return layer_norm_hwc(x, gamma, beta); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// conv3x3 -> ReLU -> conv3x3 with identity skip. The second conv starts at
// zero so a fresh block is the identity map.
struct ResBlock {
  Conv2d c1, c2;
  static ResBlock make(int channels, RandomEngine& rng);
  Tensor operator()(const Tensor& x) const { return add(x, c2(relu(c1(x)))); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Uniform He-style init bounds used by conv/linear layers.
double init_bound(int fan_in);

}  // namespace dsrdiff
