#include "dsrdiff/nn.hpp"

#include <cmath>

namespace dsrdiff {

double init_bound(int fan_in) { return std::sqrt(6.0 / fan_in); }

Conv2d Conv2d::make(int in_ch, int out_ch, int ksize, RandomEngine& rng,
                    int stride, int pad, int groups, bool zero_init) {
  require(in_ch % groups == 0 && out_ch % groups == 0, "Conv2d: bad groups");
  Conv2d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.ksize = ksize;
  c.stride = stride;
  c.pad = pad < 0 ? ksize / 2 : pad;
  c.groups = groups;
  const int cpg = in_ch / groups;
  c.w = Tensor::zeros({out_ch, ksize, ksize, cpg}, true);
  c.b = Tensor::zeros({out_ch}, true);
  if (!zero_init) {
    const double bw = init_bound(cpg * ksize * ksize);
    c.w.fill_uniform(rng, -bw, bw);
    const double bb = 1.0 / std::sqrt(static_cast<double>(cpg) * ksize * ksize);
    c.b.fill_uniform(rng, -bb, bb);
  }
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const {
  return conv2d(x, w, b, stride, pad, groups);
}

void Conv2d::zero() {
  std::fill(w.data(), w.data() + w.size(), 0.0);
  std::fill(b.data(), b.data() + b.size(), 0.0);
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w", w);
  v(prefix + ".b", b);
}

Linear Linear::make(int in, int out, RandomEngine& rng, bool zero_init) {
  Linear l;
  l.w = Tensor::zeros({out, in}, true);
  l.b = Tensor::zeros({out}, true);
  if (!zero_init) {
    const double bw = init_bound(in);
    l.w.fill_uniform(rng, -bw, bw);
    const double bb = 1.0 / std::sqrt(static_cast<double>(in));
    l.b.fill_uniform(rng, -bb, bb);
  }
  return l;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w", w);
  v(prefix + ".b", b);
}

LayerNorm LayerNorm::make(int channels) {
  LayerNorm ln;
  ln.gamma = Tensor::full({channels}, 1.0, true);
  ln.beta = Tensor::zeros({channels}, true);
  return ln;
}

void LayerNorm::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".gamma", gamma);
  v(prefix + ".beta", beta);
}

ResBlock ResBlock::make(int channels, RandomEngine& rng) {
  ResBlock rb;
  rb.c1 = Conv2d::make(channels, channels, 3, rng);
  rb.c2 = Conv2d::make(channels, channels, 3, rng, 1, -1, 1, /*zero_init=*/true);
  return rb;
}

void ResBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  c1.visit(prefix + ".c1", v);
  c2.visit(prefix + ".c2", v);
}

}  // namespace dsrdiff
