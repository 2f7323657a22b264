#include "dsrdiff/resample.hpp"

#include <algorithm>
#include <cmath>

namespace dsrdiff {

namespace {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::fabs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

// One separable pass along an axis of length n -> tn.
void resample_axis(const double* src, double* dst, int n, int tn,
                   int64_t stride, int64_t count, int64_t src_pitch,
                   int64_t dst_pitch, bool antialias) {
  const double ratio = static_cast<double>(n) / tn;
  const double kscale = (antialias && tn < n) ? static_cast<double>(tn) / n : 1.0;
  const int support = static_cast<int>(std::ceil(2.0 / kscale));
  std::vector<int> taps;
  std::vector<double> weights;
  for (int o = 0; o < tn; ++o) {
    const double center = (o + 0.5) * ratio - 0.5;
    const int j0 = static_cast<int>(std::floor(center)) - support + 1;
    taps.clear();
    weights.clear();
    double wsum = 0.0;
    for (int j = j0; j <= j0 + 2 * support - 1; ++j) {
      const double wv = cubic_kernel((center - j) * kscale) * kscale;
      if (wv == 0.0) continue;
      taps.push_back(std::clamp(j, 0, n - 1));
      weights.push_back(wv);
      wsum += wv;
    }
    for (auto& wv : weights) wv /= wsum;
    for (int64_t line = 0; line < count; ++line) {
      const double* s = src + line * src_pitch;
      double acc = 0.0;
      for (size_t k = 0; k < taps.size(); ++k) {
        acc += weights[k] * s[static_cast<int64_t>(taps[k]) * stride];
      }
      dst[line * dst_pitch + o * stride] = acc;
    }
  }
}

}  // namespace

std::vector<double> bicubic_resize_plane(const std::vector<double>& src, int h,
                                         int w, int th, int tw, bool antialias) {
  require(static_cast<int64_t>(src.size()) == static_cast<int64_t>(h) * w,
          "bicubic_resize_plane: size mismatch");
  // Horizontal pass: rows of length w -> tw.
  std::vector<double> mid(static_cast<size_t>(h) * tw);
  resample_axis(src.data(), mid.data(), w, tw, /*stride=*/1, /*count=*/h,
                /*src_pitch=*/w, /*dst_pitch=*/tw, antialias);
  // Vertical pass: columns of length h -> th.
  std::vector<double> out(static_cast<size_t>(th) * tw);
  resample_axis(mid.data(), out.data(), h, th, /*stride=*/tw, /*count=*/tw,
                /*src_pitch=*/1, /*dst_pitch=*/1, antialias);
  return out;
}

namespace {

Tensor bicubic_resize_tensor(const Tensor& x, int th, int tw, bool antialias) {
  require(x.shape().size() == 3, "bicubic resize: input must be {H,W,C}");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out = Tensor::zeros({th, tw, c});
  std::vector<double> plane(static_cast<size_t>(h) * w);
  for (int ch = 0; ch < c; ++ch) {
    for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) {
      plane[static_cast<size_t>(p)] = x.data()[p * c + ch];
    }
    const std::vector<double> res = bicubic_resize_plane(plane, h, w, th, tw, antialias);
    for (int64_t p = 0; p < static_cast<int64_t>(th) * tw; ++p) {
      out.data()[p * c + ch] = res[static_cast<size_t>(p)];
    }
  }
  return out;
}

}  // namespace

Tensor bicubic_upsample(const Tensor& x, int s) {
  require(s >= 1, "bicubic_upsample: bad scale");
  return bicubic_resize_tensor(x, x.dim(0) * s, x.dim(1) * s, false);
}

Tensor bicubic_downsample(const Tensor& x, int s) {
  require(s >= 1, "bicubic_downsample: bad scale");
  require(x.dim(0) % s == 0 && x.dim(1) % s == 0,
          "bicubic_downsample: dims " + shape_str(x.shape()) +
              " not divisible by " + std::to_string(s));
  return bicubic_resize_tensor(x, x.dim(0) / s, x.dim(1) / s, true);
}

}  // namespace dsrdiff
