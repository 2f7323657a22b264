#pragma once

#include <vector>

#include "dsrdiff/tensor.hpp"

namespace dsrdiff {

// Separable cubic-kernel resampling (Catmull-Rom-style kernel, a = -0.5) at
// output pixel centers with border clamp and per-tap weight normalization.
// Downscaling widens the kernel by the inverse scale (anti-aliased), matching
// the classic imresize bicubic. Operates on plain planes; no autograd.
std::vector<double> bicubic_resize_plane(const std::vector<double>& src, int h,
                                         int w, int th, int tw, bool antialias);

// {h,w,c} -> {h*s, w*s, c}, returned as a constant leaf tensor.
Tensor bicubic_upsample(const Tensor& x, int s);

// Anti-aliased {h,w,c} -> {h/s, w/s, c}; dims must divide by s.
Tensor bicubic_downsample(const Tensor& x, int s);

}  // namespace dsrdiff
