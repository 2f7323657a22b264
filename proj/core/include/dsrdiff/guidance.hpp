#pragma once

#include "dsrdiff/config.hpp"
#include "dsrdiff/nn.hpp"
#include "dsrdiff/tensor.hpp"

namespace dsrdiff {

// Compact latent that conditions DSRN. values has length K*K*C, ordered
// channel-major then row-major cells: element c*K*K + by*K + bx.
// t is the diffusion index (0 = clean).
struct GuidanceVector {
  Tensor values;
  int K = 0;
  int C = 0;
  int t = 0;
};

// Guidance generation network: input conv -> resblocks -> 1x1 conv to C.
// GGN takes pixel-unshuffled HR depth and color concatenated with the LR
// depth map (4*s*s + 1 channels); its twin GGN2 takes the LR depth alone.
struct GgnNet {
  Conv2d in_conv;
  std::vector<ResBlock> blocks;
  Conv2d out_conv;
  int scale = 0;
  int channels = 0;

  static GgnNet make(int in_ch, const ModelConfig& cfg, RandomEngine& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
  int64_t param_count() const;
};

GgnNet make_ggn(const ModelConfig& cfg, RandomEngine& rng);   // 4*s*s+1 inputs
GgnNet make_ggn2(const ModelConfig& cfg, RandomEngine& rng);  // 1 input

// Unshuffles both HR inputs to LR resolution, concatenates with the LR depth
// and runs the trunk. Output is {H/s, W/s, C}.
Tensor ggn_forward(const Tensor& depth_hr, const Tensor& color_hr,
                   const Tensor& depth_lr, const GgnNet& params, int s);

// Per-block mean over the rounded K x K partition, flattened to K*K*C.
GuidanceVector compress_guidance(const Tensor& feat, int k);

// M-2 ablation: global average per channel broadcast to every cell.
GuidanceVector compress_guidance_global_avg(const Tensor& feat, int k);

GuidanceVector compress_for(const ModelConfig& cfg, const Tensor& feat);

}  // namespace dsrdiff
