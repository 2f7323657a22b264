#include "dsrdiff/guidance.hpp"

namespace dsrdiff {

GgnNet GgnNet::make(int in_ch, const ModelConfig& cfg, RandomEngine& rng) {
  GgnNet net;
  net.scale = cfg.scale;
  net.channels = cfg.channels;
  net.in_conv = Conv2d::make(in_ch, cfg.channels, 3, rng);
  net.blocks.reserve(static_cast<size_t>(cfg.ggn_resblocks));
  for (int i = 0; i < cfg.ggn_resblocks; ++i) {
    net.blocks.push_back(ResBlock::make(cfg.channels, rng));
  }
  net.out_conv = Conv2d::make(cfg.channels, cfg.channels, 1, rng);
  return net;
}

Tensor GgnNet::forward(const Tensor& x) const {
  Tensor h = in_conv(x);
  for (const auto& b : blocks) h = b(h);
  return out_conv(h);
}

void GgnNet::visit(const std::string& prefix, const ParamVisitor& v) {
  in_conv.visit(prefix + ".in_conv", v);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit(prefix + ".rb" + std::to_string(i), v);
  }
  out_conv.visit(prefix + ".out_conv", v);
}

int64_t GgnNet::param_count() const {
  int64_t n = in_conv.param_count() + out_conv.param_count();
  for (const auto& b : blocks) n += b.c1.param_count() + b.c2.param_count();
  return n;
}

GgnNet make_ggn(const ModelConfig& cfg, RandomEngine& rng) {
  return GgnNet::make(4 * cfg.scale * cfg.scale + 1, cfg, rng);
}

GgnNet make_ggn2(const ModelConfig& cfg, RandomEngine& rng) {
  return GgnNet::make(1, cfg, rng);
}

Tensor ggn_forward(const Tensor& depth_hr, const Tensor& color_hr,
                   const Tensor& depth_lr, const GgnNet& params, int s) {
  require(depth_hr.shape().size() == 3 && depth_hr.dim(2) == 1,
          "ggn_forward: depth_hr must be {H,W,1}");
  require(color_hr.shape().size() == 3 && color_hr.dim(2) == 3,
          "ggn_forward: color_hr must be {H,W,3}");
  require(depth_hr.dim(0) == color_hr.dim(0) && depth_hr.dim(1) == color_hr.dim(1),
          "ggn_forward: HR depth/color size mismatch");
  require(depth_lr.shape().size() == 3 && depth_lr.dim(2) == 1 &&
              depth_lr.dim(0) * s == depth_hr.dim(0) &&
              depth_lr.dim(1) * s == depth_hr.dim(1),
          "ggn_forward: LR depth inconsistent with scale " + std::to_string(s));
  const Tensor d = pixel_unshuffle(depth_hr, s);
  const Tensor c = pixel_unshuffle(color_hr, s);
  return params.forward(concat_channels({d, c, depth_lr}));
}

GuidanceVector compress_guidance(const Tensor& feat, int k) {
  require(feat.shape().size() == 3, "compress_guidance: input must be {H,W,C}");
  require(k >= 1 && k <= feat.dim(0) && k <= feat.dim(1),
          "compress_guidance: K exceeds feature map size");
  GuidanceVector g;
  g.K = k;
  g.C = feat.dim(2);
  g.t = 0;
  g.values = map_to_guidance(block_mean_pool(feat, k));
  return g;
}

GuidanceVector compress_guidance_global_avg(const Tensor& feat, int k) {
  require(feat.shape().size() == 3, "compress_guidance_global_avg: input must be {H,W,C}");
  GuidanceVector g;
  g.K = k;
  g.C = feat.dim(2);
  g.t = 0;
  g.values = map_to_guidance(broadcast_cells(block_mean_pool(feat, 1), k));
  return g;
}

GuidanceVector compress_for(const ModelConfig& cfg, const Tensor& feat) {
  return cfg.compress_mode == CompressMode::block_mean
             ? compress_guidance(feat, cfg.guidance_k)
             : compress_guidance_global_avg(feat, cfg.guidance_k);
}

}  // namespace dsrdiff
