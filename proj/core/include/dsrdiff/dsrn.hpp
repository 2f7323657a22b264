#pragma once

#include "dsrdiff/config.hpp"
#include "dsrdiff/guidance.hpp"
#include "dsrdiff/nn.hpp"

namespace dsrdiff {

// Guidance injection point used by every DFE block:
//   F_hat = Conv1x1(NearestUp(Reshape(G))) + LN(F_in)
// With guidance disabled (M-1) only the normalization remains.
struct InjectionSite {
  Conv2d conv;
  LayerNorm ln;
  bool guided = true;
  static InjectionSite make(int channels, bool guided, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Transposed (channel-wise) multi-head self-attention with a depthwise-conv
// value path and learnable per-head temperature. Output projection starts at
// zero so the surrounding residual is the identity at init.
struct ChannelAttention {
  Conv2d qkv_pw, qkv_dw, proj;
  Tensor temperature;
  int heads = 1;
  static ChannelAttention make(int channels, int heads, RandomEngine& rng);
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Gated feedforward: LN -> 1x1 expand -> depthwise 3x3 -> gelu(a) * b -> 1x1.
struct GatedFeedForward {
  LayerNorm ln;
  Conv2d expand, dw, project;
  int hidden = 0;
  static GatedFeedForward make(int channels, int expansion, RandomEngine& rng);
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct DfeBlock {
  InjectionSite site;
  ChannelAttention attn;
  GatedFeedForward ff;
  static DfeBlock make(const ModelConfig& cfg, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Spatial sigmoid gate: reduce to C/4, stride-2 conv, 7x7 max-pool, conv
// group, bilinear upsample, skip add, expand to C, sigmoid, multiply.
struct EsaBlock {
  Conv2d reduce, down, g1, g2, expand;
  static EsaBlock make(int channels, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Lightweight pixel-attention block (no guidance input):
//   x + Conv3x3( Conv3x3(x) * sigmoid(Conv1x1(x)) ), inner width C/2.
struct CfeBlock {
  Conv2d feat, gate, out;
  static CfeBlock make(int channels, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
  int64_t param_count() const;
};

struct DfeGroup {
  std::vector<DfeBlock> blocks;
  EsaBlock esa;
  static DfeGroup make(const ModelConfig& cfg, RandomEngine& rng);
  Tensor forward(const Tensor& x, const GuidanceVector& g) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct CfeGroup {
  std::vector<CfeBlock> blocks;
  EsaBlock esa;
  static CfeGroup make(const ModelConfig& cfg, RandomEngine& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Fusion of grid-upsampled depth features with convolved color features,
// multiplicative by default, concat+1x1 for the M-4 ablation; two refinement
// resblocks at the end.
struct Ffm {
  Conv2d color_conv;
  Conv2d concat_proj;  // only in concat mode
  ResBlock rb1, rb2;
  FuseMode mode = FuseMode::multiply;
  static Ffm make(const ModelConfig& cfg, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct DsrnNet {
  ModelConfig cfg;
  Conv2d stem_depth, stem_color, recon;
  DfeGroup dfe1, dfe2;
  CfeGroup cfe;
  Ffm ffm1, ffm2;

  static DsrnNet make(const ModelConfig& cfg, RandomEngine& rng);
  Tensor forward(const Tensor& depth_lr, const Tensor& color_hr,
                 const GuidanceVector& g, bool inference = false) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
  int64_t param_count() const;
};

// ---- block-level operations ----
Tensor inject_guidance(const Tensor& f_in, const GuidanceVector& g,
                       const InjectionSite& site);
Tensor dfe_block(const Tensor& f, const GuidanceVector& g, const DfeBlock& params);
Tensor esa_block(const Tensor& f, const EsaBlock& params);
Tensor cfe_block(const Tensor& f, const CfeBlock& params);
// Bilinear feature upsampling at explicit target coordinates; the target must
// not be smaller than the source.
Tensor grid_upsample(const Tensor& f, int target_h, int target_w);
Tensor ffm_fuse(const Tensor& f_depth, const Tensor& f_color, int target_h,
                int target_w, const Ffm& params);
Tensor dsrn_forward(const Tensor& depth_lr, const Tensor& color_hr,
                    const GuidanceVector& g, const DsrnNet& params, int s,
                    bool inference = false);

}  // namespace dsrdiff
