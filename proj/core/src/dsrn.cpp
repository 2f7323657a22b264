#include "dsrdiff/dsrn.hpp"

#include "dsrdiff/resample.hpp"

namespace dsrdiff {

InjectionSite InjectionSite::make(int channels, bool guided, RandomEngine& rng) {
  InjectionSite s;
  s.guided = guided;
  s.ln = LayerNorm::make(channels);
  if (guided) s.conv = Conv2d::make(channels, channels, 1, rng);
  return s;
}

void InjectionSite::visit(const std::string& prefix, const ParamVisitor& v) {
  if (guided) conv.visit(prefix + ".conv", v);
  ln.visit(prefix + ".ln", v);
}

Tensor inject_guidance(const Tensor& f_in, const GuidanceVector& g,
                       const InjectionSite& site) {
  const Tensor normed = site.ln(f_in);
  if (!site.guided) return normed;
  require(g.values.defined(), "inject_guidance: missing guidance vector");
  require(g.values.size() == static_cast<int64_t>(g.K) * g.K * g.C,
          "inject_guidance: guidance length != K*K*C");
  require(g.C == f_in.dim(2), "inject_guidance: channel mismatch");
  const Tensor cells = guidance_to_map(g.values, g.K, g.C);
  const Tensor up = nearest_upsample_partition(cells, f_in.dim(0), f_in.dim(1));
  return add(site.conv(up), normed);
}

ChannelAttention ChannelAttention::make(int channels, int heads, RandomEngine& rng) {
  require(channels % heads == 0, "ChannelAttention: heads must divide channels");
  ChannelAttention a;
  a.heads = heads;
  a.qkv_pw = Conv2d::make(channels, 3 * channels, 1, rng);
  a.qkv_dw = Conv2d::make(3 * channels, 3 * channels, 3, rng, 1, -1, 3 * channels);
  a.proj = Conv2d::make(channels, channels, 1, rng, 1, -1, 1, /*zero_init=*/true);
  a.temperature = Tensor::full({heads}, 1.0, true);
  return a;
}

Tensor ChannelAttention::operator()(const Tensor& x) const {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int d = c / heads;
  const Tensor qkv = hwc_to_chw(qkv_dw(qkv_pw(x)));  // {3C, HW}
  const Tensor q = slice_rows(qkv, 0, c);
  const Tensor k = slice_rows(qkv, c, 2 * c);
  const Tensor v = slice_rows(qkv, 2 * c, 3 * c);
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int i = 0; i < heads; ++i) {
    const Tensor qh = l2_normalize_rows(slice_rows(q, i * d, (i + 1) * d));
    const Tensor kh = l2_normalize_rows(slice_rows(k, i * d, (i + 1) * d));
    const Tensor vh = slice_rows(v, i * d, (i + 1) * d);
    const Tensor logits = mul_by_entry(matmul(qh, transpose2d(kh)), temperature, i);
    outs.push_back(matmul(softmax_rows(logits), vh));
  }
  return proj(chw_to_hwc(concat_rows(outs), h, w));
}

void ChannelAttention::visit(const std::string& prefix, const ParamVisitor& v) {
  qkv_pw.visit(prefix + ".qkv_pw", v);
  qkv_dw.visit(prefix + ".qkv_dw", v);
  proj.visit(prefix + ".proj", v);
  v(prefix + ".temperature", temperature);
}

GatedFeedForward GatedFeedForward::make(int channels, int expansion,
                                        RandomEngine& rng) {
  GatedFeedForward f;
  f.hidden = expansion * channels;
  f.ln = LayerNorm::make(channels);
  f.expand = Conv2d::make(channels, 2 * f.hidden, 1, rng);
  f.dw = Conv2d::make(2 * f.hidden, 2 * f.hidden, 3, rng, 1, -1, 2 * f.hidden);
  f.project = Conv2d::make(f.hidden, channels, 1, rng, 1, -1, 1, /*zero_init=*/true);
  return f;
}

Tensor GatedFeedForward::operator()(const Tensor& x) const {
  const Tensor e = dw(expand(ln(x)));
  const Tensor a = slice_channels(e, 0, hidden);
  const Tensor b = slice_channels(e, hidden, 2 * hidden);
  return project(mul(gelu(a), b));
}

void GatedFeedForward::visit(const std::string& prefix, const ParamVisitor& v) {
  ln.visit(prefix + ".ln", v);
  expand.visit(prefix + ".expand", v);
  dw.visit(prefix + ".dw", v);
  project.visit(prefix + ".project", v);
}

DfeBlock DfeBlock::make(const ModelConfig& cfg, RandomEngine& rng) {
  DfeBlock b;
  b.site = InjectionSite::make(cfg.channels,
                               cfg.guidance_mode == GuidanceMode::full, rng);
  b.attn = ChannelAttention::make(cfg.channels, cfg.attn_heads, rng);
  b.ff = GatedFeedForward::make(cfg.channels, cfg.ffn_expansion, rng);
  return b;
}

void DfeBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  site.visit(prefix + ".site", v);
  attn.visit(prefix + ".attn", v);
  ff.visit(prefix + ".ff", v);
}

Tensor dfe_block(const Tensor& f, const GuidanceVector& g, const DfeBlock& params) {
  const Tensor x1 = add(f, params.attn(inject_guidance(f, g, params.site)));
  return add(x1, params.ff(x1));
}

EsaBlock EsaBlock::make(int channels, RandomEngine& rng) {
  require(channels >= 4, "esa_block: needs at least 4 channels");
  EsaBlock e;
  const int cr = channels / 4;
  e.reduce = Conv2d::make(channels, cr, 1, rng);
  e.down = Conv2d::make(cr, cr, 3, rng, /*stride=*/2, /*pad=*/1);
  e.g1 = Conv2d::make(cr, cr, 3, rng);
  e.g2 = Conv2d::make(cr, cr, 3, rng);
  e.expand = Conv2d::make(cr, channels, 1, rng);
  return e;
}

void EsaBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  reduce.visit(prefix + ".reduce", v);
  down.visit(prefix + ".down", v);
  g1.visit(prefix + ".g1", v);
  g2.visit(prefix + ".g2", v);
  expand.visit(prefix + ".expand", v);
}

Tensor esa_block(const Tensor& f, const EsaBlock& params) {
  require(f.shape().size() == 3 && f.dim(2) >= 4, "esa_block: needs C >= 4");
  const int h = f.dim(0), w = f.dim(1);
  const Tensor f1 = params.reduce(f);
  Tensor t = params.down(f1);
  t = max_pool2d(t, 7, 3);
  t = params.g2(relu(params.g1(t)));
  const Tensor up = bilinear_resize(t, h, w);
  const Tensor gate = sigmoid(params.expand(add(up, f1)));
  return mul(f, gate);
}

CfeBlock CfeBlock::make(int channels, RandomEngine& rng) {
  CfeBlock b;
  const int inner = std::max(1, channels / 2);
  b.feat = Conv2d::make(channels, inner, 3, rng);
  b.gate = Conv2d::make(channels, inner, 1, rng);
  b.out = Conv2d::make(inner, channels, 3, rng, 1, -1, 1, /*zero_init=*/true);
  return b;
}

void CfeBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  feat.visit(prefix + ".feat", v);
  gate.visit(prefix + ".gate", v);
  out.visit(prefix + ".out", v);
}

int64_t CfeBlock::param_count() const {
  return feat.param_count() + gate.param_count() + out.param_count();
}

Tensor cfe_block(const Tensor& f, const CfeBlock& params) {
  return add(f, params.out(mul(params.feat(f), sigmoid(params.gate(f)))));
}

DfeGroup DfeGroup::make(const ModelConfig& cfg, RandomEngine& rng) {
  DfeGroup g;
  g.blocks.reserve(static_cast<size_t>(cfg.dfe_blocks));
  for (int i = 0; i < cfg.dfe_blocks; ++i) g.blocks.push_back(DfeBlock::make(cfg, rng));
  g.esa = EsaBlock::make(cfg.channels, rng);
  return g;
}

Tensor DfeGroup::forward(const Tensor& x, const GuidanceVector& g) const {
  Tensor h = x;
  for (const auto& b : blocks) h = dfe_block(h, g, b);
  return esa_block(h, esa);
}

void DfeGroup::visit(const std::string& prefix, const ParamVisitor& v) {
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit(prefix + ".b" + std::to_string(i), v);
  }
  esa.visit(prefix + ".esa", v);
}

CfeGroup CfeGroup::make(const ModelConfig& cfg, RandomEngine& rng) {
  CfeGroup g;
  g.blocks.reserve(static_cast<size_t>(cfg.cfe_blocks));
  for (int i = 0; i < cfg.cfe_blocks; ++i) {
    g.blocks.push_back(CfeBlock::make(cfg.channels, rng));
  }
  g.esa = EsaBlock::make(cfg.channels, rng);
  return g;
}

Tensor CfeGroup::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& b : blocks) h = cfe_block(h, b);
  return esa_block(h, esa);
}

void CfeGroup::visit(const std::string& prefix, const ParamVisitor& v) {
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit(prefix + ".b" + std::to_string(i), v);
  }
  esa.visit(prefix + ".esa", v);
}

Ffm Ffm::make(const ModelConfig& cfg, RandomEngine& rng) {
  Ffm f;
  f.mode = cfg.fuse_mode;
  f.color_conv = Conv2d::make(cfg.channels, cfg.channels, 3, rng);
  if (f.mode == FuseMode::concat) {
    f.concat_proj = Conv2d::make(2 * cfg.channels, cfg.channels, 1, rng);
  }
  f.rb1 = ResBlock::make(cfg.channels, rng);
  f.rb2 = ResBlock::make(cfg.channels, rng);
  return f;
}

void Ffm::visit(const std::string& prefix, const ParamVisitor& v) {
  color_conv.visit(prefix + ".color_conv", v);
  if (mode == FuseMode::concat) concat_proj.visit(prefix + ".concat_proj", v);
  rb1.visit(prefix + ".rb1", v);
  rb2.visit(prefix + ".rb2", v);
}

Tensor grid_upsample(const Tensor& f, int target_h, int target_w) {
  require(f.shape().size() == 3, "grid_upsample: input must be {H,W,C}");
  require(target_h >= f.dim(0) && target_w >= f.dim(1),
          "grid_upsample: target smaller than source");
  return bilinear_resize(f, target_h, target_w);
}

Tensor ffm_fuse(const Tensor& f_depth, const Tensor& f_color, int target_h,
                int target_w, const Ffm& params) {
  require(f_depth.dim(2) == f_color.dim(2), "ffm_fuse: channel mismatch");
  const Tensor d = grid_upsample(f_depth, target_h, target_w);
  const Tensor c = params.color_conv(grid_upsample(f_color, target_h, target_w));
  const Tensor fused = params.mode == FuseMode::multiply
                           ? mul(d, c)
                           : params.concat_proj(concat_channels({d, c}));
  return params.rb2(params.rb1(fused));
}

DsrnNet DsrnNet::make(const ModelConfig& cfg, RandomEngine& rng) {
  DsrnNet n;
  n.cfg = cfg;
  n.stem_depth = Conv2d::make(1, cfg.channels, 3, rng);
  n.stem_color = Conv2d::make(3, cfg.channels, 3, rng);
  n.dfe1 = DfeGroup::make(cfg, rng);
  n.dfe2 = DfeGroup::make(cfg, rng);
  n.cfe = CfeGroup::make(cfg, rng);
  n.ffm1 = Ffm::make(cfg, rng);
  n.ffm2 = Ffm::make(cfg, rng);
  // Zero-initialized head: an untrained network reproduces its bicubic input.
  n.recon = Conv2d::make(cfg.channels, 1, 3, rng, 1, -1, 1, /*zero_init=*/true);
  return n;
}

Tensor DsrnNet::forward(const Tensor& depth_lr, const Tensor& color_hr,
                        const GuidanceVector& g, bool inference) const {
  return dsrn_forward(depth_lr, color_hr, g, *this, cfg.scale, inference);
}

void DsrnNet::visit(const std::string& prefix, const ParamVisitor& v) {
  stem_depth.visit(prefix + ".stem_depth", v);
  stem_color.visit(prefix + ".stem_color", v);
  dfe1.visit(prefix + ".dfe1", v);
  dfe2.visit(prefix + ".dfe2", v);
  cfe.visit(prefix + ".cfe", v);
  ffm1.visit(prefix + ".ffm1", v);
  ffm2.visit(prefix + ".ffm2", v);
  recon.visit(prefix + ".recon", v);
}

int64_t DsrnNet::param_count() const {
  int64_t n = 0;
  const_cast<DsrnNet&>(*this).visit(
      "dsrn", [&n](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

Tensor dsrn_forward(const Tensor& depth_lr, const Tensor& color_hr,
                    const GuidanceVector& g, const DsrnNet& params, int s,
                    bool inference) {
  require(depth_lr.shape().size() == 3 && depth_lr.dim(2) == 1,
          "dsrn_forward: depth_lr must be {h,w,1}");
  require(color_hr.shape().size() == 3 && color_hr.dim(2) == 3,
          "dsrn_forward: color_hr must be {H,W,3}");
  const int h = depth_lr.dim(0), w = depth_lr.dim(1);
  const int hh = color_hr.dim(0), hw = color_hr.dim(1);
  require(hh == h * s && hw == w * s,
          "dsrn_forward: color size inconsistent with scale " + std::to_string(s));
  if (params.cfg.guidance_mode == GuidanceMode::full) {
    require(g.values.defined() &&
                g.values.size() == params.cfg.guidance_len(),
            "dsrn_forward: guidance length != K*K*C");
  }

  Tensor d = params.stem_depth(depth_lr);
  d = params.dfe1.forward(d, g);
  d = params.dfe2.forward(d, g);

  Tensor c = params.cfe.forward(params.stem_color(color_hr));

  // FFM ladder: fuse at half target resolution, then at full resolution.
  // Color features reach each FFM pre-sampled to the fusion grid.
  const Tensor c_half = bilinear_resize(c, hh / 2, hw / 2);
  const Tensor f1 = ffm_fuse(d, c_half, hh / 2, hw / 2, params.ffm1);
  const Tensor f2 = ffm_fuse(f1, c, hh, hw, params.ffm2);

  Tensor out = params.recon(f2);
  if (params.cfg.global_residual) {
    out = add(out, bicubic_upsample(depth_lr, s));
  }
  if (inference) out = clamp01(out);
  return out;
}

}  // namespace dsrdiff
