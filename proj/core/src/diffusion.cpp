#include "dsrdiff/diffusion.hpp"

#include <atomic>
#include <cmath>

namespace dsrdiff {

namespace {
std::atomic<int64_t> g_recover_calls{0};
}

int64_t recover_call_count() { return g_recover_calls.load(); }
void reset_recover_call_count() { g_recover_calls.store(0); }

DenoiserNet DenoiserNet::make(int guidance_len, int steps, int hidden,
                              RandomEngine& rng) {
  DenoiserNet net;
  net.l1 = Linear::make(2 * guidance_len + steps, hidden, rng);
  net.l2 = Linear::make(hidden, hidden, rng);
  net.l3 = Linear::make(hidden, guidance_len, rng);
  return net;
}

Tensor DenoiserNet::forward(const Tensor& in) const {
  return l3(gelu(l2(gelu(l1(in)))));
}

void DenoiserNet::visit(const std::string& prefix, const ParamVisitor& v) {
  l1.visit(prefix + ".l1", v);
  l2.visit(prefix + ".l2", v);
  l3.visit(prefix + ".l3", v);
}

GrnParams GrnParams::make(const ModelConfig& cfg, RandomEngine& rng) {
  GrnParams p;
  p.K = cfg.guidance_k;
  p.C = cfg.channels;
  p.T = cfg.diffusion_steps;
  p.denoiser = DenoiserNet::make(cfg.guidance_len(), cfg.diffusion_steps,
                                 cfg.denoiser_width(), rng);
  p.ggn2 = make_ggn2(cfg, rng);
  return p;
}

void GrnParams::visit(const std::string& prefix, const ParamVisitor& v) {
  denoiser.visit(prefix + ".denoiser", v);
  ggn2.visit(prefix + ".ggn2", v);
}

int64_t GrnParams::param_count() const {
  int64_t n = ggn2.param_count();
  for (const Linear* l : {&denoiser.l1, &denoiser.l2, &denoiser.l3}) {
    n += l->w.size() + l->b.size();
  }
  return n;
}

GuidanceVector forward_diffuse(const GuidanceVector& g0, const NoiseSchedule& sched,
                               int t, const std::vector<double>& eps) {
  require(g0.t == 0, "forward_diffuse: input must be clean (t = 0)");
  require(t >= 1 && t <= sched.steps, "forward_diffuse: t out of range");
  require(static_cast<int64_t>(eps.size()) == g0.values.size(),
          "forward_diffuse: eps length mismatch");
  const double sa = sched.sqrt_alpha_bar[static_cast<size_t>(t - 1)];
  const double sb = sched.sqrt_one_minus_alpha_bar[static_cast<size_t>(t - 1)];
  Tensor noise = Tensor::from_vec(g0.values.shape(), eps);
  GuidanceVector out;
  out.K = g0.K;
  out.C = g0.C;
  out.t = t;
  out.values = add(scale(g0.values, sa), scale(noise, sb));
  return out;
}

GuidanceVector forward_diffuse(const GuidanceVector& g0, const NoiseSchedule& sched,
                               int t, RandomEngine& rng) {
  return forward_diffuse(g0, sched, t,
                         rng.normal_vec(static_cast<size_t>(g0.values.size())));
}

GuidanceVector encode_condition(const Tensor& depth_lr, const GrnParams& params,
                                const ModelConfig& cfg) {
  require(depth_lr.shape().size() == 3 && depth_lr.dim(2) == 1,
          "encode_condition: depth_lr must be {h,w,1}");
  return compress_for(cfg, params.ggn2.forward(depth_lr));
}

Tensor predict_noise(const GuidanceVector& g_t, const GuidanceVector& c_g, int t,
                     const GrnParams& params) {
  require(t >= 1, "predict_noise: nothing to denoise at t = 0");
  require(g_t.t == t, "predict_noise: guidance index does not match t");
  require(g_t.values.size() == c_g.values.size(),
          "predict_noise: guidance/condition length mismatch");
  require(t <= params.T, "predict_noise: t exceeds schedule length");
  Tensor onehot = Tensor::zeros({params.T});
  onehot.data()[t - 1] = 1.0;
  return params.denoiser.forward(concat_vec({g_t.values, c_g.values, onehot}));
}

GuidanceVector reverse_step(const GuidanceVector& g_t, const Tensor& eps_hat,
                            const NoiseSchedule& sched, int t) {
  require(t >= 1 && t <= sched.steps, "reverse_step: t out of range");
  require(eps_hat.size() == g_t.values.size(), "reverse_step: eps length mismatch");
  const double alpha = sched.alpha[static_cast<size_t>(t - 1)];
  const double coeff =
      (1.0 - alpha) / sched.sqrt_one_minus_alpha_bar[static_cast<size_t>(t - 1)];
  GuidanceVector out;
  out.K = g_t.K;
  out.C = g_t.C;
  out.t = t - 1;
  out.values = scale(sub(g_t.values, scale(eps_hat, coeff)), 1.0 / std::sqrt(alpha));
  return out;
}

GuidanceVector recover_guidance_with(const Tensor& depth_lr, const NoiseSchedule& sched,
                                     const GrnParams& params, const ModelConfig& cfg,
                                     const GuidanceVector& g_T,
                                     const NoisePredictor& predictor) {
  require(g_T.t == sched.steps, "recover_guidance: start must carry t = T");
  g_recover_calls.fetch_add(1);
  const GuidanceVector c_g = encode_condition(depth_lr, params, cfg);
  GuidanceVector g = g_T;
  for (int t = sched.steps; t >= 1; --t) {
    const Tensor eps_hat = predictor(g, c_g, t);
    g = reverse_step(g, eps_hat, sched, t);
  }
  return g;
}

GuidanceVector recover_guidance(const Tensor& depth_lr, const NoiseSchedule& sched,
                                const GrnParams& params, const ModelConfig& cfg,
                                const GuidanceVector& g_T) {
  return recover_guidance_with(
      depth_lr, sched, params, cfg, g_T,
      [&params](const GuidanceVector& g, const GuidanceVector& c, int t) {
        return predict_noise(g, c, t, params);
      });
}

GuidanceVector sample_inference_start(const NoiseSchedule& sched, int k, int c,
                                      RandomEngine& rng) {
  GuidanceVector g;
  g.K = k;
  g.C = c;
  g.t = sched.steps;
  const double sd =
      std::sqrt(1.0 - sched.alpha_bar[static_cast<size_t>(sched.steps - 1)]);
  std::vector<double> v(static_cast<size_t>(k) * k * c);
  for (auto& x : v) x = sd * rng.normal();
  g.values = Tensor::from_vec({k * k * c}, std::move(v));
  return g;
}

}  // namespace dsrdiff
