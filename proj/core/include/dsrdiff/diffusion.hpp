#pragma once

#include <functional>

#include "dsrdiff/guidance.hpp"
#include "dsrdiff/schedule.hpp"

namespace dsrdiff {

// Conditional noise estimator: a three-layer fully-connected stack over the
// concatenation of the noisy guidance, the condition vector and a one-hot
// time embedding, plus the LR-depth condition encoder (a GGN twin).
struct DenoiserNet {
  Linear l1, l2, l3;
  static DenoiserNet make(int guidance_len, int steps, int hidden, RandomEngine& rng);
  Tensor forward(const Tensor& in) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct GrnParams {
  DenoiserNet denoiser;
  GgnNet ggn2;
  int K = 0, C = 0, T = 0;

  static GrnParams make(const ModelConfig& cfg, RandomEngine& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
  int64_t param_count() const;
};

// G_t = sqrt(abar_t) * g0 + sqrt(1 - abar_t) * eps.
GuidanceVector forward_diffuse(const GuidanceVector& g0, const NoiseSchedule& sched,
                               int t, const std::vector<double>& eps);
GuidanceVector forward_diffuse(const GuidanceVector& g0, const NoiseSchedule& sched,
                               int t, RandomEngine& rng);

// Condition C_G from the LR depth map alone (GGN2 trunk + compression).
GuidanceVector encode_condition(const Tensor& depth_lr, const GrnParams& params,
                                const ModelConfig& cfg);

// eps_hat = denoiser(concat(g_t, c_g, onehot(t))).
Tensor predict_noise(const GuidanceVector& g_t, const GuidanceVector& c_g, int t,
                     const GrnParams& params);

// G_{t-1} = (G_t - eps_hat * (1 - alpha_t) / sqrt(1 - abar_t)) / sqrt(alpha_t).
// Deterministic: no posterior noise term.
GuidanceVector reverse_step(const GuidanceVector& g_t, const Tensor& eps_hat,
                            const NoiseSchedule& sched, int t);

using NoisePredictor =
    std::function<Tensor(const GuidanceVector& g_t, const GuidanceVector& c_g, int t)>;

// Full reverse chain: encode the condition once, then T denoising steps.
// Differentiable end to end so stage 2 can optimize the whole path jointly.
GuidanceVector recover_guidance(const Tensor& depth_lr, const NoiseSchedule& sched,
                                const GrnParams& params, const ModelConfig& cfg,
                                const GuidanceVector& g_T);

// Same chain with an injected predictor (used by oracle tests).
GuidanceVector recover_guidance_with(const Tensor& depth_lr, const NoiseSchedule& sched,
                                     const GrnParams& params, const ModelConfig& cfg,
                                     const GuidanceVector& g_T,
                                     const NoisePredictor& predictor);

// Inference-time start of the reverse chain: G_T ~ N(0, (1 - abar_T) I).
GuidanceVector sample_inference_start(const NoiseSchedule& sched, int k, int c,
                                      RandomEngine& rng);

// Instrumentation: number of recover_guidance invocations since last reset.
int64_t recover_call_count();
void reset_recover_call_count();

}  // namespace dsrdiff
