#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dsrdiff/common.hpp"

namespace dsrdiff {

enum class GuidanceMode { full, none };            // none: no injection convs
enum class CompressMode { block_mean, global_avg };  // global_avg: 1x1 pool broadcast
enum class FuseMode { multiply, concat };            // concat: 1x1-projected concat

// Architecture hyperparameters shared by GGN, GRN and DSRN.
struct ModelConfig {
  std::string preset = "toy";
  int scale = 4;            // s in {4, 8, 16}
  int channels = 8;         // C, guidance/feature width
  int guidance_k = 2;       // K
  int ggn_resblocks = 2;
  int dfe_blocks = 1;       // per DFE group (two groups)
  int cfe_blocks = 1;
  int attn_heads = 2;
  int ffn_expansion = 2;
  int diffusion_steps = 4;  // T
  double beta_start = 0.1;
  double beta_end = 0.99;
  int denoiser_hidden = 0;  // 0 -> 4 * K^2 * C
  bool global_residual = true;
  GuidanceMode guidance_mode = GuidanceMode::full;
  CompressMode compress_mode = CompressMode::block_mean;
  FuseMode fuse_mode = FuseMode::multiply;

  int guidance_len() const { return guidance_k * guidance_k * channels; }
  int denoiser_width() const {
    return denoiser_hidden > 0 ? denoiser_hidden : 4 * guidance_len();
  }
  void validate() const;
};

struct TrainConfig {
  int stage = 1;
  int epochs = 125;
  int batch_size = 1;
  double lr_init = 2e-4;
  int lr_half_every = 80;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  int loss_switch_epoch = 60;  // stage 2: L_com before, L_img from this epoch on
  uint64_t seed = 0;
  int patch_hr = 0;            // 0: train on full images
  int patches_per_image = 1;
  bool warm_start_dsrn = true;  // stage 2 starts DSRN from the stage-1 weights

  void validate() const;
};

// Data selection shared by the CLI subcommands.
struct DataConfig {
  std::string dataset = "synthetic";
  std::string data_root;     // empty + synthetic -> generate in memory
  int synthetic_count = 4;
  int synthetic_size = 32;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

// lr(e) = lr_init * 0.5^floor(e / lr_half_every)
double lr_at_epoch(const TrainConfig& cfg, int epoch);

RunConfig make_preset(const std::string& name);  // "toy" or "full"

// Flat key=value view of a RunConfig (field names are the keys).
std::map<std::string, std::string> to_key_values(const RunConfig& cfg);
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

// key = value lines; '#' starts a comment; unknown keys are an error.
RunConfig load_config_file(const std::string& path, const RunConfig& base);
void save_config_file(const RunConfig& cfg, const std::string& path);

std::string to_string(GuidanceMode m);
std::string to_string(CompressMode m);
std::string to_string(FuseMode m);

}  // namespace dsrdiff
