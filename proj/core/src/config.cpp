#include "dsrdiff/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dsrdiff {

void ModelConfig::validate() const {
  require(scale == 4 || scale == 8 || scale == 16, "scale must be 4, 8 or 16");
  require(channels >= 1 && guidance_k >= 1, "channels and guidance_k must be positive");
  require(channels % attn_heads == 0, "channels must be divisible by attn_heads");
  require(channels >= 4, "ESA needs at least 4 channels");
  require(diffusion_steps >= 1, "diffusion_steps must be >= 1");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "betas must satisfy 0 < beta_start <= beta_end < 1");
}

void TrainConfig::validate() const {
  require(stage == 1 || stage == 2, "stage must be 1 or 2");
  require(epochs >= 1 && batch_size >= 1, "epochs and batch_size must be positive");
  require(lr_init > 0.0 && lr_half_every >= 1, "bad learning-rate schedule");
  if (stage == 2) {
    require(loss_switch_epoch < epochs, "loss_switch_epoch must be < epochs");
  }
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  return cfg.lr_init * std::pow(0.5, std::floor(static_cast<double>(epoch) /
                                                cfg.lr_half_every));
}

RunConfig make_preset(const std::string& name) {
  RunConfig cfg;
  if (name == "toy") {
    cfg.model.preset = "toy";
    cfg.model.channels = 8;
    cfg.model.ggn_resblocks = 2;
    cfg.model.dfe_blocks = 1;
    cfg.model.cfe_blocks = 1;
    cfg.model.attn_heads = 2;
    cfg.train.epochs = 125;          // 500 steps over 4 samples at batch 1
    cfg.train.lr_init = 2e-3;
    cfg.train.lr_half_every = 1000;  // effectively constant at toy length
    cfg.train.loss_switch_epoch = 60;
    cfg.data.dataset = "synthetic";
    cfg.data.synthetic_count = 4;
    cfg.data.synthetic_size = 32;
  } else if (name == "full") {
    cfg.model.preset = "full";
    cfg.model.channels = 64;
    cfg.model.ggn_resblocks = 4;
    cfg.model.dfe_blocks = 4;
    cfg.model.cfe_blocks = 4;
    cfg.model.attn_heads = 4;
    cfg.train.epochs = 300;
    cfg.train.lr_init = 2e-4;
    cfg.train.lr_half_every = 80;
    cfg.train.loss_switch_epoch = 150;
    cfg.train.patch_hr = 256;
    cfg.data.dataset = "nyu_train";
  } else {
    fail("unknown preset '" + name + "' (expected toy or full)");
  }
  return cfg;
}

std::string to_string(GuidanceMode m) {
  return m == GuidanceMode::full ? "full" : "none";
}
std::string to_string(CompressMode m) {
  return m == CompressMode::block_mean ? "block_mean" : "global_avg";
}
std::string to_string(FuseMode m) {
  return m == FuseMode::multiply ? "multiply" : "concat";
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    require(pos == v.size(), "");
    return x;
  } catch (...) {
    fail("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    require(pos == v.size(), "");
    return x;
  } catch (...) {
    fail("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail("config: key '" + key + "' expects true/false, got '" + v + "'");
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t x = std::stoull(v, &pos);
    require(pos == v.size(), "");
    return x;
  } catch (...) {
    fail("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> to_key_values(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["preset"] = cfg.model.preset;
  kv["scale"] = std::to_string(cfg.model.scale);
  kv["channels"] = std::to_string(cfg.model.channels);
  kv["guidance_k"] = std::to_string(cfg.model.guidance_k);
  kv["ggn_resblocks"] = std::to_string(cfg.model.ggn_resblocks);
  kv["dfe_blocks"] = std::to_string(cfg.model.dfe_blocks);
  kv["cfe_blocks"] = std::to_string(cfg.model.cfe_blocks);
  kv["attn_heads"] = std::to_string(cfg.model.attn_heads);
  kv["ffn_expansion"] = std::to_string(cfg.model.ffn_expansion);
  kv["diffusion_steps"] = std::to_string(cfg.model.diffusion_steps);
  kv["beta_start"] = fmt_double(cfg.model.beta_start);
  kv["beta_end"] = fmt_double(cfg.model.beta_end);
  kv["denoiser_hidden"] = std::to_string(cfg.model.denoiser_hidden);
  kv["global_residual"] = cfg.model.global_residual ? "true" : "false";
  kv["guidance_mode"] = to_string(cfg.model.guidance_mode);
  kv["compress_mode"] = to_string(cfg.model.compress_mode);
  kv["fuse_mode"] = to_string(cfg.model.fuse_mode);
  kv["stage"] = std::to_string(cfg.train.stage);
  kv["epochs"] = std::to_string(cfg.train.epochs);
  kv["batch_size"] = std::to_string(cfg.train.batch_size);
  kv["lr_init"] = fmt_double(cfg.train.lr_init);
  kv["lr_half_every"] = std::to_string(cfg.train.lr_half_every);
  kv["adam_beta1"] = fmt_double(cfg.train.adam_beta1);
  kv["adam_beta2"] = fmt_double(cfg.train.adam_beta2);
  kv["adam_eps"] = fmt_double(cfg.train.adam_eps);
  kv["loss_switch_epoch"] = std::to_string(cfg.train.loss_switch_epoch);
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["patch_hr"] = std::to_string(cfg.train.patch_hr);
  kv["patches_per_image"] = std::to_string(cfg.train.patches_per_image);
  kv["warm_start_dsrn"] = cfg.train.warm_start_dsrn ? "true" : "false";
  kv["dataset"] = cfg.data.dataset;
  kv["data_root"] = cfg.data.data_root;
  kv["synthetic_count"] = std::to_string(cfg.data.synthetic_count);
  kv["synthetic_size"] = std::to_string(cfg.data.synthetic_size);
  return kv;
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") cfg.model.preset = value;
  else if (key == "scale") cfg.model.scale = parse_int(key, value);
  else if (key == "channels") cfg.model.channels = parse_int(key, value);
  else if (key == "guidance_k") cfg.model.guidance_k = parse_int(key, value);
  else if (key == "ggn_resblocks") cfg.model.ggn_resblocks = parse_int(key, value);
  else if (key == "dfe_blocks") cfg.model.dfe_blocks = parse_int(key, value);
  else if (key == "cfe_blocks") cfg.model.cfe_blocks = parse_int(key, value);
  else if (key == "attn_heads") cfg.model.attn_heads = parse_int(key, value);
  else if (key == "ffn_expansion") cfg.model.ffn_expansion = parse_int(key, value);
  else if (key == "diffusion_steps") cfg.model.diffusion_steps = parse_int(key, value);
  else if (key == "beta_start") cfg.model.beta_start = parse_double(key, value);
  else if (key == "beta_end") cfg.model.beta_end = parse_double(key, value);
  else if (key == "denoiser_hidden") cfg.model.denoiser_hidden = parse_int(key, value);
  else if (key == "global_residual") cfg.model.global_residual = parse_bool(key, value);
  else if (key == "guidance_mode") {
    if (value == "full") cfg.model.guidance_mode = GuidanceMode::full;
    else if (value == "none") cfg.model.guidance_mode = GuidanceMode::none;
    else fail("config: guidance_mode must be full or none");
  } else if (key == "compress_mode") {
    if (value == "block_mean") cfg.model.compress_mode = CompressMode::block_mean;
    else if (value == "global_avg") cfg.model.compress_mode = CompressMode::global_avg;
    else fail("config: compress_mode must be block_mean or global_avg");
  } else if (key == "fuse_mode") {
    if (value == "multiply") cfg.model.fuse_mode = FuseMode::multiply;
    else if (value == "concat") cfg.model.fuse_mode = FuseMode::concat;
    else fail("config: fuse_mode must be multiply or concat");
  }
  else if (key == "stage") cfg.train.stage = parse_int(key, value);
  else if (key == "epochs") cfg.train.epochs = parse_int(key, value);
  else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
  else if (key == "lr_init") cfg.train.lr_init = parse_double(key, value);
  else if (key == "lr_half_every") cfg.train.lr_half_every = parse_int(key, value);
  else if (key == "adam_beta1") cfg.train.adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") cfg.train.adam_beta2 = parse_double(key, value);
  else if (key == "adam_eps") cfg.train.adam_eps = parse_double(key, value);
  else if (key == "loss_switch_epoch") cfg.train.loss_switch_epoch = parse_int(key, value);
  else if (key == "seed") cfg.train.seed = parse_u64(key, value);
  else if (key == "patch_hr") cfg.train.patch_hr = parse_int(key, value);
  else if (key == "patches_per_image") cfg.train.patches_per_image = parse_int(key, value);
  else if (key == "warm_start_dsrn") cfg.train.warm_start_dsrn = parse_bool(key, value);
  else if (key == "dataset") cfg.data.dataset = value;
  else if (key == "data_root") cfg.data.data_root = value;
  else if (key == "synthetic_count") cfg.data.synthetic_count = parse_int(key, value);
  else if (key == "synthetic_size") cfg.data.synthetic_size = parse_int(key, value);
  else fail("config: unknown key '" + key + "'");
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  RunConfig cfg = base;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("config: " + path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("config: cannot write '" + path + "'");
  for (const auto& [k, v] : to_key_values(cfg)) out << k << " = " << v << "\n";
}

}  // namespace dsrdiff
