#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsrdiff/tensor.hpp"

namespace dsrdiff {

// One RGB-D record. Depth is stored min-max normalized to [0,1] with the
// native-unit (meter) extrema kept for metric-time denormalization.
struct RgbdSample {
  Tensor color_hr;  // {H,W,3} in [0,1]
  Tensor depth_hr;  // {H,W,1} normalized
  Tensor depth_lr;  // {H/s,W/s,1} normalized
  double depth_min = 0.0;
  double depth_max = 0.0;
  int scale = 0;
  std::string id;
};

struct DatasetSplit {
  std::vector<RgbdSample> samples;
  std::string name;
  uint64_t seed = 0;
};

struct NormalizedDepth {
  Tensor normalized;
  double depth_min;
  double depth_max;
};

// (raw - min) / (max - min); rejects all-equal or non-finite maps.
NormalizedDepth normalize_depth(const Tensor& raw);
Tensor denormalize_depth(const Tensor& normalized, double depth_min, double depth_max);

// Anti-aliased bicubic downsampling of a normalized depth map, clamped back
// to [0,1] to absorb filter overshoot.
Tensor synthesize_lr(const Tensor& depth_hr, int scale);

// Directory layout per split: <root>/<name>/<id>_color.png,
// <id>_depth.npy (meters) or <id>_depth.png (16-bit millimeters), and
// manifest.txt with one id per line. Samples come back sorted by id.
// Strict mode rejects dimensions not divisible by scale; allow_crop enables
// the center-crop fallback instead.
DatasetSplit load_dataset(const std::string& root, const std::string& name,
                          int scale, bool allow_crop = false);

// Deterministic scale-aligned crops; depth_lr is re-synthesized per patch
// through the same code path as the loader.
std::vector<RgbdSample> extract_patches(const DatasetSplit& split, int patch_hr,
                                        int patches_per_image, uint64_t seed);

// Piecewise-smooth scene: a sloped background plus four rectangular plateaus
// at distinct depths. Color edges coincide with the depth edges, while a
// diagonal stripe texture adds color-only edges as texture-copy bait.
RgbdSample make_synthetic_scene(uint64_t seed, int size, int scale = 4);

// Writes `count` scenes in the dataset layout under <root>/synthetic/.
void write_synthetic_dataset(const std::string& root, int count, int size,
                             uint64_t seed);

// In-memory split of generated scenes (used by the toy preset).
DatasetSplit make_synthetic_split(int count, int size, int scale, uint64_t seed);

}  // namespace dsrdiff
