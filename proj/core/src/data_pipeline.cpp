#include "dsrdiff/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dsrdiff/image_io.hpp"
#include "dsrdiff/resample.hpp"

namespace fs = std::filesystem;

namespace dsrdiff {

namespace {

const std::set<std::string> kKnownSplits = {"nyu_train", "nyu_test", "middlebury",
                                            "lu", "synthetic"};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Tensor center_crop(const Tensor& t, int crop_h, int crop_w) {
  const int h = t.dim(0), w = t.dim(1), c = t.dim(2);
  const int y0 = (h - crop_h) / 2, x0 = (w - crop_w) / 2;
  Tensor out = Tensor::zeros({crop_h, crop_w, c});
  for (int y = 0; y < crop_h; ++y) {
    for (int x = 0; x < crop_w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        out.data()[(static_cast<int64_t>(y) * crop_w + x) * c + ch] =
            t.data()[(static_cast<int64_t>(y + y0) * w + x + x0) * c + ch];
      }
    }
  }
  return out;
}

Tensor crop_at(const Tensor& t, int y0, int x0, int h, int w) {
  const int sw = t.dim(1), c = t.dim(2);
  Tensor out = Tensor::zeros({h, w, c});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        out.data()[(static_cast<int64_t>(y) * w + x) * c + ch] =
            t.data()[(static_cast<int64_t>(y + y0) * sw + x + x0) * c + ch];
      }
    }
  }
  return out;
}

}  // namespace

NormalizedDepth normalize_depth(const Tensor& raw) {
  require(raw.defined() && raw.size() >= 2, "normalize_depth: need at least two values");
  double mn = raw.data()[0], mx = raw.data()[0];
  for (int64_t i = 0; i < raw.size(); ++i) {
    const double v = raw.data()[i];
    if (!std::isfinite(v)) fail("degenerate depth map: non-finite values");
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (!(mx > mn)) fail("degenerate depth map: all values equal");
  NormalizedDepth out;
  out.depth_min = mn;
  out.depth_max = mx;
  out.normalized = Tensor::zeros(raw.shape());
  const double inv = 1.0 / (mx - mn);
  for (int64_t i = 0; i < raw.size(); ++i) {
    out.normalized.data()[i] = (raw.data()[i] - mn) * inv;
  }
  return out;
}

Tensor denormalize_depth(const Tensor& normalized, double depth_min, double depth_max) {
  Tensor out = Tensor::zeros(normalized.shape());
  const double range = depth_max - depth_min;
  for (int64_t i = 0; i < normalized.size(); ++i) {
    out.data()[i] = normalized.data()[i] * range + depth_min;
  }
  return out;
}

Tensor synthesize_lr(const Tensor& depth_hr, int scale) {
  require(depth_hr.shape().size() == 3 && depth_hr.dim(2) == 1,
          "synthesize_lr: input must be {H,W,1}");
  require(depth_hr.dim(0) % scale == 0 && depth_hr.dim(1) % scale == 0,
          "synthesize_lr: dims " + shape_str(depth_hr.shape()) +
              " not divisible by scale " + std::to_string(scale));
  Tensor lr = bicubic_downsample(depth_hr, scale);
  for (int64_t i = 0; i < lr.size(); ++i) {
    lr.data()[i] = std::clamp(lr.data()[i], 0.0, 1.0);
  }
  return lr;
}

namespace {

Tensor load_color_png(const std::string& path) {
  if (!fs::exists(path)) fail("missing color file '" + path + "'");
  const PngImage img = read_png(path);
  if (img.channels != 3) fail("color file '" + path + "' is not RGB");
  const double denom = img.bit_depth == 16 ? 65535.0 : 255.0;
  Tensor t = Tensor::zeros({img.height, img.width, 3});
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    t.data()[static_cast<int64_t>(i)] = img.pixels[i] / denom;
  }
  return t;
}

// Depth in meters: .npy holds meters directly, 16-bit PNG holds millimeters.
Tensor load_depth_raw(const std::string& base) {
  const std::string npy_path = base + "_depth.npy";
  const std::string png_path = base + "_depth.png";
  if (fs::exists(npy_path)) {
    const NpyArray arr = read_npy(npy_path);
    require(arr.shape.size() == 2 ||
                (arr.shape.size() == 3 && arr.shape[2] == 1),
            "depth file '" + npy_path + "' must be a 2-D array");
    return Tensor::from_vec({arr.shape[0], arr.shape[1], 1}, arr.data);
  }
  if (fs::exists(png_path)) {
    const PngImage img = read_png(png_path);
    if (img.channels != 1) fail("depth file '" + png_path + "' is not grayscale");
    Tensor t = Tensor::zeros({img.height, img.width, 1});
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      t.data()[static_cast<int64_t>(i)] = img.pixels[i] / 1000.0;
    }
    return t;
  }
  fail("missing depth file '" + npy_path + "' (or `.png`)");
}

}  // namespace

DatasetSplit load_dataset(const std::string& root, const std::string& name,
                          int scale, bool allow_crop) {
  require(scale == 4 || scale == 8 || scale == 16, "load_dataset: scale must be 4, 8 or 16");
  require(kKnownSplits.count(name) > 0, "load_dataset: unknown split '" + name + "'");
  const fs::path dir = fs::path(root) / name;
  const fs::path manifest = dir / "manifest.txt";
  if (!fs::exists(manifest)) {
    fail("no samples found under '" + dir.string() + "' (missing manifest.txt)");
  }
  std::ifstream in(manifest);
  if (!in) fail("cannot open manifest '" + manifest.string() + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) ids.push_back(line);
  }
  if (ids.empty()) fail("no samples found in '" + manifest.string() + "'");
  std::sort(ids.begin(), ids.end());

  if (name == "nyu_train" && ids.size() != 1000) {
    fail("split nyu_train expects 1000 ids, manifest has " + std::to_string(ids.size()));
  }
  if (name == "nyu_test" && ids.size() != 449) {
    fail("split nyu_test expects 449 ids, manifest has " + std::to_string(ids.size()));
  }

  DatasetSplit split;
  split.name = name;
  split.samples.reserve(ids.size());
  for (const auto& id : ids) {
    const std::string base = (dir / id).string();
    Tensor color = load_color_png(base + "_color.png");
    Tensor depth_raw = load_depth_raw(base);
    if (color.dim(0) != depth_raw.dim(0) || color.dim(1) != depth_raw.dim(1)) {
      fail("sample '" + id + "': color " + shape_str(color.shape()) +
           " and depth " + shape_str(depth_raw.shape()) + " sizes differ");
    }
    const int h = color.dim(0), w = color.dim(1);
    if (h % scale != 0 || w % scale != 0) {
      if (!allow_crop) {
        fail("sample '" + id + "': size " + std::to_string(h) + "x" +
             std::to_string(w) + " not divisible by scale " +
             std::to_string(scale) + " (strict mode; enable crop fallback)");
      }
      const int ch = h - h % scale, cw = w - w % scale;
      color = center_crop(color, ch, cw);
      depth_raw = center_crop(depth_raw, ch, cw);
    }
    RgbdSample s;
    try {
      NormalizedDepth nd = normalize_depth(depth_raw);
      s.depth_hr = nd.normalized;
      s.depth_min = nd.depth_min;
      s.depth_max = nd.depth_max;
    } catch (const std::exception& e) {
      fail("sample '" + id + "': " + e.what());
    }
    s.color_hr = color;
    s.scale = scale;
    s.id = id;
    s.depth_lr = synthesize_lr(s.depth_hr, scale);
    split.samples.push_back(std::move(s));
  }
  return split;
}

std::vector<RgbdSample> extract_patches(const DatasetSplit& split, int patch_hr,
                                        int patches_per_image, uint64_t seed) {
  require(patches_per_image >= 1, "extract_patches: need at least one patch per image");
  RandomEngine rng(sub_seed(seed, "patches"));
  std::vector<RgbdSample> out;
  out.reserve(split.samples.size() * static_cast<size_t>(patches_per_image));
  for (const auto& s : split.samples) {
    const int h = s.depth_hr.dim(0), w = s.depth_hr.dim(1);
    require(patch_hr % s.scale == 0,
            "extract_patches: patch size not divisible by scale");
    require(patch_hr >= s.scale, "extract_patches: patch smaller than scale");
    if (patch_hr > h || patch_hr > w) {
      fail("extract_patches: patch " + std::to_string(patch_hr) +
           " larger than image '" + s.id + "' (" + std::to_string(h) + "x" +
           std::to_string(w) + ")");
    }
    const int ymax = (h - patch_hr) / s.scale;
    const int xmax = (w - patch_hr) / s.scale;
    for (int p = 0; p < patches_per_image; ++p) {
      const int y0 = s.scale * static_cast<int>(rng.randint(ymax + 1));
      const int x0 = s.scale * static_cast<int>(rng.randint(xmax + 1));
      RgbdSample patch;
      patch.color_hr = crop_at(s.color_hr, y0, x0, patch_hr, patch_hr);
      patch.depth_hr = crop_at(s.depth_hr, y0, x0, patch_hr, patch_hr);
      patch.depth_lr = synthesize_lr(patch.depth_hr, s.scale);
      patch.depth_min = s.depth_min;
      patch.depth_max = s.depth_max;
      patch.scale = s.scale;
      patch.id = s.id + "#" + std::to_string(y0) + "_" + std::to_string(x0);
      out.push_back(std::move(patch));
    }
  }
  return out;
}

namespace {

struct NativeScene {
  Tensor depth;  // meters
  Tensor color;  // [0,1]
};

NativeScene make_native_scene(uint64_t seed, int size) {
  RandomEngine rng(seed);
  NativeScene sc;
  sc.depth = Tensor::zeros({size, size, 1});
  sc.color = Tensor::zeros({size, size, 3});

  // Sloped background plane.
  const double d0 = rng.uniform(1.0, 1.5);
  const double gx = rng.uniform(-0.4, 0.4);
  const double gy = rng.uniform(-0.4, 0.4);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      sc.depth.data()[static_cast<int64_t>(y) * size + x] =
          d0 + gx * x / size + gy * y / size;
    }
  }

  // Background texture: diagonal stripes, edges nowhere near depth edges.
  double pal[2][3];
  for (auto& p : pal) {
    for (double& v : p) v = rng.uniform(0.15, 0.9);
  }
  const int period = std::max(2, size / 8);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double* p = pal[((x + y) / period) % 2];
      double* c = sc.color.data() + (static_cast<int64_t>(y) * size + x) * 3;
      c[0] = p[0];
      c[1] = p[1];
      c[2] = p[2];
    }
  }

  // One rectangular plateau per quadrant; distinct depths, solid colors whose
  // borders coincide with the depth discontinuities.
  const int q = size / 2;
  const int jitter = q / 4;
  int r = 0;
  for (int qy = 0; qy < 2; ++qy) {
    for (int qx = 0; qx < 2; ++qx, ++r) {
      const int y0 = qy * q + static_cast<int>(rng.randint(jitter + 1));
      const int x0 = qx * q + static_cast<int>(rng.randint(jitter + 1));
      const int y1 = (qy + 1) * q - static_cast<int>(rng.randint(jitter + 1));
      const int x1 = (qx + 1) * q - static_cast<int>(rng.randint(jitter + 1));
      const double dr = 2.0 + 0.6 * r + rng.uniform(0.0, 0.2);
      double rc[3];
      for (double& v : rc) v = rng.uniform(0.05, 0.95);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          sc.depth.data()[static_cast<int64_t>(y) * size + x] = dr;
          double* c = sc.color.data() + (static_cast<int64_t>(y) * size + x) * 3;
          c[0] = rc[0];
          c[1] = rc[1];
          c[2] = rc[2];
        }
      }
    }
  }
  return sc;
}

}  // namespace

RgbdSample make_synthetic_scene(uint64_t seed, int size, int scale) {
  require(size >= 16 && size % 16 == 0, "make_synthetic_scene: size must be a multiple of 16");
  const NativeScene sc = make_native_scene(seed, size);
  RgbdSample s;
  NormalizedDepth nd = normalize_depth(sc.depth);
  s.depth_hr = nd.normalized;
  s.depth_min = nd.depth_min;
  s.depth_max = nd.depth_max;
  s.color_hr = sc.color;
  s.scale = scale;
  s.depth_lr = synthesize_lr(s.depth_hr, scale);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04llu", static_cast<unsigned long long>(seed % 10000));
  s.id = buf;
  return s;
}

void write_synthetic_dataset(const std::string& root, int count, int size,
                             uint64_t seed) {
  require(count >= 1, "write_synthetic_dataset: count must be positive");
  require(size >= 16 && size % 16 == 0, "write_synthetic_dataset: size must be a multiple of 16");
  const fs::path dir = fs::path(root) / "synthetic";
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) fail("cannot write manifest under '" + dir.string() + "'");
  for (int i = 0; i < count; ++i) {
    const NativeScene sc = make_native_scene(sub_seed(seed, "scene-" + std::to_string(i)), size);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    const std::string id = buf;
    manifest << id << "\n";

    std::vector<uint8_t> rgb(static_cast<size_t>(size) * size * 3);
    for (size_t j = 0; j < rgb.size(); ++j) {
      rgb[j] = static_cast<uint8_t>(
          std::lround(std::clamp(sc.color.data()[static_cast<int64_t>(j)], 0.0, 1.0) * 255.0));
    }
    write_png8((dir / (id + "_color.png")).string(), size, size, 3, rgb);

    std::vector<double> depth(sc.depth.data(), sc.depth.data() + sc.depth.size());
    write_npy((dir / (id + "_depth.npy")).string(), {size, size}, depth);
  }
}

DatasetSplit make_synthetic_split(int count, int size, int scale, uint64_t seed) {
  DatasetSplit split;
  split.name = "synthetic";
  split.seed = seed;
  split.samples.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    RgbdSample s = make_synthetic_scene(sub_seed(seed, "scene-" + std::to_string(i)),
                                        size, scale);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    s.id = buf;
    split.samples.push_back(std::move(s));
  }
  return split;
}

}  // namespace dsrdiff
