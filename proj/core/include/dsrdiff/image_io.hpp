#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsrdiff/common.hpp"

namespace dsrdiff {

// Decoded PNG; samples widened to 16 bits regardless of file depth.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 or 3 after decode
  int bit_depth = 0;  // 8 or 16 as stored in the file
  std::vector<uint16_t> pixels;  // row-major, interleaved
};

PngImage read_png(const std::string& path);
void write_png8(const std::string& path, int width, int height, int channels,
                const std::vector<uint8_t>& pixels);
void write_png16_gray(const std::string& path, int width, int height,
                      const std::vector<uint16_t>& pixels);

// Minimal NumPy .npy support: version 1.0, C order, dtypes <f8, <f4, <u2.
// Data is returned as doubles.
struct NpyArray {
  std::vector<int> shape;
  std::vector<double> data;
};

NpyArray read_npy(const std::string& path);
void write_npy(const std::string& path, const std::vector<int>& shape,
               const std::vector<double>& data);

}  // namespace dsrdiff
