#include "dsrdiff/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace dsrdiff {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

PngImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("cannot open PNG file '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng: failed to create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("libpng: failed to create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("corrupt PNG file '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // PNG stores big-endian
  png_read_update_info(png, info);

  PngImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  img.bit_depth = static_cast<int>(png_get_bit_depth(png, info));
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("PNG file '" + path + "' has unsupported channel count");
  }

  img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  std::vector<uint8_t> raw8;
  if (img.bit_depth == 8) {
    raw8.resize(img.pixels.size());
    for (int y = 0; y < img.height; ++y) {
      rows[static_cast<size_t>(y)] =
          raw8.data() + static_cast<size_t>(y) * img.width * img.channels;
    }
  } else {
    for (int y = 0; y < img.height; ++y) {
      rows[static_cast<size_t>(y)] = reinterpret_cast<png_bytep>(
          img.pixels.data() + static_cast<size_t>(y) * img.width * img.channels);
    }
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (img.bit_depth == 8) {
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = raw8[i];
  }
  return img;
}

void write_png8(const std::string& path, int width, int height, int channels,
                const std::vector<uint8_t>& pixels) {
  require(channels == 1 || channels == 3, "write_png8: channels must be 1 or 3");
  require(pixels.size() == static_cast<size_t>(width) * height * channels,
          "write_png8: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot write PNG file '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng: failed to create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("libpng: failed to create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("libpng: write failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
        pixels.data() + static_cast<size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png16_gray(const std::string& path, int width, int height,
                      const std::vector<uint16_t>& pixels) {
  require(pixels.size() == static_cast<size_t>(width) * height,
          "write_png16_gray: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot write PNG file '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng: failed to create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("libpng: failed to create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("libpng: write failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, reinterpret_cast<png_bytep>(const_cast<uint16_t*>(
        pixels.data() + static_cast<size_t>(y) * width)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

std::string npy_header_for(const std::vector<int>& shape) {
  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < shape.size(); ++i) {
    dict += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) dict += ", ";
  }
  if (shape.size() == 1) dict.resize(dict.size() - 1);  // keep "(n,)"
  dict += "), }";
  // Total header (magic + version + len + dict + padding + '\n') aligns to 64.
  const size_t base = 6 + 2 + 2;
  size_t total = base + dict.size() + 1;
  const size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict += '\n';
  return dict;
}

}  // namespace

NpyArray read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open npy file '" + path + "'");
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kNpyMagic, 6) != 0) {
    fail("'" + path + "' is not an npy file");
  }
  uint8_t ver[2];
  in.read(reinterpret_cast<char*>(ver), 2);
  uint32_t hlen = 0;
  if (ver[0] == 1) {
    uint16_t h16 = 0;
    in.read(reinterpret_cast<char*>(&h16), 2);
    hlen = h16;
  } else if (ver[0] == 2) {
    in.read(reinterpret_cast<char*>(&hlen), 4);
  } else {
    fail("unsupported npy version in '" + path + "'");
  }
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  if (!in) fail("truncated npy header in '" + path + "'");

  const auto find_value = [&](const std::string& key) -> std::string {
    const auto kpos = header.find("'" + key + "'");
    if (kpos == std::string::npos) fail("npy header missing '" + key + "' in '" + path + "'");
    auto vpos = header.find(':', kpos) + 1;
    while (vpos < header.size() && header[vpos] == ' ') ++vpos;
    return header.substr(vpos);
  };

  const std::string descr_tail = find_value("descr");
  std::string descr;
  if (descr_tail.size() >= 2 && descr_tail[0] == '\'') {
    descr = descr_tail.substr(1, descr_tail.find('\'', 1) - 1);
  }
  if (find_value("fortran_order").rfind("False", 0) != 0) {
    fail("npy '" + path + "': fortran order is not supported");
  }

  const std::string shape_tail = find_value("shape");
  require(!shape_tail.empty() && shape_tail[0] == '(', "npy '" + path + "': bad shape");
  NpyArray arr;
  size_t pos = 1;
  while (pos < shape_tail.size() && shape_tail[pos] != ')') {
    size_t used = 0;
    const int d = std::stoi(shape_tail.substr(pos), &used);
    arr.shape.push_back(d);
    pos += used;
    while (pos < shape_tail.size() && (shape_tail[pos] == ',' || shape_tail[pos] == ' ')) ++pos;
  }

  int64_t n = 1;
  for (int d : arr.shape) n *= d;
  arr.data.resize(static_cast<size_t>(n));

  if (descr == "<f8") {
    in.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(n * 8));
  } else if (descr == "<f4") {
    std::vector<float> tmp(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * 4));
    for (int64_t i = 0; i < n; ++i) arr.data[static_cast<size_t>(i)] = tmp[static_cast<size_t>(i)];
  } else if (descr == "<u2") {
    std::vector<uint16_t> tmp(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * 2));
    for (int64_t i = 0; i < n; ++i) arr.data[static_cast<size_t>(i)] = tmp[static_cast<size_t>(i)];
  } else {
    fail("npy '" + path + "': unsupported dtype '" + descr + "'");
  }
  if (!in) fail("truncated npy data in '" + path + "'");
  return arr;
}

void write_npy(const std::string& path, const std::vector<int>& shape,
               const std::vector<double>& data) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  require(static_cast<int64_t>(data.size()) == n, "write_npy: shape/data mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write npy file '" + path + "'");
  const std::string header = npy_header_for(shape);
  const uint16_t hlen = static_cast<uint16_t>(header.size());
  out.write(kNpyMagic, 6);
  const uint8_t ver[2] = {1, 0};
  out.write(reinterpret_cast<const char*>(ver), 2);
  out.write(reinterpret_cast<const char*>(&hlen), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * 8));
  if (!out) fail("failed writing npy file '" + path + "'");
}

}  // namespace dsrdiff
