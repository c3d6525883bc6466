/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// PNG reading and writing on top of libpng's classic API. The setjmp-based
// error handling is confined to small functions that own no C++ objects.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "csfp/error.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

namespace detail {

struct PngErrorSink {
  char message[256] = {0};
};

extern "C" inline void png_error_to_sink(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  if (sink != nullptr) {
    std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  }
  png_longjmp(png, 1);
}

extern "C" inline void png_warning_ignored(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

inline bool png_read_header(png_structp png, png_infop info, std::FILE* fp,
                            PngHeader* header) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_read_info(png, info);
  png_get_IHDR(png, info, &header->width, &header->height, &header->bit_depth,
               &header->color_type, nullptr, nullptr, nullptr);
  if (header->color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  return true;
}

inline bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

inline bool png_write_all(png_structp png, png_infop info, std::FILE* fp,
                          png_uint_32 width, png_uint_32 height,
                          int color_type, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

}  // namespace detail

// Reads an 8- or 16-bit grayscale or RGB PNG (an alpha channel is dropped).
// Gray files become (1,H,W) LUMA images, color files (3,H,W) RGB images.
inline PlanarImage load_image(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(Errc::kIo, "cannot open " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(Errc::kFormat, path.string() + " is not a PNG file");
  }

  detail::PngErrorSink sink;
  png_structp png = png_create_read_struct(
      PNG_LIBPNG_VER_STRING, &sink, detail::png_error_to_sink,
      detail::png_warning_ignored);
  if (png == nullptr) throw Error(Errc::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  auto destroy = [&] { png_destroy_read_struct(&png, &info, nullptr); };
  if (info == nullptr) {
    destroy();
    throw Error(Errc::kIo, "png_create_info_struct failed");
  }
  png_set_sig_bytes(png, 8);

  detail::PngHeader header;
  if (!detail::png_read_header(png, info, fp.get(), &header)) {
    destroy();
    throw Error(Errc::kFormat, path.string() + ": " + sink.message);
  }
  const int base_type = header.color_type & ~PNG_COLOR_MASK_ALPHA;
  if (header.color_type == PNG_COLOR_TYPE_PALETTE) {
    destroy();
    throw Error(Errc::kFormat, path.string() + ": palette PNGs unsupported");
  }
  if (header.bit_depth != 8 && header.bit_depth != 16) {
    destroy();
    throw Error(Errc::kFormat, path.string() + ": unsupported bit depth " +
                                   std::to_string(header.bit_depth));
  }
  const std::size_t channels = base_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t h = header.height, w = header.width;
  const std::size_t bytes_per_sample = header.bit_depth / 8;
  const std::size_t row_bytes = w * channels * bytes_per_sample;
  if (png_get_rowbytes(png, info) != row_bytes) {
    destroy();
    throw Error(Errc::kFormat, path.string() + ": unexpected row layout");
  }

  std::vector<unsigned char> pixels(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = pixels.data() + r * row_bytes;
  if (!detail::png_read_rows(png, rows.data())) {
    destroy();
    throw Error(Errc::kFormat, path.string() + ": " + sink.message);
  }
  destroy();

  Tensor t({channels, h, w});
  const double scale = header.bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t r = 0; r < h; ++r) {
    const unsigned char* row = rows[r];
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const std::size_t k = (c * channels + ch) * bytes_per_sample;
        const unsigned v = bytes_per_sample == 2
                               ? (static_cast<unsigned>(row[k]) << 8) | row[k + 1]
                               : row[k];
        t.at(ch, r, c) = static_cast<double>(v) / scale;
      }
    }
  }
  return PlanarImage(std::move(t),
                     channels == 3 ? ColorSpace::kRgb : ColorSpace::kLuma);
}

// 8-bit quantization used by save_image: round half up of v * 255.
inline unsigned char quantize8(double v) {
  return static_cast<unsigned char>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

// Writes an 8-bit gray (LUMA) or RGB PNG.
inline void save_image(const PlanarImage& img,
                       const std::filesystem::path& path) {
  const std::size_t channels = img.channels();
  const std::size_t h = img.height(), w = img.width();
  const std::size_t row_bytes = w * channels;
  std::vector<unsigned char> pixels(row_bytes * h);
  const Tensor& t = img.tensor();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        pixels[r * row_bytes + c * channels + ch] = quantize8(t.at(ch, r, c));
      }
    }
  }
  std::vector<png_bytep> rows(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = pixels.data() + r * row_bytes;

  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(Errc::kIo, "cannot create " + path.string());

  detail::PngErrorSink sink;
  png_structp png = png_create_write_struct(
      PNG_LIBPNG_VER_STRING, &sink, detail::png_error_to_sink,
      detail::png_warning_ignored);
  if (png == nullptr) throw Error(Errc::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(Errc::kIo, "png_create_info_struct failed");
  }
  const int color_type = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  const bool ok = detail::png_write_all(png, info, fp.get(),
                                        static_cast<png_uint_32>(w),
                                        static_cast<png_uint_32>(h), color_type,
                                        rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(Errc::kIo, path.string() + ": " + sink.message);
  if (std::fflush(fp.get()) != 0) {
    throw Error(Errc::kIo, "write failed for " + path.string());
  }
}

}  // namespace csfp
