/* Copyright 2026 The distributed-vdi Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VDI_IMAGE_IO_HPP_
#define VDI_IMAGE_IO_HPP_

// Float image dump, little-endian: magic "VIMG", width (u32), height (u32), then
// width*height pixels of premultiplied RGBA as 4 x f32, row-major from the top-left.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "vdi/common.hpp"
#include "vdi/dvr.hpp"

namespace vdi {

inline void write_float_image(const Image& img, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_bytes(std::as_bytes(std::span("VIMG", 4)));
  w.put(img.width);
  w.put(img.height);
  w.put_bytes(std::as_bytes(std::span(img.pixels)));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size())))
    throw Error("cannot write '" + path.string() + "'");
}

inline Image read_float_image(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  ByteReader r(bytes, "float image '" + path.string() + "'");
  if (std::memcmp(r.take(4).data(), "VIMG", 4) != 0) throw Error("'" + path.string() + "' is not a float image dump");
  const auto w = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  Image img(w, h);
  const auto px = r.take(img.pixels.size() * sizeof(img.pixels[0]));
  std::memcpy(img.pixels.data(), px.data(), px.size());
  if (r.remaining() != 0) throw Error("'" + path.string() + "' has trailing bytes");
  return img;
}

/// 8-bit RGB PNG of the image composited over `background`.
inline void write_png(const Image& img, const std::filesystem::path& path, std::array<double, 3> background = {0, 0, 0}) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("cannot write '" + path.string() + "'");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(fp, std::fclose);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialization failed");
  }
  std::vector<png_byte> row(std::size_t(img.width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t y = 0; y < img.height; ++y) {
    for (std::uint32_t x = 0; x < img.width; ++x) {
      const auto& p = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = p[c] + (1.0 - p[3]) * background[c];
        row[std::size_t(x) * 3 + c] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads any 8-bit PNG as an opaque image (alpha dropped, as PNGs here are pre-composited).
inline Image read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw Error("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  Image img(image.width, image.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = {buf[3 * i] / 255.0f, buf[3 * i + 1] / 255.0f, buf[3 * i + 2] / 255.0f, 1.0f};
  return img;
}

/// Dispatches on extension: ".png" or the float dump.
inline Image read_image(const std::filesystem::path& path) {
  return path.extension() == ".png" ? read_png(path) : read_float_image(path);
}

}  // namespace vdi

#endif  // VDI_IMAGE_IO_HPP_
