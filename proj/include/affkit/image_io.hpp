#pragma once

#include <png.h>

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/image.hpp"

namespace affkit {

namespace detail {

inline float luma(double r, double g, double b) {
  return static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
}

// Reads the next header token of a PNM file, skipping whitespace and comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

inline GrayImage load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open file");
  const std::string magic = pnm_token(in);
  const bool ascii = (magic == "P2" || magic == "P3");
  const bool binary = (magic == "P5" || magic == "P6");
  const bool color = (magic == "P3" || magic == "P6");
  if (!ascii && !binary) throw IoError(path, "unsupported PNM magic '" + magic + "'");

  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pnm_token(in));
    height = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError(path, "malformed PNM header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    throw IoError(path, "invalid PNM dimensions or maxval");

  const int channels = color ? 3 : 1;
  const size_t count = static_cast<size_t>(width) * height * channels;
  std::vector<double> raw(count);

  if (ascii) {
    for (size_t i = 0; i < count; ++i) {
      const std::string tok = pnm_token(in);
      if (tok.empty()) throw IoError(path, "truncated ASCII PNM data");
      raw[i] = std::stod(tok);
    }
  } else {
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<uint8_t> buf(count * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size())
      throw IoError(path, "truncated binary PNM data");
    for (size_t i = 0; i < count; ++i) {
      raw[i] = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
    }
  }

  GrayImage img(width, height);
  for (size_t i = 0; i < static_cast<size_t>(width) * height; ++i) {
    double v;
    if (color)
      v = luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
    else
      v = raw[i];
    img.pixels[i] = static_cast<float>(v / maxval);
  }
  return img;
}

inline GrayImage load_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError(path, png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError(path, msg);
  }
  GrayImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = luma(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) / 255.0f;
  return img;
}

}  // namespace detail

// Loads a PGM/PPM (ASCII or binary) or PNG image as grayscale in [0, 1].
// Color is converted with the 0.299/0.587/0.114 luma weights.
inline GrayImage load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError(path, "cannot open file");
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] >= '1' && magic[1] <= '6')
    return detail::load_pnm(path);
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P')
    return detail::load_png(path);
  throw IoError(path, "unrecognized image format (expect PGM/PPM or PNG)");
}

// Debug dump as binary 8-bit PGM; values are clamped to [0, 1].
inline void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> buf(img.pixels.size());
  for (size_t i = 0; i < buf.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    buf[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(path, "write failed");
}

}  // namespace affkit
