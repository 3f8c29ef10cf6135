#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoseg/errors.hpp"

namespace geoseg {

/// Row-major 8-bit grayscale image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, uint8_t fill = 0) : width(w), height(h), data(size_t(w) * h, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  uint8_t at(int x, int y) const { return data[size_t(y) * width + x]; }
  uint8_t& at(int x, int y) { return data[size_t(y) * width + x]; }

  bool operator==(const GrayImage& o) const {
    return width == o.width && height == o.height && data == o.data;
  }
};

/// Bilinear sample with border clamp; wrap_x wraps the x axis mod width.
double bilinear_sample(const GrayImage& img, double x, double y, bool wrap_x = false);

/// Separable Gaussian blur, kernel radius 3 sigma, border clamped
/// (x wraps when wrap_x).
GrayImage gaussian_blur(const GrayImage& img, double sigma, bool wrap_x = false);

/// Reads binary PGM ("P5") or PPM ("P6", converted to luma
/// round(0.299 R + 0.587 G + 0.114 B)). Throws IoError / ParseError.
GrayImage read_pnm(const std::string& path);

/// Writes binary PGM, maxval 255.
void write_pgm(const GrayImage& img, const std::string& path);

}  // namespace geoseg
