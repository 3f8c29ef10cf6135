#include "geoseg/image.hpp"

#include <cmath>
#include <fstream>

namespace geoseg {

double bilinear_sample(const GrayImage& img, double x, double y, bool wrap_x) {
  auto fetch = [&](int xi, int yi) -> double {
    if (wrap_x) {
      xi %= img.width;
      if (xi < 0) xi += img.width;
    } else {
      xi = std::min(std::max(xi, 0), img.width - 1);
    }
    yi = std::min(std::max(yi, 0), img.height - 1);
    return img.at(xi, yi);
  };
  double fx = std::floor(x), fy = std::floor(y);
  int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  double ax = x - fx, ay = y - fy;
  double top = fetch(x0, y0) * (1.0 - ax) + fetch(x0 + 1, y0) * ax;
  double bot = fetch(x0, y0 + 1) * (1.0 - ax) + fetch(x0 + 1, y0 + 1) * ax;
  return top * (1.0 - ay) + bot * ay;
}

namespace {

int next_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments, returns a non-negative integer.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) raise(Err::ParseError, "malformed PNM header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 30) raise(Err::ParseError, "PNM header value out of range");
    c = in.get();
  }
  return value;
}

}  // namespace

GrayImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::IoError, "cannot open " + path);
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    raise(Err::ParseError, path + ": expected P5 or P6");
  const bool color = magic[1] == '6';
  int w = next_pnm_token(in);
  int h = next_pnm_token(in);
  int maxval = next_pnm_token(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    raise(Err::ParseError, path + ": unsupported PNM geometry or maxval");
  // exactly one whitespace byte between header and raster
  GrayImage img(w, h);
  if (color) {
    std::vector<uint8_t> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), row.size());
      if (!in) raise(Err::ParseError, path + ": truncated raster");
      for (int x = 0; x < w; ++x) {
        double luma = 0.299 * row[3 * x] + 0.587 * row[3 * x + 1] + 0.114 * row[3 * x + 2];
        img.at(x, y) = static_cast<uint8_t>(std::lround(luma));
      }
    }
  } else {
    in.read(reinterpret_cast<char*>(img.data.data()), img.data.size());
    if (!in) raise(Err::ParseError, path + ": truncated raster");
  }
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  if (img.empty()) raise(Err::EmptyImage, "refusing to write an empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::IoError, "cannot open " + path + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  if (!out) raise(Err::IoError, "short write to " + path);
}

}  // namespace geoseg
