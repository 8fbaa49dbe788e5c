#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "warenav/errors.hpp"

namespace warenav {

/// Grayscale image with intensities in [0, 1], stored row-major.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 2 || height < 2) {
      throw Error(ErrorCode::kInvalidArgument, "image must be at least 2x2");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] double at(int u, int v) const { return data_[index(u, v)]; }
  double& at(int u, int v) { return data_[index(u, v)]; }

  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  [[nodiscard]] bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width_ - 1.0 && v <= height_ - 1.0;
  }

  /// Bilinear lookup; nullopt outside [0, w-1] x [0, h-1].
  [[nodiscard]] std::optional<double> sample(double u, double v) const {
    if (!contains(u, v)) return std::nullopt;
    int u0 = std::min(static_cast<int>(u), width_ - 2);
    int v0 = std::min(static_cast<int>(v), height_ - 2);
    const double fu = u - u0;
    const double fv = v - v0;
    const double* row0 = &data_[index(u0, v0)];
    const double* row1 = row0 + width_;
    return (1.0 - fv) * ((1.0 - fu) * row0[0] + fu * row0[1]) +
           fv * ((1.0 - fu) * row1[0] + fu * row1[1]);
  }

  /// Bilinear gradient (d/du, d/dv) at a sub-pixel location; the derivative
  /// of the interpolant itself, so it is consistent with sample().
  [[nodiscard]] std::optional<std::pair<double, double>> sample_gradient(
      double u, double v) const {
    if (!contains(u, v)) return std::nullopt;
    int u0 = std::min(static_cast<int>(u), width_ - 2);
    int v0 = std::min(static_cast<int>(v), height_ - 2);
    const double fu = u - u0;
    const double fv = v - v0;
    const double* row0 = &data_[index(u0, v0)];
    const double* row1 = row0 + width_;
    const double gu = (1.0 - fv) * (row0[1] - row0[0]) + fv * (row1[1] - row1[0]);
    const double gv = (1.0 - fu) * (row1[0] - row0[0]) + fu * (row1[1] - row0[1]);
    return std::pair{gu, gv};
  }

  /// Central-difference gradient magnitude; only defined on interior pixels.
  [[nodiscard]] double gradient_magnitude(int u, int v) const {
    const double gu = 0.5 * (at(u + 1, v) - at(u - 1, v));
    const double gv = 0.5 * (at(u, v + 1) - at(u, v - 1));
    return std::hypot(gu, gv);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  [[nodiscard]] std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Binary PGM (P5, maxval 255).

[[nodiscard]] inline GrayImage read_pgm(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "P5") throw Error(ErrorCode::kParse, "not a binary PGM (P5)");
  auto next_int = [&in]() {
    int value = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      if (!(in >> value)) throw Error(ErrorCode::kParse, "truncated PGM header");
      return value;
    }
  };
  const int width = next_int();
  const int height = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw Error(ErrorCode::kParse, "only 8-bit PGM supported");
  in.get();  // single whitespace byte before the raster
  GrayImage img(width, height);
  std::vector<unsigned char> raster(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw Error(ErrorCode::kParse, "truncated PGM raster");
  }
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      img.at(u, v) = raster[static_cast<std::size_t>(v) * width + u] / 255.0;
    }
  }
  return img;
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (double value : img.data()) {
    const double clamped = std::clamp(value, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(clamped * 255.0))));
  }
}

[[nodiscard]] inline GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  return read_pgm(in);
}

inline void save_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kParse, "cannot write " + path);
  write_pgm(out, img);
}

}  // namespace warenav
