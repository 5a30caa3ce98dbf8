#include "modfollow/raster.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include "modfollow/dataset.hpp"
#include "modfollow/tiers.hpp"

namespace modfollow {

RasterImage::RasterImage(int width, int height, Rgb fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Rgb RasterImage::at(int x, int y) const noexcept {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void RasterImage::set(int x, int y, Rgb c) noexcept {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
}

std::size_t RasterImage::count(Rgb c) const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < data_.size(); i += 3)
    n += (data_[i] == c.r && data_[i + 1] == c.g && data_[i + 2] == c.b) ? 1 : 0;
  return n;
}

namespace {

struct Point {
  double u;
  double v;
};

// Even-odd rule; handles the non-convex star.
template <std::size_t N>
bool in_polygon(const std::array<Point, N>& poly, double u, double v) {
  bool inside = false;
  for (std::size_t i = 0, j = N - 1; i < N; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.v > v) != (b.v > v) && u < (b.u - a.u) * (v - a.v) / (b.v - a.v) + a.u) inside = !inside;
  }
  return inside;
}

template <std::size_t N>
std::array<Point, N> regular_polygon(double start_deg) {
  std::array<Point, N> pts{};
  for (std::size_t k = 0; k < N; ++k) {
    const double a = (start_deg + 360.0 * static_cast<double>(k) / N) * std::numbers::pi / 180.0;
    pts[k] = {0.5 + 0.5 * std::cos(a), 0.5 + 0.5 * std::sin(a)};
  }
  return pts;
}

std::array<Point, 10> star_polygon() {
  std::array<Point, 10> pts{};
  for (std::size_t k = 0; k < 10; ++k) {
    const double r = (k % 2 == 0) ? 0.5 : 0.2;
    const double a = (-90.0 + 36.0 * static_cast<double>(k)) * std::numbers::pi / 180.0;
    pts[k] = {0.5 + r * std::cos(a), 0.5 + r * std::sin(a)};
  }
  return pts;
}

}  // namespace

bool shape_contains(Shape shape, double u, double v) noexcept {
  static const auto pentagon = regular_polygon<5>(-90.0);
  static const auto hexagon = regular_polygon<6>(0.0);
  static const auto star = star_polygon();
  switch (shape) {
    case Shape::square:
    case Shape::rectangle:
      return true;
    case Shape::circle: {
      const double du = u - 0.5, dv = v - 0.5;
      return du * du + dv * dv <= 0.25;
    }
    case Shape::triangle:
    case Shape::cone:
      return std::abs(u - 0.5) <= v / 2.0;
    case Shape::frustum:
      return std::abs(u - 0.5) <= 0.25 + v / 4.0;
    case Shape::pentagon:
      return in_polygon(pentagon, u, v);
    case Shape::hexagon:
      return in_polygon(hexagon, u, v);
    case Shape::star:
      return in_polygon(star, u, v);
  }
  return false;
}

void fill_shape(RasterImage& image, Shape shape, const BBox& box, Rgb color) {
  for (int py = std::max(0, box.y); py < std::min(image.height(), box.y + box.h); ++py) {
    const double v = (py - box.y + 0.5) / box.h;
    for (int px = std::max(0, box.x); px < std::min(image.width(), box.x + box.w); ++px) {
      const double u = (px - box.x + 0.5) / box.w;
      if (shape_contains(shape, u, v)) image.set(px, py, color);
    }
  }
}

RasterImage render_scene(const ScenePlan& scene, const TierSpec& tier) {
  RasterImage image(tier.canvas_w, tier.canvas_h, kWhite);
  for (const auto& p : scene.placements) fill_shape(image, p.shape, p.box, rgb(p.color));
  return image;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const RasterImage& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto& bytes = image.bytes();
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  for (int y = 0; y < image.height(); ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RasterImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  RasterImage image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("not an 8-bit RGB png: " + path.string());
  }
  image = RasterImage(static_cast<int>(width), static_cast<int>(height));
  auto& bytes = image.bytes();
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  for (png_uint_32 y = 0; y < height; ++y) png_read_row(png, bytes.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace modfollow
