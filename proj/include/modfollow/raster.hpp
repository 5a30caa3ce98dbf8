#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "modfollow/palette.hpp"

namespace modfollow {

struct ScenePlan;
struct TierSpec;

/// Axis-aligned pixel box, half-open: covers [x, x+w) x [y, y+h).
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool intersects(const BBox& o) const noexcept {
    return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
  }
  bool inside(int width, int height) const noexcept {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// 8-bit RGB raster, row-major, no alpha.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgb fill = kWhite);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  Rgb at(int x, int y) const noexcept;
  void set(int x, int y, Rgb c) noexcept;

  std::size_t count(Rgb c) const noexcept;
  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }
  std::vector<std::uint8_t>& bytes() noexcept { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Shape membership in the unit square (u right, v down), evaluated at pixel centres.
bool shape_contains(Shape shape, double u, double v) noexcept;

/// Fills `box` with `shape` using hard edges: every covered pixel takes exactly `color`.
void fill_shape(RasterImage& image, Shape shape, const BBox& box, Rgb color);

/// White canvas of the tier size with placements painted in z-order.
RasterImage render_scene(const ScenePlan& scene, const TierSpec& tier);

void write_png(const std::filesystem::path& path, const RasterImage& image);
/// Throws std::runtime_error on unreadable or non-RGB8 files.
RasterImage read_png(const std::filesystem::path& path);

}  // namespace modfollow
