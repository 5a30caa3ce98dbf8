#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>

namespace modfollow {

enum class Color : std::uint8_t { red, yellow, blue, green, purple, orange };

inline constexpr std::array<Color, 6> kAllColors = {Color::red,   Color::yellow, Color::blue,
                                                    Color::green, Color::purple, Color::orange};

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 255;
  friend constexpr auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

std::string_view to_string(Color c) noexcept;
std::optional<Color> color_from_string(std::string_view name) noexcept;
Rgb rgb(Color c) noexcept;

enum class Shape : std::uint8_t {
  circle,
  triangle,
  square,
  rectangle,
  pentagon,
  hexagon,
  star,
  cone,
  frustum,
};

enum class ShapeRole : std::uint8_t { target_eligible, control_only };

inline constexpr std::array<Shape, 6> kTargetShapes = {Shape::circle,    Shape::triangle,
                                                       Shape::square,    Shape::rectangle,
                                                       Shape::pentagon,  Shape::hexagon};
inline constexpr std::array<Shape, 3> kControlShapes = {Shape::star, Shape::cone, Shape::frustum};

std::string_view to_string(Shape s) noexcept;
std::optional<Shape> shape_from_string(std::string_view name) noexcept;
ShapeRole role(Shape s) noexcept;

}  // namespace modfollow
