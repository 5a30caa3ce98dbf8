#include "modfollow/palette.hpp"

namespace modfollow {

namespace {

struct ColorEntry {
  Color color;
  std::string_view name;
  Rgb rgb;
};

constexpr std::array<ColorEntry, 6> kColorTable = {{
    {Color::red, "red", {220, 20, 20}},
    {Color::yellow, "yellow", {240, 200, 0}},
    {Color::blue, "blue", {20, 60, 220}},
    {Color::green, "green", {30, 160, 40}},
    {Color::purple, "purple", {130, 40, 160}},
    {Color::orange, "orange", {245, 130, 20}},
}};

struct ShapeEntry {
  Shape shape;
  std::string_view name;
  ShapeRole role;
};

constexpr std::array<ShapeEntry, 9> kShapeTable = {{
    {Shape::circle, "circle", ShapeRole::target_eligible},
    {Shape::triangle, "triangle", ShapeRole::target_eligible},
    {Shape::square, "square", ShapeRole::target_eligible},
    {Shape::rectangle, "rectangle", ShapeRole::target_eligible},
    {Shape::pentagon, "pentagon", ShapeRole::target_eligible},
    {Shape::hexagon, "hexagon", ShapeRole::target_eligible},
    {Shape::star, "star", ShapeRole::control_only},
    {Shape::cone, "cone", ShapeRole::control_only},
    {Shape::frustum, "frustum", ShapeRole::control_only},
}};

}  // namespace

std::string_view to_string(Color c) noexcept { return kColorTable[static_cast<std::size_t>(c)].name; }

Rgb rgb(Color c) noexcept { return kColorTable[static_cast<std::size_t>(c)].rgb; }

std::optional<Color> color_from_string(std::string_view name) noexcept {
  for (const auto& e : kColorTable)
    if (e.name == name) return e.color;
  return std::nullopt;
}

std::string_view to_string(Shape s) noexcept { return kShapeTable[static_cast<std::size_t>(s)].name; }

ShapeRole role(Shape s) noexcept { return kShapeTable[static_cast<std::size_t>(s)].role; }

std::optional<Shape> shape_from_string(std::string_view name) noexcept {
  for (const auto& e : kShapeTable)
    if (e.name == name) return e.shape;
  return std::nullopt;
}

}  // namespace modfollow
