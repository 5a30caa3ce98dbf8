#include "modfollow/tiers.hpp"

#include <array>
#include <cmath>
#include <string>

#include "modfollow/error.hpp"

namespace modfollow {

namespace {

using Kind = SizeRule::Kind;

constexpr SizeRule kLarge{Kind::absolute_px, 80.0, 200.0};
constexpr SizeRule kQuarter{Kind::area_fraction, 0.20, 0.40};
constexpr SizeRule kTenth{Kind::area_fraction, 0.05, 0.10};
constexpr SizeRule kSmall{Kind::area_fraction, 0.04, 0.06};

// d_v, canvas, target size, distractors, occlusion %
constexpr std::array<TierSpec, kTierCount> kTiers = {{
    {0, 800, 600, kLarge, 0, 0},
    {1, 800, 600, kLarge, 1, 0},
    {2, 800, 600, kLarge, 2, 0},
    {3, 800, 600, kLarge, 3, 0},
    {4, 800, 600, kLarge, 4, 0},
    {5, 224, 224, kQuarter, 7, 50},
    {6, 224, 224, kQuarter, 10, 80},
    {7, 224, 224, kTenth, 7, 50},
    {8, 224, 224, kTenth, 11, 80},
    {9, 224, 224, kSmall, 20, 30},
    {10, 224, 224, kSmall, 30, 60},
    {11, 224, 224, kSmall, 40, 50},
    {12, 224, 224, kSmall, 55, 60},
    {13, 224, 224, kSmall, 70, 70},
}};

}  // namespace

std::pair<int, int> TierSpec::target_side_range() const noexcept {
  if (target_size.kind == Kind::absolute_px)
    return {static_cast<int>(target_size.lo), static_cast<int>(target_size.hi)};
  const double area = static_cast<double>(canvas_w) * canvas_h;
  return {static_cast<int>(std::ceil(std::sqrt(target_size.lo * area))),
          static_cast<int>(std::floor(std::sqrt(target_size.hi * area)))};
}

std::span<const TierSpec> tier_table() noexcept { return kTiers; }

const TierSpec& tier_spec(int d_v) {
  if (d_v < 0 || d_v >= kTierCount)
    throw ContractViolation("visual tier out of range 0..13: " + std::to_string(d_v));
  return kTiers[static_cast<std::size_t>(d_v)];
}

}  // namespace modfollow
