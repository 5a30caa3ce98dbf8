#pragma once

#include <span>
#include <utility>

namespace modfollow {

/// Target size rule of a tier. Absolute rules bound the bounding-box side in
/// pixels; area-fraction rules bound the bounding-box area as a share of the canvas.
struct SizeRule {
  enum class Kind { absolute_px, area_fraction };
  Kind kind = Kind::absolute_px;
  double lo = 0.0;
  double hi = 0.0;
};

struct TierSpec {
  int d_v = 0;
  int canvas_w = 0;
  int canvas_h = 0;
  SizeRule target_size;
  int n_distractors = 0;
  int occlusion_pct = 0;

  /// Distractors that must overlap the target: floor(rate * n), in integer arithmetic.
  int occluding_count() const noexcept { return n_distractors * occlusion_pct / 100; }
  bool zero_occlusion() const noexcept { return occlusion_pct == 0; }
  /// Inclusive bounds on the target bounding-box side in pixels.
  std::pair<int, int> target_side_range() const noexcept;
};

inline constexpr int kTierCount = 14;

std::span<const TierSpec> tier_table() noexcept;
/// Throws ContractViolation when d_v is outside 0..13.
const TierSpec& tier_spec(int d_v);

}  // namespace modfollow
