#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfollow/metrics.hpp"

namespace modfollow {

/// One usable case on the following curve.
struct CurvePoint {
  double dh_rel = 0.0;
  bool text_following = false;
  double total_entropy = 0.0;
};

struct CurveBin {
  double center = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  double tfr = 0.0;
};

/// Keeps bicorrect, non-degenerate cases whose outcome is text- or vision-following.
std::vector<CurvePoint> curve_points(const std::vector<CaseMetrics>& cases);

/// Equal-width bins from the smallest observed dH_rel; bins with fewer than
/// min_count cases are dropped. Throws AnalysisError("bin_curve") when fewer
/// than two bins remain.
std::vector<CurveBin> bin_curve(const std::vector<CurvePoint>& points, double bin_width,
                                std::size_t min_count);

/// Spearman correlation of bin centres against bin TFRs.
double monotonicity_score(const std::vector<CurveBin>& bins);

/// Linear interpolation of the first 0.5 crossing between adjacent bins.
std::optional<double> interpolated_crossing(const std::vector<CurveBin>& bins);

struct FitOptions {
  double bin_width = 0.25;
  std::size_t min_count = 20;
  std::size_t min_cases = 200;
  std::size_t bootstrap_n = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CurveEstimate {
  std::vector<CurveBin> bins;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta1_stderr = 0.0;
  std::optional<double> balance_point;
  std::optional<std::pair<double, double>> balance_ci;
  std::optional<double> interpolated_balance;
  double monotonicity = 0.0;
  std::size_t n_cases = 0;
  std::size_t bootstrap_used = 0;
  /// separation, non_monotonic_fit, flat_fit, no_crossing, not_converged, bootstrap_unstable
  std::set<std::string> flags;

  double ci_half_width() const;
};

/// Logistic maximum-likelihood balance point with a case-resampling percentile
/// bootstrap CI. Throws AnalysisError when fewer than min_cases points are given
/// or binning fails.
CurveEstimate fit_balance(const std::vector<CurvePoint>& points, const FitOptions& options);

struct EntropySplit {
  std::vector<CurvePoint> low;
  std::vector<CurvePoint> high;
  double median_total = 0.0;
  /// All totals tied at the median; high is empty.
  bool degenerate = false;
};

/// Split at the lower median of H_text + H_vision; ties go to the low subset.
EntropySplit entropy_split(const std::vector<CurvePoint>& points);

enum class RegionLabel : std::uint8_t { ambiguous, clear_text, clear_vision };

std::string_view to_string(RegionLabel r) noexcept;

RegionLabel classify_region(double dh_rel, double balance, double radius = 0.5);

std::string curve_csv(const std::vector<CurveBin>& bins);
nlohmann::json balance_json(const CurveEstimate& estimate);

}  // namespace modfollow
