#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfollow/curve.hpp"
#include "modfollow/layers.hpp"
#include "modfollow/metrics.hpp"

namespace modfollow {

struct AnalysisConfig {
  double bin_width = 0.25;
  std::size_t min_count = 20;
  double radius = 0.5;
  std::size_t bootstrap_n = 1000;
  std::uint64_t analysis_seed = 0;
  EntropyFallback entropy_fallback = EntropyFallback::truncated;
  TokenMatch token_match = TokenMatch::prefix;
  std::size_t min_cases = 200;
  unsigned threads = 1;

  /// Throws ConfigError.
  void validate() const;
  static AnalysisConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct StageCounts {
  std::size_t records = 0;
  std::size_t bundles = 0;
  std::size_t orphans = 0;
  std::size_t duplicates = 0;
  std::size_t conflict_cases = 0;
  std::size_t not_conflicting = 0;
  std::size_t bicorrect = 0;
  std::size_t entropy_excluded = 0;
  std::size_t degenerate = 0;
  std::size_t curve_points = 0;
};

struct SplitEstimate {
  EntropySplit split;
  std::optional<CurveEstimate> low;
  std::optional<CurveEstimate> high;
  std::string low_error;
  std::string high_error;
};

struct AnalysisReport {
  StageCounts counts;
  std::vector<CaseMetrics> cases;
  std::optional<FollowingRatios> ratios_all;
  std::optional<FollowingRatios> ratios_bicorrect;
  CurveEstimate curve;
  std::optional<SplitEstimate> split;
  nlohmann::json summary() const;
};

/// join -> metrics -> bicorrect -> curve fit (-> entropy split). Only conflict-variant
/// instances with a conflict description enter the curve. Throws AnalysisError
/// naming the failing stage.
AnalysisReport run_analysis(const Manifest& manifest, const std::vector<TraceRecord>& records,
                            const AnalysisConfig& config, bool split_entropy);

/// Writes cases.csv, curve.csv, balance.json, summary.json and, when present, curve_split.csv.
void write_analysis(const AnalysisReport& report, const AnalysisConfig& config,
                    const std::filesystem::path& out_dir);

struct LayersReport {
  std::vector<Trajectory> trajectories;
  std::vector<OscillationCell> summary;
  Heatmap heatmap;
  std::vector<Dropped> skipped;
};

/// Trajectories for every bicorrect bundle with probes; region labels use the
/// supplied balance point. Throws AnalysisError when no record carries probes or
/// layer counts disagree.
LayersReport run_layers(const Manifest& manifest, const std::vector<TraceRecord>& records,
                        double balance, const AnalysisConfig& config);

/// Writes oscillations.csv, oscillation_summary.csv and heatmap.csv.
void write_layers(const LayersReport& report, const std::filesystem::path& out_dir);

/// Balance point stored in a balance.json document; nullopt when it is null.
std::optional<double> read_balance(const std::filesystem::path& path);

}  // namespace modfollow
