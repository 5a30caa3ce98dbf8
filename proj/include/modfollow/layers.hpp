#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "modfollow/curve.hpp"
#include "modfollow/trace.hpp"

namespace modfollow {

enum class LayerLabel : std::uint8_t { V, T, O };

char to_char(LayerLabel l) noexcept;

enum class TokenMatch : std::uint8_t { prefix, exact };

/// Normalized token against normalized candidate. Prefix mode accepts either word
/// being a prefix of the other when the shorter is at least 3 characters.
bool token_matches(std::string_view token, std::string_view candidate, TokenMatch mode);

std::vector<LayerLabel> label_layers(std::span<const LayerProbe> probes,
                                     std::string_view text_answer,
                                     std::string_view vision_answer,
                                     TokenMatch mode = TokenMatch::prefix);

/// Switches between V and T ignoring O labels.
int count_oscillations(std::span<const LayerLabel> labels);

/// Index of the first position after which the label sequence is constant.
std::size_t commit_index(std::span<const LayerLabel> labels);

struct Trajectory {
  std::string instance_id;
  Variant variant = Variant::conflict;
  double dh_rel = 0.0;
  std::vector<int> layers;
  Eigen::VectorXd diffs;
  std::vector<LayerLabel> labels;
  int oscillations = 0;
  RegionLabel region = RegionLabel::ambiguous;
  int commit_layer = 0;
};

struct TrajectoryResult {
  std::optional<Trajectory> trajectory;
  std::string skip_reason;
};

/// Candidates are the bundle's own normalized unimodal answers.
TrajectoryResult make_trajectory(const CaseBundle& bundle, double dh_rel, double balance,
                                 double radius, TokenMatch mode = TokenMatch::prefix);

struct OscillationCell {
  std::string region;  // ambiguous | clear | all
  Variant variant = Variant::conflict;
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> stderr_mean;
};

/// One cell per (region in {ambiguous, clear, all}) x variant present in the
/// input, in a fixed order. Empty cells carry n = 0 and no mean.
std::vector<OscillationCell> oscillation_summary(const std::vector<Trajectory>& trajectories);

struct Heatmap {
  std::vector<double> edges;
  std::vector<int> layers;
  /// rows = dH_rel bins, cols = layers; NaN marks an empty row.
  Eigen::MatrixXd mean;
  std::vector<std::size_t> counts;
};

/// Rows follow `edges` (values outside are clamped to the end bins). Throws
/// AnalysisError("heatmap") naming instances whose layer count differs from the
/// first trajectory's.
Heatmap heatmap(const std::vector<Trajectory>& trajectories, const std::vector<double>& edges);

/// Uniform edges from lo to hi.
std::vector<double> uniform_edges(double lo, double hi, double width);

std::string oscillations_csv(const std::vector<Trajectory>& trajectories);
std::string oscillation_summary_csv(const std::vector<OscillationCell>& cells);
std::string heatmap_csv(const Heatmap& map);
std::string trajectory_csv(const Trajectory& trajectory);

}  // namespace modfollow
