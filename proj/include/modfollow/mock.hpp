#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfollow/rng.hpp"
#include "modfollow/trace.hpp"

namespace modfollow {

/// Parameters of the stochastic mock model. Defaults are the vision-preferring preset.
struct MockParams {
  double a_v = 0.12;   // nats per visual tier
  double a_t = 0.6;    // nats per textual tier
  double h0_v = 0.15;
  double h0_t = 0.15;
  double noise_sd = 0.15;
  double balance = -0.6;
  double steepness = 3.0;
  double p_other = 0.02;
  int layers = 32;
  int commit_spread = 3;
  double osc_mean_ambiguous = 1.4;
  double osc_mean_clear = 0.7;
  double osc_mean_irrelevant = 0.35;
  double region_radius = 0.5;
  std::uint64_t seed = 0;
  std::string model_id = "mock";

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; a "preset" key selects the base preset first.
  static MockParams from_json(const nlohmann::json& j);
  /// vision_preferring (b = -0.6), neutral (b = 0), text_preferring (b = 0.3).
  static MockParams preset(std::string_view name);
};

/// Top probability p of a k-way distribution (p, (1-p)/(k-1), ...) whose entropy is h.
/// Requires 0 <= h <= ln k.
double solve_top_probability(double h, int k);

/// Distribution over `answer` plus as many alternatives as needed so that its
/// entropy equals h (clamped to ln(1 + alternatives.size())) within 1e-9.
AnswerDistribution answer_distribution(double h, Color answer, const std::vector<Color>& alternatives);

/// Clipped entropy draw h0 + a * tier + Normal(0, noise_sd), at least 0.001.
double draw_entropy(double h0, double slope, int tier, double noise_sd, Engine& rng);

/// vision_only uses d_v, text_only uses d_t. Requires an instance with a text answer.
TraceRecord simulate_unimodal(const ConflictInstance& instance, RunCondition condition,
                              const MockParams& params, Engine& rng);

/// Probability of following the text at this relative uncertainty.
double text_follow_probability(double dh_rel, const MockParams& params);

TraceRecord simulate_multimodal(const ConflictInstance& instance, const TraceRecord& vision_run,
                                const TraceRecord& text_run, const MockParams& params,
                                Engine& rng);

/// Three records per instance carrying a text answer, sorted by instance_id then
/// condition. Output does not depend on `threads`.
std::vector<TraceRecord> emit_traces(const Manifest& manifest, const MockParams& params,
                                     unsigned threads = 1);

}  // namespace modfollow
