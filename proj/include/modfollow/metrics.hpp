#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modfollow/trace.hpp"

namespace modfollow {

enum class OutcomeClass : std::uint8_t { vision_following, text_following, other };

std::string_view to_string(OutcomeClass o) noexcept;

struct EntropyValue {
  double nats = 0.0;
  /// True when computed from the top-k entries only (a lower bound).
  bool truncated = false;
};

/// Runner-supplied full-vocabulary entropy when present, else -sum p ln p over entries.
EntropyValue entropy(const AnswerDistribution& dist);

struct RelativeUncertaintyValue {
  double value = 0.0;
  bool degenerate = false;
};

/// 2 (h_text - h_vision) / (h_text + h_vision). Throws ContractViolation on negative input.
RelativeUncertaintyValue relative_uncertainty(double h_text, double h_vision);

/// Lowercase first word with surrounding whitespace and punctuation removed.
/// nullopt when nothing is left (unanswerable).
std::optional<std::string> normalize_answer(std::string_view text);

struct OutcomeResult {
  std::optional<OutcomeClass> outcome;
  /// Set when the case is excluded (not a conflict, unanswerable run).
  std::string excluded_reason;
};

OutcomeResult classify_outcome(const CaseBundle& bundle);

enum class EntropyFallback : std::uint8_t { truncated, exclude };

struct CaseMetrics {
  std::string instance_id;
  int d_v = 0;
  TextTier d_t = TextTier::none;
  Variant variant = Variant::conflict;
  double h_text = 0.0;
  double h_vision = 0.0;
  double dh_rel = 0.0;
  bool degenerate = false;
  std::optional<OutcomeClass> outcome;
  std::string excluded_reason;
  bool bicorrect = false;
  bool entropy_truncated = false;

  double total_entropy() const noexcept { return h_text + h_vision; }
};

CaseMetrics compute_case_metrics(const CaseBundle& bundle);

struct Dropped {
  std::string instance_id;
  std::string reason;
};

struct BicorrectResult {
  std::vector<const CaseBundle*> kept;
  std::vector<Dropped> dropped;
};

/// True when both unimodal runs reproduce the instance's expected answers.
/// The expected answers come from the manifest record carried by each bundle.
BicorrectResult bicorrect_filter(const std::vector<CaseBundle>& bundles);

struct FollowingRatios {
  double tfr = 0.0;
  double vfr = 0.0;
  std::size_t n_text = 0;
  std::size_t n_vision = 0;
  std::size_t n_followed = 0;
  std::size_t n_other = 0;
};

/// nullopt is the "no followed cases" signal (zero denominator).
std::optional<FollowingRatios> following_ratios(const std::vector<OutcomeClass>& outcomes);

/// cases.csv: instance_id,d_v,d_t,variant,H_text,H_vision,dH_rel,outcome,bicorrect,flags
std::string cases_csv(const std::vector<CaseMetrics>& cases);

}  // namespace modfollow
