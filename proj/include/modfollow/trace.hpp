#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfollow/dataset.hpp"

namespace modfollow {

inline constexpr int kTraceSchema = 1;

enum class RunCondition : std::uint8_t {
  vision_only,
  text_only,
  multimodal,
  multimodal_text_irrelevant,
  multimodal_image_irrelevant,
};

std::string_view to_string(RunCondition c) noexcept;
std::optional<RunCondition> condition_from_string(std::string_view name) noexcept;
bool is_multimodal(RunCondition c) noexcept;
/// The multimodal condition a manifest instance of this variant is run under.
RunCondition multimodal_condition(Variant v) noexcept;

struct TokenProb {
  std::string token_text;
  double probability = 0.0;
  friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

struct AnswerDistribution {
  std::vector<TokenProb> entries;
  double tail_mass = 0.0;
  std::optional<double> full_entropy_nats;
  friend bool operator==(const AnswerDistribution&, const AnswerDistribution&) = default;
};

struct LayerProbe {
  int layer_index = 0;
  std::string top1_token;
  double logit_text_answer = 0.0;
  double logit_vision_answer = 0.0;
  friend bool operator==(const LayerProbe&, const LayerProbe&) = default;
};

struct TraceRecord {
  std::string instance_id;
  RunCondition condition = RunCondition::vision_only;
  std::string model_id;
  std::string answer_text;
  AnswerDistribution distribution;
  std::optional<std::vector<LayerProbe>> layer_probes;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Canonical form: sorted keys, `trace_schema` included.
nlohmann::json to_json(const TraceRecord& record);
std::string to_canonical_line(const TraceRecord& record);
void write_traces(std::ostream& out, const std::vector<TraceRecord>& records);

struct Violation {
  std::string field_path;
  std::string message;
};

/// Checks every record invariant. An empty result means the record is valid.
std::vector<Violation> validate_record(const TraceRecord& record);

struct TraceIssue {
  std::size_t line = 0;
  std::string field_path;
  std::string message;
};

/// Single-pass reader over newline-delimited JSON. Blank lines are skipped;
/// malformed or invalid lines are recorded in errors() and skipped.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}

  std::optional<TraceRecord> next();

  const std::vector<TraceIssue>& errors() const noexcept { return errors_; }
  const std::vector<TraceIssue>& warnings() const noexcept { return warnings_; }
  std::size_t lines_read() const noexcept { return line_; }

 private:
  std::optional<TraceRecord> parse_line(const std::string& text);

  std::istream& in_;
  std::size_t line_ = 0;
  std::vector<TraceIssue> errors_;
  std::vector<TraceIssue> warnings_;
};

struct ParsedTraces {
  std::vector<TraceRecord> records;
  std::vector<TraceIssue> errors;
  std::vector<TraceIssue> warnings;
};

ParsedTraces parse_trace_stream(std::istream& in);
ParsedTraces load_traces(const std::filesystem::path& path);

struct CaseBundle {
  ConflictInstance instance;
  TraceRecord vision_run;
  TraceRecord text_run;
  TraceRecord multimodal_run;
  std::vector<TraceRecord> control_runs;
  bool duplicate = false;
};

struct Orphan {
  std::string instance_id;
  std::vector<RunCondition> missing;
};

struct DuplicateRecord {
  std::string instance_id;
  RunCondition condition = RunCondition::vision_only;
  std::size_t count = 0;
};

struct JoinResult {
  std::vector<CaseBundle> bundles;
  std::vector<Orphan> orphans;
  std::vector<DuplicateRecord> duplicates;
  /// Records whose instance_id is not in the manifest.
  std::vector<std::string> unknown_instances;
  /// Instances whose joined records disagree on model_id.
  std::vector<std::string> model_mismatches;
};

/// Bundles are emitted in manifest order. For duplicate (instance, condition)
/// pairs the latest record wins and the pair is reported.
JoinResult join_cases(const std::vector<TraceRecord>& records, const Manifest& manifest);

}  // namespace modfollow
