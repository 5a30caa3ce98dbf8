#include "modfollow/trace.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <unordered_map>

#include "modfollow/error.hpp"

namespace modfollow {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kConditionNames = {
    "vision_only", "text_only", "multimodal", "multimodal_text_irrelevant",
    "multimodal_image_irrelevant"};

constexpr double kNormalizationTolerance = 1e-6;

}  // namespace

std::string_view to_string(RunCondition c) noexcept { return kConditionNames[static_cast<std::size_t>(c)]; }

std::optional<RunCondition> condition_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kConditionNames.size(); ++i)
    if (kConditionNames[i] == name) return static_cast<RunCondition>(i);
  return std::nullopt;
}

bool is_multimodal(RunCondition c) noexcept {
  return c == RunCondition::multimodal || c == RunCondition::multimodal_text_irrelevant ||
         c == RunCondition::multimodal_image_irrelevant;
}

RunCondition multimodal_condition(Variant v) noexcept {
  switch (v) {
    case Variant::text_irrelevant:
      return RunCondition::multimodal_text_irrelevant;
    case Variant::image_irrelevant:
      return RunCondition::multimodal_image_irrelevant;
    case Variant::conflict:
      break;
  }
  return RunCondition::multimodal;
}

// ---------------------------------------------------------------- serialization

json to_json(const TraceRecord& r) {
  json entries = json::array();
  for (const auto& e : r.distribution.entries)
    entries.push_back({{"token_text", e.token_text}, {"probability", e.probability}});
  json dist = {{"entries", entries}, {"tail_mass", r.distribution.tail_mass}};
  if (r.distribution.full_entropy_nats) dist["full_entropy_nats"] = *r.distribution.full_entropy_nats;
  json j = {
      {"trace_schema", kTraceSchema},
      {"instance_id", r.instance_id},
      {"condition", to_string(r.condition)},
      {"model_id", r.model_id},
      {"answer_text", r.answer_text},
      {"distribution", dist},
  };
  if (r.layer_probes) {
    json probes = json::array();
    for (const auto& p : *r.layer_probes)
      probes.push_back({{"layer_index", p.layer_index},
                        {"top1_token", p.top1_token},
                        {"logit_text_answer", p.logit_text_answer},
                        {"logit_vision_answer", p.logit_vision_answer}});
    j["layer_probes"] = probes;
  }
  return j;
}

std::string to_canonical_line(const TraceRecord& record) { return to_json(record).dump(); }

void write_traces(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_canonical_line(r) << '\n';
}

// ---------------------------------------------------------------- validation

std::vector<Violation> validate_record(const TraceRecord& r) {
  std::vector<Violation> v;
  if (r.instance_id.empty()) v.push_back({"instance_id", "empty instance_id"});
  if (r.model_id.empty()) v.push_back({"model_id", "empty model_id"});
  if (r.answer_text.empty()) v.push_back({"answer_text", "empty answer_text"});

  const auto& d = r.distribution;
  double sum = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const std::string path = "distribution.entries[" + std::to_string(i) + "]";
    const double p = d.entries[i].probability;
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      v.push_back({path + ".probability", "probability out of range"});
      finite = finite && std::isfinite(p);
    }
    if (i > 0 && p > d.entries[i - 1].probability)
      v.push_back({path + ".probability", "entries not sorted by descending probability"});
    sum += p;
  }
  if (!std::isfinite(d.tail_mass) || d.tail_mass < 0.0 || d.tail_mass > 1.0) {
    v.push_back({"distribution.tail_mass", "tail_mass out of range"});
    finite = finite && std::isfinite(d.tail_mass);
  }
  sum += d.tail_mass;
  if (finite && std::abs(sum - 1.0) > kNormalizationTolerance)
    v.push_back({"distribution", "probabilities and tail_mass do not sum to 1"});
  if (d.full_entropy_nats && (!std::isfinite(*d.full_entropy_nats) || *d.full_entropy_nats < 0.0))
    v.push_back({"distribution.full_entropy_nats", "entropy must be finite and non-negative"});

  if (r.layer_probes) {
    if (!is_multimodal(r.condition))
      v.push_back({"layer_probes", "layer probes on a unimodal condition"});
    const auto& probes = *r.layer_probes;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const std::string path = "layer_probes[" + std::to_string(i) + "]";
      if (probes[i].layer_index < 0) v.push_back({path + ".layer_index", "negative layer index"});
      if (i > 0 && probes[i].layer_index <= probes[i - 1].layer_index)
        v.push_back({path + ".layer_index", "layer indices not strictly increasing"});
      if (!std::isfinite(probes[i].logit_text_answer) || !std::isfinite(probes[i].logit_vision_answer))
        v.push_back({path, "non-finite logit"});
    }
  }
  return v;
}

// ---------------------------------------------------------------- parsing

namespace {

const std::set<std::string, std::less<>> kRecordKeys = {"trace_schema", "instance_id", "condition", "model_id",
                                                        "answer_text",  "distribution", "layer_probes"};
const std::set<std::string, std::less<>> kDistributionKeys = {"entries", "tail_mass", "full_entropy_nats"};
const std::set<std::string, std::less<>> kEntryKeys = {"token_text", "probability"};
const std::set<std::string, std::less<>> kProbeKeys = {"layer_index", "top1_token", "logit_text_answer",
                                                       "logit_vision_answer"};

// Collects schema issues for one line instead of throwing.
class LineParser {
 public:
  LineParser(std::size_t line, std::vector<TraceIssue>& errors, std::vector<TraceIssue>& warnings)
      : line_(line), errors_(errors), warnings_(warnings) {}

  bool ok() const noexcept { return ok_; }

  void error(const std::string& path, const std::string& message) {
    errors_.push_back({line_, path, message});
    ok_ = false;
  }

  void unknown_keys(const json& obj, const std::set<std::string, std::less<>>& known, const std::string& prefix) {
    for (const auto& [key, _] : obj.items())
      if (!known.contains(key))
        warnings_.push_back({line_, prefix.empty() ? key : prefix + "." + key, "unknown key ignored"});
  }

  const json* field(const json& obj, const char* key, const std::string& path, bool required = true) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) error(path, "missing field");
      return nullptr;
    }
    return &*it;
  }

  std::string string(const json& obj, const char* key, const std::string& path) {
    const json* f = field(obj, key, path);
    if (!f) return {};
    if (!f->is_string()) {
      error(path, "expected string");
      return {};
    }
    return f->get<std::string>();
  }

  double number(const json& obj, const char* key, const std::string& path) {
    const json* f = field(obj, key, path);
    if (!f) return 0.0;
    if (!f->is_number()) {
      error(path, "expected number");
      return 0.0;
    }
    return f->get<double>();
  }

  int integer(const json& obj, const char* key, const std::string& path) {
    const json* f = field(obj, key, path);
    if (!f) return 0;
    if (!f->is_number_integer()) {
      error(path, "expected integer");
      return 0;
    }
    const auto v = f->get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      error(path, "integer out of range");
      return 0;
    }
    return static_cast<int>(v);
  }

 private:
  std::size_t line_;
  std::vector<TraceIssue>& errors_;
  std::vector<TraceIssue>& warnings_;
  bool ok_ = true;
};

}  // namespace

std::optional<TraceRecord> TraceReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    if (auto record = parse_line(text)) return record;
  }
  return std::nullopt;
}

std::optional<TraceRecord> TraceReader::parse_line(const std::string& text) {
  LineParser p(line_, errors_, warnings_);
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    p.error("", std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
  if (!j.is_object()) {
    p.error("", "record is not a JSON object");
    return std::nullopt;
  }
  p.unknown_keys(j, kRecordKeys, "");

  if (const json* schema = p.field(j, "trace_schema", "trace_schema")) {
    if (!schema->is_number_integer() || schema->get<std::int64_t>() != kTraceSchema)
      p.error("trace_schema", "unsupported trace_schema (expected 1)");
  }

  TraceRecord r;
  r.instance_id = p.string(j, "instance_id", "instance_id");
  const std::string cond = p.string(j, "condition", "condition");
  if (p.ok()) {
    if (auto c = condition_from_string(cond))
      r.condition = *c;
    else
      p.error("condition", "unknown condition '" + cond + "'");
  }
  r.model_id = p.string(j, "model_id", "model_id");
  r.answer_text = p.string(j, "answer_text", "answer_text");

  if (const json* dist = p.field(j, "distribution", "distribution")) {
    if (!dist->is_object()) {
      p.error("distribution", "expected object");
    } else {
      p.unknown_keys(*dist, kDistributionKeys, "distribution");
      if (const json* entries = p.field(*dist, "entries", "distribution.entries")) {
        if (!entries->is_array()) {
          p.error("distribution.entries", "expected array");
        } else {
          for (std::size_t i = 0; i < entries->size(); ++i) {
            const std::string path = "distribution.entries[" + std::to_string(i) + "]";
            const json& e = (*entries)[i];
            if (!e.is_object()) {
              p.error(path, "expected object");
              continue;
            }
            p.unknown_keys(e, kEntryKeys, path);
            TokenProb tp;
            tp.token_text = p.string(e, "token_text", path + ".token_text");
            tp.probability = p.number(e, "probability", path + ".probability");
            r.distribution.entries.push_back(std::move(tp));
          }
        }
      }
      r.distribution.tail_mass = p.number(*dist, "tail_mass", "distribution.tail_mass");
      if (const json* h = p.field(*dist, "full_entropy_nats", "distribution.full_entropy_nats", false)) {
        if (h->is_null()) {
        } else if (!h->is_number()) {
          p.error("distribution.full_entropy_nats", "expected number");
        } else {
          r.distribution.full_entropy_nats = h->get<double>();
        }
      }
    }
  }

  if (const json* probes = p.field(j, "layer_probes", "layer_probes", false); probes && !probes->is_null()) {
    if (!probes->is_array()) {
      p.error("layer_probes", "expected array");
    } else {
      std::vector<LayerProbe> list;
      for (std::size_t i = 0; i < probes->size(); ++i) {
        const std::string path = "layer_probes[" + std::to_string(i) + "]";
        const json& e = (*probes)[i];
        if (!e.is_object()) {
          p.error(path, "expected object");
          continue;
        }
        p.unknown_keys(e, kProbeKeys, path);
        LayerProbe lp;
        lp.layer_index = p.integer(e, "layer_index", path + ".layer_index");
        lp.top1_token = p.string(e, "top1_token", path + ".top1_token");
        lp.logit_text_answer = p.number(e, "logit_text_answer", path + ".logit_text_answer");
        lp.logit_vision_answer = p.number(e, "logit_vision_answer", path + ".logit_vision_answer");
        list.push_back(std::move(lp));
      }
      r.layer_probes = std::move(list);
    }
  }

  if (!p.ok()) return std::nullopt;
  for (auto& v : validate_record(r)) p.error(v.field_path, v.message);
  if (!p.ok()) return std::nullopt;
  return r;
}

ParsedTraces parse_trace_stream(std::istream& in) {
  TraceReader reader(in);
  ParsedTraces out;
  while (auto r = reader.next()) out.records.push_back(*std::move(r));
  out.errors = reader.errors();
  out.warnings = reader.warnings();
  return out;
}

ParsedTraces load_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalysisError("parse", "cannot open trace file: " + path.string());
  return parse_trace_stream(in);
}

// ---------------------------------------------------------------- join

JoinResult join_cases(const std::vector<TraceRecord>& records, const Manifest& manifest) {
  constexpr std::size_t kConditions = kConditionNames.size();
  struct Slot {
    std::array<const TraceRecord*, kConditions> latest{};
    std::array<std::size_t, kConditions> count{};
    bool any = false;
  };

  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(manifest.instances.size());
  for (std::size_t i = 0; i < manifest.instances.size(); ++i) index.emplace(manifest.instances[i].instance_id, i);

  JoinResult out;
  std::vector<Slot> slots(manifest.instances.size());
  std::set<std::string> unknown;
  for (const auto& r : records) {
    auto it = index.find(r.instance_id);
    if (it == index.end()) {
      unknown.insert(r.instance_id);
      continue;
    }
    Slot& s = slots[it->second];
    const auto c = static_cast<std::size_t>(r.condition);
    s.latest[c] = &r;
    ++s.count[c];
    s.any = true;
  }
  out.unknown_instances.assign(unknown.begin(), unknown.end());

  for (std::size_t i = 0; i < manifest.instances.size(); ++i) {
    const Slot& s = slots[i];
    if (!s.any) continue;
    const ConflictInstance& inst = manifest.instances[i];
    bool duplicate = false;
    for (std::size_t c = 0; c < kConditions; ++c) {
      if (s.count[c] > 1) {
        out.duplicates.push_back({inst.instance_id, static_cast<RunCondition>(c), s.count[c]});
        duplicate = true;
      }
    }
    auto get = [&](RunCondition c) { return s.latest[static_cast<std::size_t>(c)]; };
    RunCondition mm_cond = multimodal_condition(inst.variant);
    if (!get(mm_cond) && get(RunCondition::multimodal)) mm_cond = RunCondition::multimodal;

    Orphan orphan{inst.instance_id, {}};
    for (RunCondition c : {RunCondition::vision_only, RunCondition::text_only, mm_cond})
      if (!get(c)) orphan.missing.push_back(c);
    if (!orphan.missing.empty()) {
      out.orphans.push_back(std::move(orphan));
      continue;
    }
    const TraceRecord& v = *get(RunCondition::vision_only);
    const TraceRecord& t = *get(RunCondition::text_only);
    const TraceRecord& m = *get(mm_cond);
    if (v.model_id != t.model_id || v.model_id != m.model_id) {
      out.model_mismatches.push_back(inst.instance_id);
      continue;
    }
    CaseBundle b{inst, v, t, m, {}, duplicate};
    for (std::size_t c = 0; c < kConditions; ++c) {
      const auto cond = static_cast<RunCondition>(c);
      if (is_multimodal(cond) && cond != mm_cond && s.latest[c]) b.control_runs.push_back(*s.latest[c]);
    }
    out.bundles.push_back(std::move(b));
  }
  return out;
}

}  // namespace modfollow
