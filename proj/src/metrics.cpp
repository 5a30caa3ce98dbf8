#include "modfollow/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "modfollow/io.hpp"
#include "modfollow/stats.hpp"

namespace modfollow {

std::string_view to_string(OutcomeClass o) noexcept {
  switch (o) {
    case OutcomeClass::vision_following:
      return "vision_following";
    case OutcomeClass::text_following:
      return "text_following";
    case OutcomeClass::other:
      return "other";
  }
  return "other";
}

EntropyValue entropy(const AnswerDistribution& dist) {
  if (dist.full_entropy_nats) return {*dist.full_entropy_nats, false};
  Eigen::ArrayXd p(static_cast<Eigen::Index>(dist.entries.size()));
  for (std::size_t i = 0; i < dist.entries.size(); ++i) p(static_cast<Eigen::Index>(i)) = dist.entries[i].probability;
  return {stats::shannon_entropy(p), true};
}

RelativeUncertaintyValue relative_uncertainty(double h_text, double h_vision) {
  const auto r = stats::relative_uncertainty(h_text, h_vision);
  return {r.value, r.degenerate};
}

std::optional<std::string> normalize_answer(std::string_view text) {
  auto trim = [](std::string_view s) {
    auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
    while (!s.empty() && strip(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && strip(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view s = trim(text);
  const auto space = std::find_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  s = trim(s.substr(0, static_cast<std::size_t>(space - s.begin())));
  if (s.empty()) return std::nullopt;
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

OutcomeResult classify_outcome(const CaseBundle& bundle) {
  const auto ym = normalize_answer(bundle.multimodal_run.answer_text);
  const auto yv = normalize_answer(bundle.vision_run.answer_text);
  const auto yt = normalize_answer(bundle.text_run.answer_text);
  if (!yv || !yt) return {std::nullopt, "unanswerable unimodal run"};
  if (*yv == *yt) return {std::nullopt, "not a conflict: unimodal answers agree"};
  if (!ym) return {OutcomeClass::other, {}};
  if (*ym == *yv) return {OutcomeClass::vision_following, {}};
  if (*ym == *yt) return {OutcomeClass::text_following, {}};
  return {OutcomeClass::other, {}};
}

namespace {

bool answers(const TraceRecord& run, std::optional<Color> expected) {
  if (!expected) return false;
  const auto a = normalize_answer(run.answer_text);
  return a && *a == to_string(*expected);
}

}  // namespace

CaseMetrics compute_case_metrics(const CaseBundle& bundle) {
  CaseMetrics m;
  m.instance_id = bundle.instance.instance_id;
  m.d_v = bundle.instance.d_v;
  m.d_t = bundle.instance.d_t;
  m.variant = bundle.instance.variant;
  const EntropyValue ht = entropy(bundle.text_run.distribution);
  const EntropyValue hv = entropy(bundle.vision_run.distribution);
  m.h_text = ht.nats;
  m.h_vision = hv.nats;
  m.entropy_truncated = ht.truncated || hv.truncated;
  const auto rel = relative_uncertainty(m.h_text, m.h_vision);
  m.dh_rel = rel.value;
  m.degenerate = rel.degenerate;
  const OutcomeResult outcome = classify_outcome(bundle);
  m.outcome = outcome.outcome;
  m.excluded_reason = outcome.excluded_reason;
  m.bicorrect = answers(bundle.vision_run, bundle.instance.expected_vision_answer) &&
                answers(bundle.text_run, bundle.instance.expected_text_answer);
  return m;
}

BicorrectResult bicorrect_filter(const std::vector<CaseBundle>& bundles) {
  BicorrectResult out;
  for (const auto& b : bundles) {
    if (!b.instance.expected_text_answer) {
      out.dropped.push_back({b.instance.instance_id, "no expected text answer (original tier)"});
    } else if (!answers(b.vision_run, b.instance.expected_vision_answer)) {
      out.dropped.push_back({b.instance.instance_id, "vision-only answer incorrect"});
    } else if (!answers(b.text_run, b.instance.expected_text_answer)) {
      out.dropped.push_back({b.instance.instance_id, "text-only answer incorrect"});
    } else {
      out.kept.push_back(&b);
    }
  }
  return out;
}

std::optional<FollowingRatios> following_ratios(const std::vector<OutcomeClass>& outcomes) {
  FollowingRatios r;
  for (OutcomeClass o : outcomes) {
    switch (o) {
      case OutcomeClass::text_following:
        ++r.n_text;
        break;
      case OutcomeClass::vision_following:
        ++r.n_vision;
        break;
      case OutcomeClass::other:
        ++r.n_other;
        break;
    }
  }
  r.n_followed = r.n_text + r.n_vision;
  if (r.n_followed == 0) return std::nullopt;
  r.tfr = static_cast<double>(r.n_text) / static_cast<double>(r.n_followed);
  r.vfr = 1.0 - r.tfr;
  return r;
}

std::string cases_csv(const std::vector<CaseMetrics>& cases) {
  std::ostringstream out;
  out << "instance_id,d_v,d_t,variant,H_text,H_vision,dH_rel,outcome,bicorrect,flags\n";
  for (const auto& c : cases) {
    std::string flags;
    auto add = [&](std::string_view f) {
      if (!flags.empty()) flags += ';';
      flags += f;
    };
    if (c.degenerate) add("degenerate");
    if (c.entropy_truncated) add("entropy_truncated");
    if (!c.outcome) add("excluded");
    out << csv_escape(c.instance_id) << ',' << c.d_v << ',' << to_string(c.d_t) << ','
        << to_string(c.variant) << ',' << format_double(c.h_text) << ',' << format_double(c.h_vision) << ','
        << format_double(c.dh_rel) << ',' << (c.outcome ? to_string(*c.outcome) : "excluded") << ','
        << (c.bicorrect ? "true" : "false") << ',' << flags << '\n';
  }
  return out.str();
}

}  // namespace modfollow
