#pragma once

// Small builders shared by the unit tests.

#include <string>
#include <vector>

#include "modfollow/trace.hpp"

namespace testsupport {

inline modfollow::TraceRecord record(const std::string& id, modfollow::RunCondition cond, const std::string& answer,
                                     double p_top = 1.0, const std::string& model = "m") {
  modfollow::TraceRecord r;
  r.instance_id = id;
  r.condition = cond;
  r.model_id = model;
  r.answer_text = answer;
  r.distribution.entries.push_back({answer.empty() ? std::string("x") : answer, p_top});
  if (p_top < 1.0) r.distribution.entries.push_back({"other", 1.0 - p_top});
  return r;
}

inline modfollow::ConflictInstance instance(const std::string& id, modfollow::Color vision,
                                            std::optional<modfollow::Color> text,
                                            modfollow::Variant variant = modfollow::Variant::conflict) {
  modfollow::ConflictInstance i;
  i.instance_id = id;
  i.d_t = text ? modfollow::TextTier::direct : modfollow::TextTier::none;
  i.variant = variant;
  i.expected_vision_answer = vision;
  i.expected_text_answer = text;
  return i;
}

inline modfollow::CaseBundle bundle(const std::string& yv, const std::string& yt, const std::string& ym,
                                    modfollow::Color ev = modfollow::Color::yellow,
                                    std::optional<modfollow::Color> et = modfollow::Color::blue) {
  using modfollow::RunCondition;
  modfollow::CaseBundle b;
  b.instance = instance("g0000_v00_t0", ev, et);
  b.vision_run = record("g0000_v00_t0", RunCondition::vision_only, yv, 0.7);
  b.text_run = record("g0000_v00_t0", RunCondition::text_only, yt, 0.9);
  b.multimodal_run = record("g0000_v00_t0", RunCondition::multimodal, ym);
  return b;
}

}  // namespace testsupport
