#include <map>

#include "modfollow/dataset.hpp"
#include "modfollow/error.hpp"

namespace modfollow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ImageCheck {
  bool readable = false;
  bool text_color_absent = false;
  bool tier_conformant = false;
  std::vector<std::string> problems;
};

std::vector<std::string> check_scene(const SceneRecord& record, const GroupPlan& plan, const TierSpec& tier,
                                     const RasterImage& image) {
  std::vector<std::string> problems;
  const ScenePlan& scene = record.scene;
  if (image.width() != tier.canvas_w || image.height() != tier.canvas_h)
    problems.push_back("canvas size does not match tier");
  if (scene.target_index >= scene.placements.size()) {
    problems.push_back("target index out of range");
    return problems;
  }
  const Placement& target = scene.target();
  if (target.shape != plan.target_shape || target.color != plan.image_color)
    problems.push_back("target placement does not match group plan");
  int image_colored = 0;
  for (const auto& p : scene.placements) {
    if (!p.box.inside(tier.canvas_w, tier.canvas_h)) problems.push_back("placement outside canvas");
    if (p.color == plan.text_color) problems.push_back("placement uses the text color");
    image_colored += (p.color == plan.image_color && p.shape == plan.target_shape);
  }
  if (image_colored != 1) problems.push_back("expected exactly one target-colored target shape");
  const int n_distractors = static_cast<int>(scene.placements.size()) - 1;
  if (n_distractors != tier.n_distractors)
    problems.push_back("distractor count " + std::to_string(n_distractors) + " != " +
                       std::to_string(tier.n_distractors));
  // Distractors before the target must not touch it; those after must.
  int occluding = 0;
  for (std::size_t i = 0; i < scene.placements.size(); ++i) {
    if (i == scene.target_index) continue;
    const bool overlaps = scene.placements[i].box.intersects(target.box);
    if (i < scene.target_index && overlaps) problems.push_back("distractor under the target overlaps it");
    if (i > scene.target_index) {
      if (!overlaps) problems.push_back("distractor drawn after the target does not overlap it");
      occluding += overlaps;
    }
  }
  if (occluding != tier.occluding_count())
    problems.push_back("occluding count " + std::to_string(occluding) + " != " +
                       std::to_string(tier.occluding_count()));
  const auto [lo, hi] = tier.target_side_range();
  if (target.box.w < lo || target.box.w > hi) problems.push_back("target size outside tier range");
  if (image.count(rgb(plan.image_color)) == 0) problems.push_back("target color not visible");
  return problems;
}

bool prompt_ok(const ConflictInstance& inst, const GroupPlan& plan, std::vector<std::string>& problems) {
  const std::size_t before = problems.size();
  const Shape asked = inst.variant == Variant::image_irrelevant ? plan.control_shape : plan.target_shape;
  ComposedText parts{inst.conflict_text, inst.question_text, inst.command_text};
  if (inst.prompt_text != parts.prompt()) problems.push_back("prompt is not description + question + command");
  if (inst.question_text != "What color is the " + std::string(to_string(asked)) + "?")
    problems.push_back("question does not ask about the expected shape");
  if (inst.command_text != "Please use one word to answer this question.")
    problems.push_back("unexpected command");
  const std::string color(to_string(plan.text_color));
  if (inst.d_t == TextTier::none) {
    if (!inst.conflict_text.empty()) problems.push_back("original tier carries a conflict description");
    if (inst.expected_text_answer) problems.push_back("original tier carries a text answer");
  } else {
    if (inst.conflict_text.empty()) problems.push_back("missing conflict description");
    if (inst.expected_text_answer != plan.text_color) problems.push_back("text answer differs from group plan");
    const bool names_color = inst.conflict_text.find(" " + color + ".") != std::string::npos;
    if (inst.d_t == TextTier::indirect) {
      if (names_any_color(inst.conflict_text)) problems.push_back("implicit description names a color");
    } else if (!names_color) {
      problems.push_back("explicit description does not name the text color");
    }
  }
  if (inst.expected_vision_answer != plan.image_color) problems.push_back("vision answer differs from group plan");
  return problems.size() == before;
}

}  // namespace

json ValidationReport::to_json() const {
  json failures = json::array();
  for (const auto& c : instances) {
    if (c.passed()) continue;
    failures.push_back({{"instance_id", c.instance_id},
                        {"text_color_absent", c.text_color_absent},
                        {"tier_conformant", c.tier_conformant},
                        {"prompt_structure", c.prompt_structure},
                        {"problems", c.problems}});
  }
  return {{"passed", passed()},
          {"n_instances", instances.size()},
          {"n_passed", n_passed},
          {"missing", missing},
          {"failures", failures}};
}

ValidationReport verify_manifest(const Manifest& manifest, const fs::path& image_dir) {
  ValidationReport report;
  std::map<int, const GroupPlan*> plans;
  for (const auto& g : manifest.groups) plans[g.group_id] = &g;
  std::map<std::string, const SceneRecord*> scenes;
  for (const auto& s : manifest.images) scenes[s.image_path] = &s;

  std::map<std::string, ImageCheck> cache;
  auto image_check = [&](const std::string& rel, const GroupPlan& plan) -> const ImageCheck& {
    auto it = cache.find(rel);
    if (it != cache.end()) return it->second;
    ImageCheck check;
    const fs::path file = image_dir / rel;
    auto scene = scenes.find(rel);
    if (!fs::exists(file)) {
      report.missing.push_back(rel);
      check.problems.push_back("image file missing");
    } else if (scene == scenes.end()) {
      check.problems.push_back("no scene record for image");
    } else {
      try {
        const RasterImage image = read_png(file);
        check.readable = true;
        check.text_color_absent = image.count(rgb(plan.text_color)) == 0;
        if (!check.text_color_absent) check.problems.push_back("text color present in image");
        const TierSpec& tier = tier_spec(scene->second->scene.d_v);
        auto problems = check_scene(*scene->second, plan, tier, image);
        check.tier_conformant = problems.empty();
        check.problems.insert(check.problems.end(), problems.begin(), problems.end());
      } catch (const std::exception& e) {
        report.missing.push_back(rel);
        check.problems.push_back(std::string("unreadable image: ") + e.what());
      }
    }
    return cache.emplace(rel, std::move(check)).first->second;
  };

  for (const auto& inst : manifest.instances) {
    InstanceCheck c;
    c.instance_id = inst.instance_id;
    auto plan = plans.find(inst.group_id);
    if (plan == plans.end()) {
      c.problems.push_back("no group plan for group " + std::to_string(inst.group_id));
    } else {
      const ImageCheck& img = image_check(inst.image_path, *plan->second);
      c.text_color_absent = img.text_color_absent;
      c.tier_conformant = img.tier_conformant;
      c.problems = img.problems;
      auto sc = scenes.find(inst.image_path);
      if (sc != scenes.end() && sc->second->scene.d_v != inst.d_v) {
        c.tier_conformant = false;
        c.problems.push_back("instance tier differs from image tier");
      }
      c.prompt_structure = prompt_ok(inst, *plan->second, c.problems);
    }
    report.n_passed += c.passed();
    report.instances.push_back(std::move(c));
  }
  return report;
}

}  // namespace modfollow
