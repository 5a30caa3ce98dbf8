#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfollow/palette.hpp"
#include "modfollow/raster.hpp"
#include "modfollow/tiers.hpp"

namespace modfollow {

enum class TextTier : std::int8_t { none = -1, direct = 0, indirect_simple = 1, indirect = 2 };

enum class Variant : std::uint8_t { conflict, text_irrelevant, image_irrelevant };

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> variant_from_string(std::string_view name) noexcept;
/// "none", "0", "1", "2".
std::string to_string(TextTier t);

/// Real-world referents per color for implicit (d_t = 2) statements.
using FactTable = std::map<Color, std::vector<std::string>>;

FactTable default_fact_table();
FactTable fact_table_from_json(const nlohmann::json& j);
nlohmann::json fact_table_to_json(const FactTable& table);
/// True when any whole word of `text` is a palette color name (case-insensitive).
bool names_any_color(std::string_view text);
/// Throws ConfigError when a referent names any palette color.
void check_fact_table(const FactTable& table);

struct DatasetConfig {
  int n_groups = 400;
  std::vector<int> tiers = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  std::vector<TextTier> text_tiers = {TextTier::none, TextTier::direct, TextTier::indirect_simple,
                                      TextTier::indirect};
  std::vector<Variant> variants = {Variant::conflict, Variant::text_irrelevant,
                                   Variant::image_irrelevant};
  std::vector<Color> colors{kAllColors.begin(), kAllColors.end()};
  std::vector<Shape> target_shapes{kTargetShapes.begin(), kTargetShapes.end()};
  std::vector<Shape> control_shapes{kControlShapes.begin(), kControlShapes.end()};
  FactTable fact_table = default_fact_table();

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults. Throws ConfigError on malformed values.
  static DatasetConfig from_json(const nlohmann::json& j);
  /// fnv1a64 of the canonical JSON form, hex encoded.
  std::string hash() const;
};

struct GroupPlan {
  int group_id = 0;
  Shape target_shape = Shape::circle;
  Color image_color = Color::red;
  Color text_color = Color::blue;
  std::vector<Color> distractor_palette;
  std::vector<Shape> distractor_shapes;
  /// Shape B of the explicit two-hop statement; never drawn.
  Shape intermediate_shape = Shape::square;
  /// Substitute for the target in the text-irrelevant control; never drawn.
  Shape irrelevant_shape = Shape::square;
  /// Control-only shape for the image-irrelevant control.
  Shape control_shape = Shape::star;
  std::uint32_t referent_pick = 0;
  std::uint64_t rng_stream = 0;

  friend bool operator==(const GroupPlan&, const GroupPlan&) = default;
};

struct Placement {
  Shape shape = Shape::circle;
  Color color = Color::red;
  BBox box;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Placements are stored in z-order: later entries are painted over earlier ones.
struct ScenePlan {
  int group_id = 0;
  int d_v = 0;
  std::vector<Placement> placements;
  std::size_t target_index = 0;

  const Placement& target() const { return placements.at(target_index); }
  /// Distractors painted after the target whose box intersects the target box.
  int occluding_count() const noexcept;
  friend bool operator==(const ScenePlan&, const ScenePlan&) = default;
};

struct ComposedText {
  std::string conflict_description;
  std::string question;
  std::string command;
  /// Non-empty parts joined by single spaces.
  std::string prompt() const;
};

struct ConflictInstance {
  std::string instance_id;
  int group_id = 0;
  int d_v = 0;
  TextTier d_t = TextTier::none;
  Variant variant = Variant::conflict;
  std::string image_path;
  std::string prompt_text;
  std::string conflict_text;
  std::string question_text;
  std::string command_text;
  Color expected_vision_answer = Color::red;
  std::optional<Color> expected_text_answer;

  friend bool operator==(const ConflictInstance&, const ConflictInstance&) = default;
};

struct SceneRecord {
  std::string image_path;
  ScenePlan scene;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct Manifest {
  int schema_version = 1;
  std::uint64_t master_seed = 0;
  std::string task_type = "color_recognition";
  std::string generator_config_hash;
  bool synthetic = false;
  DatasetConfig config;
  std::vector<GroupPlan> groups;
  std::vector<SceneRecord> images;
  std::vector<ConflictInstance> instances;

  const ConflictInstance* find(std::string_view instance_id) const;
};

std::string image_filename(int group_id, int d_v);
std::string make_instance_id(int group_id, int d_v, TextTier d_t, Variant variant);

/// Pure function of (master_seed, group_id, config). Throws ConfigError.
GroupPlan plan_group(std::uint64_t master_seed, int group_id, const DatasetConfig& config);

/// Throws GenerationError when placement exceeds the per-scene retry budget.
ScenePlan plan_scene(const GroupPlan& plan, const TierSpec& tier);

/// Throws ConfigError when d_t = 2 and the fact table lacks the text color.
ComposedText compose_text(const GroupPlan& plan, TextTier d_t, Variant variant,
                          const FactTable& facts);

/// Instances for one image in config order (text tiers outer, variants inner).
/// Control variants are only emitted for tiers that carry a conflict description.
std::vector<ConflictInstance> make_instances(const GroupPlan& plan, int d_v,
                                             const DatasetConfig& config,
                                             const std::string& image_path);

/// Plans, renders and writes every image, then writes `manifest.json` atomically.
/// Output bytes do not depend on `threads`. On failure no manifest is written and
/// images produced by this call are removed.
Manifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed,
                          const std::filesystem::path& out_dir, unsigned threads = 1);

/// Same plans and instances as generate_dataset, no images. Marked synthetic.
Manifest synthetic_manifest(const DatasetConfig& config, std::uint64_t master_seed);

nlohmann::json manifest_to_json(const Manifest& manifest);
std::string manifest_to_string(const Manifest& manifest);
/// Throws ConfigError on schema violations.
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);

struct InstanceCheck {
  std::string instance_id;
  bool text_color_absent = false;
  bool tier_conformant = false;
  bool prompt_structure = false;
  std::vector<std::string> problems;
  bool passed() const noexcept { return text_color_absent && tier_conformant && prompt_structure; }
};

struct ValidationReport {
  std::vector<InstanceCheck> instances;
  std::vector<std::string> missing;
  std::size_t n_passed = 0;
  bool passed() const noexcept { return missing.empty() && n_passed == instances.size(); }
  nlohmann::json to_json() const;
};

/// Image paths are resolved against `image_dir`. Missing or unreadable files are
/// reported, never thrown.
ValidationReport verify_manifest(const Manifest& manifest, const std::filesystem::path& image_dir);

}  // namespace modfollow
