#include "modfollow/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "modfollow/error.hpp"
#include "modfollow/io.hpp"
#include "modfollow/parallel.hpp"
#include "modfollow/rng.hpp"

namespace modfollow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::conflict:
      return "conflict";
    case Variant::text_irrelevant:
      return "text_irrelevant";
    case Variant::image_irrelevant:
      return "image_irrelevant";
  }
  return "conflict";
}

std::optional<Variant> variant_from_string(std::string_view name) noexcept {
  for (Variant v : {Variant::conflict, Variant::text_irrelevant, Variant::image_irrelevant})
    if (to_string(v) == name) return v;
  return std::nullopt;
}

std::string to_string(TextTier t) {
  return t == TextTier::none ? "none" : std::to_string(static_cast<int>(t));
}

// ---------------------------------------------------------------- fact table

FactTable default_fact_table() {
  return {
      {Color::red, {"a ripe strawberry", "a fire truck"}},
      {Color::yellow, {"a ripe banana", "a school bus in the US"}},
      {Color::blue, {"a morpho butterfly's wings", "a mailbox in the US"}},
      {Color::green, {"a fresh lime", "a four-leaf clover"}},
      {Color::purple, {"an eggplant's skin", "a bunch of concord grapes"}},
      {Color::orange, {"a ripe pumpkin", "a raw carrot"}},
  };
}

namespace {

std::vector<std::string> lowercase_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

bool names_any_color(std::string_view text) {
  for (const auto& w : lowercase_words(text))
    if (color_from_string(w)) return true;
  return false;
}

void check_fact_table(const FactTable& table) {
  for (const auto& [color, referents] : table)
    for (const auto& r : referents)
      if (names_any_color(r))
        throw ConfigError("fact table referent for " + std::string(to_string(color)) +
                          " names a color: \"" + r + "\"");
}

FactTable fact_table_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("fact table must be a JSON object");
  FactTable table;
  for (const auto& [key, value] : j.items()) {
    const auto color = color_from_string(key);
    if (!color) throw ConfigError("fact table: unknown color '" + key + "'");
    if (!value.is_array()) throw ConfigError("fact table: referents for " + key + " must be a list");
    auto& list = table[*color];
    for (const auto& r : value) {
      if (!r.is_string()) throw ConfigError("fact table: referent for " + key + " must be a string");
      list.push_back(r.get<std::string>());
    }
  }
  check_fact_table(table);
  return table;
}

json fact_table_to_json(const FactTable& table) {
  json j = json::object();
  for (const auto& [color, referents] : table) j[std::string(to_string(color))] = referents;
  return j;
}

// ---------------------------------------------------------------- config

void DatasetConfig::validate() const {
  if (n_groups < 1) throw ConfigError("n_groups must be positive");
  if (colors.size() < 3) throw ConfigError("at least 3 colors are required");
  if (std::set<Color>(colors.begin(), colors.end()).size() != colors.size())
    throw ConfigError("colors must be distinct");
  if (target_shapes.size() < 2) throw ConfigError("at least 2 target-eligible shapes are required");
  for (Shape s : target_shapes)
    if (role(s) != ShapeRole::target_eligible)
      throw ConfigError("shape is not target-eligible: " + std::string(to_string(s)));
  if (std::set<Shape>(target_shapes.begin(), target_shapes.end()).size() != target_shapes.size())
    throw ConfigError("target shapes must be distinct");
  if (control_shapes.empty()) throw ConfigError("at least one control-only shape is required");
  for (Shape s : control_shapes)
    if (role(s) != ShapeRole::control_only)
      throw ConfigError("shape is not control-only: " + std::string(to_string(s)));
  if (tiers.empty()) throw ConfigError("no visual tiers requested");
  for (int t : tiers)
    if (t < 0 || t >= kTierCount) throw ConfigError("visual tier out of range: " + std::to_string(t));
  if (text_tiers.empty()) throw ConfigError("no text tiers requested");
  if (variants.empty()) throw ConfigError("no variants requested");
  check_fact_table(fact_table);
  if (std::find(text_tiers.begin(), text_tiers.end(), TextTier::indirect) != text_tiers.end()) {
    for (Color c : colors) {
      auto it = fact_table.find(c);
      if (it == fact_table.end() || it->second.empty())
        throw ConfigError("fact table has no referent for " + std::string(to_string(c)));
    }
  }
}

json DatasetConfig::to_json() const {
  json j;
  j["n_groups"] = n_groups;
  j["tiers"] = tiers;
  json tt = json::array();
  for (TextTier t : text_tiers) {
    if (t == TextTier::none)
      tt.push_back(nullptr);
    else
      tt.push_back(static_cast<int>(t));
  }
  j["text_tiers"] = tt;
  json vs = json::array();
  for (Variant v : variants) vs.push_back(std::string(to_string(v)));
  j["variants"] = vs;
  json cs = json::array();
  for (Color c : colors) cs.push_back(std::string(to_string(c)));
  j["colors"] = cs;
  json ts = json::array();
  for (Shape s : target_shapes) ts.push_back(std::string(to_string(s)));
  j["target_shapes"] = ts;
  json ks = json::array();
  for (Shape s : control_shapes) ks.push_back(std::string(to_string(s)));
  j["control_shapes"] = ks;
  j["fact_table"] = fact_table_to_json(fact_table);
  return j;
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_names(const json& j, const char* key, Parse parse) {
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be a list");
  std::vector<T> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw ConfigError(std::string(key) + " entries must be strings");
    const auto value = parse(item.get<std::string>());
    if (!value) throw ConfigError(std::string(key) + ": unknown name '" + item.get<std::string>() + "'");
    out.push_back(*value);
  }
  return out;
}

TextTier text_tier_from_json(const json& j) {
  if (j.is_null() || (j.is_string() && (j == "none" || j == "x"))) return TextTier::none;
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v >= 0 && v <= 2) return static_cast<TextTier>(v);
  }
  if (j.is_string() && (j == "0" || j == "1" || j == "2"))
    return static_cast<TextTier>(j.get<std::string>()[0] - '0');
  throw ConfigError("text tier must be null/\"none\" or 0, 1, 2; got " + j.dump());
}

}  // namespace

DatasetConfig DatasetConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset config must be a JSON object");
  DatasetConfig c;
  try {
    if (j.contains("n_groups")) c.n_groups = j.at("n_groups").get<int>();
    if (j.contains("tiers")) c.tiers = j.at("tiers").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset config: ") + e.what());
  }
  if (j.contains("text_tiers")) {
    if (!j["text_tiers"].is_array()) throw ConfigError("text_tiers must be a list");
    c.text_tiers.clear();
    for (const auto& t : j["text_tiers"]) c.text_tiers.push_back(text_tier_from_json(t));
  }
  if (j.contains("variants"))
    c.variants = parse_names<Variant>(j["variants"], "variants", variant_from_string);
  if (j.contains("colors")) c.colors = parse_names<Color>(j["colors"], "colors", color_from_string);
  if (j.contains("target_shapes"))
    c.target_shapes = parse_names<Shape>(j["target_shapes"], "target_shapes", shape_from_string);
  if (j.contains("control_shapes"))
    c.control_shapes = parse_names<Shape>(j["control_shapes"], "control_shapes", shape_from_string);
  if (j.contains("fact_table")) c.fact_table = fact_table_from_json(j["fact_table"]);
  c.validate();
  return c;
}

std::string DatasetConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

// ---------------------------------------------------------------- names

std::string image_filename(int group_id, int d_v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%04d_v%02d.png", group_id, d_v);
  return buf;
}

std::string make_instance_id(int group_id, int d_v, TextTier d_t, Variant variant) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "g%04d_v%02d_t", group_id, d_v);
  std::string id = buf;
  id += d_t == TextTier::none ? "x" : std::to_string(static_cast<int>(d_t));
  if (variant == Variant::text_irrelevant) id += "_ti";
  if (variant == Variant::image_irrelevant) id += "_ii";
  return id;
}

const ConflictInstance* Manifest::find(std::string_view instance_id) const {
  for (const auto& inst : instances)
    if (inst.instance_id == instance_id) return &inst;
  return nullptr;
}

// ---------------------------------------------------------------- planning

namespace {

template <typename T>
T pick(const std::vector<T>& items, Engine& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

template <typename T>
std::vector<T> without(const std::vector<T>& items, std::initializer_list<T> drop) {
  std::vector<T> out;
  for (const T& x : items)
    if (std::find(drop.begin(), drop.end(), x) == drop.end()) out.push_back(x);
  return out;
}

}  // namespace

GroupPlan plan_group(std::uint64_t master_seed, int group_id, const DatasetConfig& config) {
  config.validate();
  if (group_id < 0 || group_id >= config.n_groups)
    throw ContractViolation("group_id out of range: " + std::to_string(group_id));

  GroupPlan plan;
  plan.group_id = group_id;

  // Image colors are assigned by blocks of |colors| consecutive groups, each
  // block a seeded permutation, so answer counts stay within one of each other.
  const auto n_colors = static_cast<int>(config.colors.size());
  std::vector<Color> block = config.colors;
  Engine block_rng(derive_seed(master_seed, StreamKind::color_block,
                               static_cast<std::uint64_t>(group_id / n_colors)));
  std::shuffle(block.begin(), block.end(), block_rng);
  plan.image_color = block[static_cast<std::size_t>(group_id % n_colors)];

  Engine rng(derive_seed(master_seed, StreamKind::group, static_cast<std::uint64_t>(group_id)));
  plan.text_color = pick(without(config.colors, {plan.image_color}), rng);
  plan.distractor_palette = without(config.colors, {plan.image_color, plan.text_color});

  plan.target_shape = pick(config.target_shapes, rng);
  const auto others = without(config.target_shapes, {plan.target_shape});
  plan.intermediate_shape = pick(others, rng);
  auto irrelevant_pool = without(others, {plan.intermediate_shape});
  plan.irrelevant_shape = irrelevant_pool.empty() ? plan.intermediate_shape : pick(irrelevant_pool, rng);
  // Shapes named by the text must stay out of the image; with very small shape
  // sets this cannot hold and distractors fall back to every non-target shape.
  plan.distractor_shapes = without(others, {plan.intermediate_shape, plan.irrelevant_shape});
  if (plan.distractor_shapes.empty()) plan.distractor_shapes = others;
  plan.control_shape = pick(config.control_shapes, rng);
  plan.referent_pick = static_cast<std::uint32_t>(rng() >> 32);
  plan.rng_stream = derive_seed(master_seed, StreamKind::scene, static_cast<std::uint64_t>(group_id));
  return plan;
}

int ScenePlan::occluding_count() const noexcept {
  if (target_index >= placements.size()) return 0;
  const BBox& t = placements[target_index].box;
  int n = 0;
  for (std::size_t i = target_index + 1; i < placements.size(); ++i) n += placements[i].box.intersects(t);
  return n;
}

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr int kRestartAfterFailures = 60;

BBox sized_box(Shape shape, int side) {
  if (shape == Shape::rectangle) return {0, 0, side, std::max(1, static_cast<int>(std::lround(0.6 * side)))};
  return {0, 0, side, side};
}

// Central square of the target that occluders must leave visible.
BBox visible_core(const BBox& t) {
  const int side = std::max(2, static_cast<int>(std::lround(0.2 * std::min(t.w, t.h))));
  return {t.x + (t.w - side) / 2, t.y + (t.h - side) / 2, side, side};
}

class ScenePlanner {
 public:
  ScenePlanner(const GroupPlan& plan, const TierSpec& tier)
      : plan_(plan), tier_(tier), rng_(derive_seed(plan.rng_stream, StreamKind::scene,
                                                   static_cast<std::uint64_t>(tier.d_v))) {}

  ScenePlan run() {
    for (;;) {
      if (auto scene = attempt()) return *std::move(scene);
    }
  }

 private:
  void spend() {
    if (++attempts_ > kMaxPlacementAttempts)
      throw GenerationError("placement failed for group " + std::to_string(plan_.group_id) +
                            " tier " + std::to_string(tier_.d_v) + " after " +
                            std::to_string(kMaxPlacementAttempts) + " attempts");
  }

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform_real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  int target_side() {
    const auto [lo, hi] = tier_.target_side_range();
    if (tier_.target_size.kind == SizeRule::Kind::absolute_px) return uniform_int(lo, hi);
    const double area = static_cast<double>(tier_.canvas_w) * tier_.canvas_h;
    const double f = uniform_real(tier_.target_size.lo, tier_.target_size.hi);
    return std::clamp(static_cast<int>(std::lround(std::sqrt(f * area))), lo, hi);
  }

  int distractor_side(int target) {
    if (tier_.target_size.kind == SizeRule::Kind::absolute_px) {
      const auto [lo, hi] = tier_.target_side_range();
      return uniform_int(lo, hi);
    }
    return std::max(6, static_cast<int>(std::lround(uniform_real(0.3, 0.7) * target)));
  }

  Placement random_distractor(int target) {
    Placement p;
    p.shape = pick(plan_.distractor_shapes, rng_);
    p.color = pick(plan_.distractor_palette, rng_);
    p.box = sized_box(p.shape, distractor_side(target));
    return p;
  }

  std::optional<ScenePlan> attempt() {
    const int W = tier_.canvas_w, H = tier_.canvas_h;
    spend();
    Placement target;
    target.shape = plan_.target_shape;
    target.color = plan_.image_color;
    const int side = target_side();
    target.box = sized_box(target.shape, side);
    target.box.x = uniform_int(0, W - target.box.w);
    target.box.y = uniform_int(0, H - target.box.h);
    const BBox core = visible_core(target.box);

    const int n_occ = tier_.occluding_count();
    const int n_free = tier_.n_distractors - n_occ;

    std::vector<Placement> free_placements;
    for (int i = 0; i < n_free; ++i) {
      int failures = 0;
      for (;;) {
        spend();
        Placement p = random_distractor(side);
        p.box.x = uniform_int(0, W - p.box.w);
        p.box.y = uniform_int(0, H - p.box.h);
        bool ok = !p.box.intersects(target.box);
        if (ok && tier_.zero_occlusion())
          for (const auto& q : free_placements) ok = ok && !p.box.intersects(q.box);
        if (ok) {
          free_placements.push_back(p);
          break;
        }
        if (++failures > kRestartAfterFailures) return std::nullopt;
      }
    }

    std::vector<Placement> occluders;
    for (int i = 0; i < n_occ; ++i) {
      int failures = 0;
      for (;;) {
        spend();
        Placement p = random_distractor(side);
        const int x_lo = std::max(0, target.box.x - p.box.w + 1);
        const int x_hi = std::min(W - p.box.w, target.box.x + target.box.w - 1);
        const int y_lo = std::max(0, target.box.y - p.box.h + 1);
        const int y_hi = std::min(H - p.box.h, target.box.y + target.box.h - 1);
        bool ok = x_lo <= x_hi && y_lo <= y_hi;
        if (ok) {
          p.box.x = uniform_int(x_lo, x_hi);
          p.box.y = uniform_int(y_lo, y_hi);
          ok = p.box.intersects(target.box) && !p.box.intersects(core);
        }
        if (ok) {
          occluders.push_back(p);
          break;
        }
        if (++failures > kRestartAfterFailures) return std::nullopt;
      }
    }

    ScenePlan scene;
    scene.group_id = plan_.group_id;
    scene.d_v = tier_.d_v;
    scene.placements = std::move(free_placements);
    scene.target_index = scene.placements.size();
    scene.placements.push_back(target);
    scene.placements.insert(scene.placements.end(), occluders.begin(), occluders.end());
    return scene;
  }

  const GroupPlan& plan_;
  const TierSpec& tier_;
  Engine rng_;
  int attempts_ = 0;
};

}  // namespace

ScenePlan plan_scene(const GroupPlan& plan, const TierSpec& tier) {
  if (tier.d_v < 0 || tier.d_v >= kTierCount)
    throw ContractViolation("visual tier out of range: " + std::to_string(tier.d_v));
  if (plan.distractor_palette.empty() && tier.n_distractors > 0)
    throw ContractViolation("group has no distractor colors");
  return ScenePlanner(plan, tier).run();
}

// ---------------------------------------------------------------- text

std::string ComposedText::prompt() const {
  std::string out;
  for (const std::string* part : {&conflict_description, &question, &command}) {
    if (part->empty()) continue;
    if (!out.empty()) out += ' ';
    out += *part;
  }
  return out;
}

namespace {

std::string with_article(std::string_view noun) {
  const bool vowel = !noun.empty() && std::string_view("aeiou").find(noun[0]) != std::string_view::npos;
  return (vowel ? "an " : "a ") + std::string(noun);
}

}  // namespace

ComposedText compose_text(const GroupPlan& plan, TextTier d_t, Variant variant, const FactTable& facts) {
  const std::string target(to_string(variant == Variant::image_irrelevant ? plan.control_shape
                                                                            : plan.target_shape));
  const std::string subject(variant == Variant::text_irrelevant ? to_string(plan.irrelevant_shape)
                                                                : std::string_view(target));
  const std::string color(to_string(plan.text_color));

  ComposedText text;
  text.question = "What color is the " + target + "?";
  text.command = "Please use one word to answer this question.";
  switch (d_t) {
    case TextTier::none:
      break;
    case TextTier::direct:
      text.conflict_description = "The " + subject + " is " + color + ".";
      break;
    case TextTier::indirect_simple: {
      const std::string mid(to_string(plan.intermediate_shape));
      text.conflict_description = "The " + subject + "'s color is the same as " + with_article(mid) +
                                  ". The " + mid + " is " + color + ".";
      break;
    }
    case TextTier::indirect: {
      auto it = facts.find(plan.text_color);
      if (it == facts.end() || it->second.empty())
        throw ConfigError("fact table has no referent for " + color);
      const auto& referent = it->second[plan.referent_pick % it->second.size()];
      text.conflict_description = "The " + subject + "'s color is the same as " + referent + ".";
      break;
    }
  }
  return text;
}

std::vector<ConflictInstance> make_instances(const GroupPlan& plan, int d_v, const DatasetConfig& config,
                                             const std::string& image_path) {
  std::vector<ConflictInstance> out;
  for (TextTier d_t : config.text_tiers) {
    for (Variant variant : config.variants) {
      if (d_t == TextTier::none && variant != Variant::conflict) continue;
      const ComposedText text = compose_text(plan, d_t, variant, config.fact_table);
      ConflictInstance inst;
      inst.instance_id = make_instance_id(plan.group_id, d_v, d_t, variant);
      inst.group_id = plan.group_id;
      inst.d_v = d_v;
      inst.d_t = d_t;
      inst.variant = variant;
      inst.image_path = image_path;
      inst.prompt_text = text.prompt();
      inst.conflict_text = text.conflict_description;
      inst.question_text = text.question;
      inst.command_text = text.command;
      inst.expected_vision_answer = plan.image_color;
      if (d_t != TextTier::none) inst.expected_text_answer = plan.text_color;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

// ---------------------------------------------------------------- generation

namespace {

struct GroupOutput {
  GroupPlan plan;
  std::vector<SceneRecord> scenes;
  std::vector<ConflictInstance> instances;
  std::vector<fs::path> written;
};

Manifest assemble(const DatasetConfig& config, std::uint64_t seed, std::vector<GroupOutput>& groups,
                  bool synthetic) {
  Manifest m;
  m.master_seed = seed;
  m.generator_config_hash = config.hash();
  m.synthetic = synthetic;
  m.config = config;
  for (auto& g : groups) {
    m.groups.push_back(std::move(g.plan));
    for (auto& s : g.scenes) m.images.push_back(std::move(s));
    for (auto& i : g.instances) m.instances.push_back(std::move(i));
  }
  return m;
}

}  // namespace

Manifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed, const fs::path& out_dir,
                          unsigned threads) {
  config.validate();
  const fs::path image_dir = out_dir / "images";
  fs::create_directories(image_dir);

  std::vector<GroupOutput> groups(static_cast<std::size_t>(config.n_groups));
  try {
    parallel_for(groups.size(), threads, [&](std::size_t g) {
      GroupOutput& out = groups[g];
      out.plan = plan_group(master_seed, static_cast<int>(g), config);
      for (int d_v : config.tiers) {
        const TierSpec& tier = tier_spec(d_v);
        ScenePlan scene = plan_scene(out.plan, tier);
        const std::string rel = "images/" + image_filename(out.plan.group_id, d_v);
        const fs::path file = out_dir / rel;
        write_png(file, render_scene(scene, tier));
        out.written.push_back(file);
        auto inst = make_instances(out.plan, d_v, config, rel);
        out.instances.insert(out.instances.end(), inst.begin(), inst.end());
        out.scenes.push_back({rel, std::move(scene)});
      }
    });
  } catch (...) {
    std::error_code ec;
    for (const auto& g : groups)
      for (const auto& f : g.written) fs::remove(f, ec);
    throw;
  }

  Manifest manifest = assemble(config, master_seed, groups, false);
  write_file_atomic(out_dir / "manifest.json", manifest_to_string(manifest));
  return manifest;
}

Manifest synthetic_manifest(const DatasetConfig& config, std::uint64_t master_seed) {
  config.validate();
  std::vector<GroupOutput> groups(static_cast<std::size_t>(config.n_groups));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GroupOutput& out = groups[g];
    out.plan = plan_group(master_seed, static_cast<int>(g), config);
    for (int d_v : config.tiers) {
      auto inst = make_instances(out.plan, d_v, config, "images/" + image_filename(out.plan.group_id, d_v));
      out.instances.insert(out.instances.end(), inst.begin(), inst.end());
    }
  }
  return assemble(config, master_seed, groups, true);
}

}  // namespace modfollow
