#include <filesystem>

#include "modfollow/dataset.hpp"
#include "modfollow/error.hpp"
#include "modfollow/io.hpp"

namespace modfollow {

using nlohmann::json;

namespace {

json names(const std::vector<Color>& colors) {
  json a = json::array();
  for (Color c : colors) a.push_back(std::string(to_string(c)));
  return a;
}

json names(const std::vector<Shape>& shapes) {
  json a = json::array();
  for (Shape s : shapes) a.push_back(std::string(to_string(s)));
  return a;
}

json group_to_json(const GroupPlan& g) {
  char stream[17];
  std::snprintf(stream, sizeof stream, "%016llx", static_cast<unsigned long long>(g.rng_stream));
  return {
      {"group_id", g.group_id},
      {"target_shape", to_string(g.target_shape)},
      {"image_color", to_string(g.image_color)},
      {"text_color", to_string(g.text_color)},
      {"distractor_palette", names(g.distractor_palette)},
      {"distractor_shapes", names(g.distractor_shapes)},
      {"intermediate_shape", to_string(g.intermediate_shape)},
      {"irrelevant_shape", to_string(g.irrelevant_shape)},
      {"control_shape", to_string(g.control_shape)},
      {"referent_pick", g.referent_pick},
      {"rng_stream", stream},
  };
}

json scene_to_json(const SceneRecord& r) {
  json placements = json::array();
  for (const auto& p : r.scene.placements)
    placements.push_back({{"shape", to_string(p.shape)},
                          {"color", to_string(p.color)},
                          {"bbox", {p.box.x, p.box.y, p.box.w, p.box.h}}});
  return {{"image_path", r.image_path},
          {"group_id", r.scene.group_id},
          {"d_v", r.scene.d_v},
          {"target_index", r.scene.target_index},
          {"placements", placements}};
}

json instance_to_json(const ConflictInstance& i) {
  json j = {
      {"instance_id", i.instance_id},
      {"group_id", i.group_id},
      {"d_v", i.d_v},
      {"d_t", i.d_t == TextTier::none ? json(nullptr) : json(static_cast<int>(i.d_t))},
      {"variant", to_string(i.variant)},
      {"image_path", i.image_path},
      {"prompt_text", i.prompt_text},
      {"conflict_text", i.conflict_text},
      {"question_text", i.question_text},
      {"command_text", i.command_text},
      {"expected_vision_answer", to_string(i.expected_vision_answer)},
      {"expected_text_answer",
       i.expected_text_answer ? json(std::string(to_string(*i.expected_text_answer))) : json(nullptr)},
  };
  return j;
}

// Field access that reports the JSON path on failure.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& at(const char* key) const {
    if (!j_.is_object() || !j_.contains(key)) fail(key, "missing");
    return j_.at(key);
  }
  template <typename T>
  T get(const char* key) const {
    try {
      return at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "wrong type");
    }
  }
  Color color(const char* key) const {
    const auto c = color_from_string(get<std::string>(key));
    if (!c) fail(key, "unknown color");
    return *c;
  }
  Shape shape(const char* key) const {
    const auto s = shape_from_string(get<std::string>(key));
    if (!s) fail(key, "unknown shape");
    return *s;
  }
  template <typename T, typename Parse>
  std::vector<T> list(const char* key, Parse parse) const {
    std::vector<T> out;
    for (const auto& item : at(key)) {
      if (!item.is_string()) fail(key, "expected strings");
      const auto v = parse(item.get<std::string>());
      if (!v) fail(key, "unknown name");
      out.push_back(*v);
    }
    return out;
  }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("manifest " + path_ + "." + key + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
};

GroupPlan group_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  GroupPlan g;
  g.group_id = r.get<int>("group_id");
  g.target_shape = r.shape("target_shape");
  g.image_color = r.color("image_color");
  g.text_color = r.color("text_color");
  g.distractor_palette = r.list<Color>("distractor_palette", color_from_string);
  g.distractor_shapes = r.list<Shape>("distractor_shapes", shape_from_string);
  g.intermediate_shape = r.shape("intermediate_shape");
  g.irrelevant_shape = r.shape("irrelevant_shape");
  g.control_shape = r.shape("control_shape");
  g.referent_pick = r.get<std::uint32_t>("referent_pick");
  g.rng_stream = std::stoull(r.get<std::string>("rng_stream"), nullptr, 16);
  return g;
}

SceneRecord scene_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  SceneRecord s;
  s.image_path = r.get<std::string>("image_path");
  s.scene.group_id = r.get<int>("group_id");
  s.scene.d_v = r.get<int>("d_v");
  s.scene.target_index = r.get<std::size_t>("target_index");
  std::size_t k = 0;
  for (const auto& pj : r.at("placements")) {
    Reader pr(pj, path + ".placements[" + std::to_string(k++) + "]");
    Placement p;
    p.shape = pr.shape("shape");
    p.color = pr.color("color");
    const auto box = pr.get<std::vector<int>>("bbox");
    if (box.size() != 4) pr.fail("bbox", "expected [x, y, w, h]");
    p.box = {box[0], box[1], box[2], box[3]};
    s.scene.placements.push_back(p);
  }
  if (s.scene.target_index >= s.scene.placements.size()) r.fail("target_index", "out of range");
  return s;
}

ConflictInstance instance_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  ConflictInstance i;
  i.instance_id = r.get<std::string>("instance_id");
  i.group_id = r.get<int>("group_id");
  i.d_v = r.get<int>("d_v");
  const json& dt = r.at("d_t");
  if (dt.is_null()) {
    i.d_t = TextTier::none;
  } else if (dt.is_number_integer() && dt.get<int>() >= 0 && dt.get<int>() <= 2) {
    i.d_t = static_cast<TextTier>(dt.get<int>());
  } else {
    r.fail("d_t", "expected null or 0..2");
  }
  const auto v = variant_from_string(r.get<std::string>("variant"));
  if (!v) r.fail("variant", "unknown variant");
  i.variant = *v;
  i.image_path = r.get<std::string>("image_path");
  i.prompt_text = r.get<std::string>("prompt_text");
  i.conflict_text = r.get<std::string>("conflict_text");
  i.question_text = r.get<std::string>("question_text");
  i.command_text = r.get<std::string>("command_text");
  i.expected_vision_answer = r.color("expected_vision_answer");
  if (!r.at("expected_text_answer").is_null()) i.expected_text_answer = r.color("expected_text_answer");
  return i;
}

}  // namespace

json manifest_to_json(const Manifest& m) {
  json groups = json::array();
  for (const auto& g : m.groups) groups.push_back(group_to_json(g));
  json images = json::array();
  for (const auto& s : m.images) images.push_back(scene_to_json(s));
  json instances = json::array();
  for (const auto& i : m.instances) instances.push_back(instance_to_json(i));
  return {
      {"schema_version", m.schema_version},
      {"master_seed", m.master_seed},
      {"task_type", m.task_type},
      {"generator_config_hash", m.generator_config_hash},
      {"synthetic", m.synthetic},
      {"config", m.config.to_json()},
      {"groups", groups},
      {"images", images},
      {"instances", instances},
  };
}

std::string manifest_to_string(const Manifest& m) { return manifest_to_json(m).dump() + "\n"; }

Manifest manifest_from_json(const json& j) {
  Reader r(j, "$");
  Manifest m;
  m.schema_version = r.get<int>("schema_version");
  if (m.schema_version != 1) r.fail("schema_version", "unsupported version");
  m.master_seed = r.get<std::uint64_t>("master_seed");
  m.task_type = r.get<std::string>("task_type");
  m.generator_config_hash = r.get<std::string>("generator_config_hash");
  if (j.contains("synthetic")) m.synthetic = r.get<bool>("synthetic");
  m.config = DatasetConfig::from_json(r.at("config"));
  std::size_t k = 0;
  for (const auto& g : r.at("groups")) m.groups.push_back(group_from_json(g, "$.groups[" + std::to_string(k++) + "]"));
  k = 0;
  for (const auto& s : r.at("images")) m.images.push_back(scene_from_json(s, "$.images[" + std::to_string(k++) + "]"));
  k = 0;
  for (const auto& i : r.at("instances"))
    m.instances.push_back(instance_from_json(i, "$.instances[" + std::to_string(k++) + "]"));
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read manifest: ") + path.string());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("manifest is not valid JSON: " + path.string());
  return manifest_from_json(j);
}

}  // namespace modfollow
