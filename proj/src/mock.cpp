#include "modfollow/mock.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "modfollow/error.hpp"
#include "modfollow/layers.hpp"
#include "modfollow/metrics.hpp"
#include "modfollow/parallel.hpp"
#include "modfollow/stats.hpp"

namespace modfollow {

void MockParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("mock params: ") + what);
  };
  require(a_v >= 0.0 && a_t >= 0.0, "slopes a_v, a_t must be >= 0");
  require(h0_v >= 0.0 && h0_t >= 0.0, "base entropies must be >= 0");
  require(noise_sd >= 0.0, "noise_sd must be >= 0");
  require(std::isfinite(balance), "balance must be finite");
  require(steepness > 0.0, "steepness must be > 0");
  require(p_other >= 0.0 && p_other <= 0.2, "p_other must lie in [0, 0.2]");
  require(layers >= 8, "layers must be >= 8");
  require(commit_spread >= 0 && commit_spread < layers / 4, "commit_spread must lie in [0, layers/4)");
  require(osc_mean_ambiguous >= 0.0 && osc_mean_clear >= 0.0 && osc_mean_irrelevant >= 0.0,
          "oscillation means must be >= 0");
  require(region_radius > 0.0, "region_radius must be > 0");
  require(!model_id.empty(), "model_id must be non-empty");
}

nlohmann::json MockParams::to_json() const {
  return {{"a_v", a_v},
          {"a_t", a_t},
          {"h0_v", h0_v},
          {"h0_t", h0_t},
          {"noise_sd", noise_sd},
          {"balance", balance},
          {"steepness", steepness},
          {"p_other", p_other},
          {"layers", layers},
          {"commit_spread", commit_spread},
          {"osc_mean_ambiguous", osc_mean_ambiguous},
          {"osc_mean_clear", osc_mean_clear},
          {"osc_mean_irrelevant", osc_mean_irrelevant},
          {"region_radius", region_radius},
          {"seed", seed},
          {"model_id", model_id}};
}

MockParams MockParams::preset(std::string_view name) {
  MockParams p;
  if (name == "vision_preferring") return p;
  if (name == "neutral") {
    p.balance = 0.0;
    return p;
  }
  if (name == "text_preferring") {
    p.balance = 0.3;
    return p;
  }
  throw ConfigError("unknown mock preset: " + std::string(name));
}

MockParams MockParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("mock params: expected a JSON object");
  MockParams p;
  try {
    if (j.contains("preset")) p = preset(j.at("preset").get<std::string>());
    auto num = [&](const char* key, double& out) {
      if (j.contains(key)) out = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& out) {
      if (j.contains(key)) out = j.at(key).get<int>();
    };
    num("a_v", p.a_v);
    num("a_t", p.a_t);
    num("h0_v", p.h0_v);
    num("h0_t", p.h0_t);
    num("noise_sd", p.noise_sd);
    num("balance", p.balance);
    num("steepness", p.steepness);
    num("p_other", p.p_other);
    integer("layers", p.layers);
    integer("commit_spread", p.commit_spread);
    num("osc_mean_ambiguous", p.osc_mean_ambiguous);
    num("osc_mean_clear", p.osc_mean_clear);
    num("osc_mean_irrelevant", p.osc_mean_irrelevant);
    num("region_radius", p.region_radius);
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("model_id")) p.model_id = j.at("model_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mock params: ") + e.what());
  }
  p.validate();
  return p;
}

namespace {

double k_way_entropy(double p, int k) {
  const double q = (1.0 - p) / (k - 1);
  double h = p > 0.0 ? -p * std::log(p) : 0.0;
  if (q > 0.0) h -= (k - 1) * q * std::log(q);
  return h;
}

}  // namespace

double solve_top_probability(double h, int k) {
  if (k < 2 || !(h >= 0.0) || h > std::log(static_cast<double>(k)) + 1e-12)
    throw ContractViolation("solve_top_probability: need k >= 2 and 0 <= h <= ln k");
  // Entropy falls monotonically as p moves from 1/k to 1.
  double lo = 1.0 / k, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (k_way_entropy(mid, k) > h ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

AnswerDistribution answer_distribution(double h, Color answer, const std::vector<Color>& alternatives) {
  if (!(h >= 0.0)) throw ContractViolation("answer_distribution: entropy must be >= 0");
  AnswerDistribution d;
  const int k_max = 1 + static_cast<int>(alternatives.size());
  h = std::min(h, std::log(static_cast<double>(k_max)));
  if (h == 0.0 || k_max == 1) {
    d.entries.push_back({std::string(to_string(answer)), 1.0});
    d.full_entropy_nats = 0.0;
    return d;
  }
  int k = 2;
  while (h > std::log(static_cast<double>(k)) && k < k_max) ++k;
  const double p = solve_top_probability(h, k);
  const double q = (1.0 - p) / (k - 1);
  d.entries.push_back({std::string(to_string(answer)), p});
  for (int i = 0; i + 1 < k; ++i) d.entries.push_back({std::string(to_string(alternatives[i])), q});
  Eigen::ArrayXd probs(k);
  for (int i = 0; i < k; ++i) probs(i) = d.entries[static_cast<std::size_t>(i)].probability;
  d.full_entropy_nats = stats::shannon_entropy(probs);
  return d;
}

double draw_entropy(double h0, double slope, int tier, double noise_sd, Engine& rng) {
  double h = h0 + slope * tier;
  if (noise_sd > 0.0) h += std::normal_distribution<double>(0.0, noise_sd)(rng);
  return std::max(h, 0.001);
}

namespace {

const std::vector<Color> kPalette(kAllColors.begin(), kAllColors.end());

}  // namespace

TraceRecord simulate_unimodal(const ConflictInstance& instance, RunCondition condition, const MockParams& params,
                              Engine& rng) {
  if (!instance.expected_text_answer || instance.d_t == TextTier::none)
    throw ContractViolation("simulate_unimodal: instance " + instance.instance_id + " has no text answer");
  const bool vision = condition == RunCondition::vision_only;
  if (!vision && condition != RunCondition::text_only)
    throw ContractViolation("simulate_unimodal: condition must be vision_only or text_only");

  const Color correct = vision ? instance.expected_vision_answer : *instance.expected_text_answer;
  const Color other = vision ? *instance.expected_text_answer : instance.expected_vision_answer;
  const double h = vision ? draw_entropy(params.h0_v, params.a_v, instance.d_v, params.noise_sd, rng)
                          : draw_entropy(params.h0_t, params.a_t, static_cast<int>(instance.d_t),
                                         params.noise_sd, rng);

  // Alternatives: shuffled non-answers, the other modality's answer last so a
  // wrong answer never coincides with it.
  std::vector<Color> alternatives;
  for (Color c : kPalette)
    if (c != correct && c != other) alternatives.push_back(c);
  std::shuffle(alternatives.begin(), alternatives.end(), rng);
  alternatives.push_back(other);

  TraceRecord r;
  r.instance_id = instance.instance_id;
  r.condition = condition;
  r.model_id = params.model_id;
  r.distribution = answer_distribution(h, correct, alternatives);
  const double p_correct = std::max(0.5, 1.0 - h / std::log(6.0));
  const bool right = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p_correct;
  r.answer_text = std::string(to_string(right ? correct : alternatives.front()));
  return r;
}

double text_follow_probability(double dh_rel, const MockParams& params) {
  return stats::logistic(-params.steepness * (dh_rel - params.balance));
}

namespace {

enum class Final { V, T, O };

LayerLabel as_label(Final f) {
  return f == Final::V ? LayerLabel::V : f == Final::T ? LayerLabel::T : LayerLabel::O;
}

/// Pre-commit labels for positions [0, c): `switches` oscillations ending on a label
/// different from the final one. Every segment keeps its last position non-O.
std::vector<LayerLabel> pre_commit_labels(int c, int switches, Final final_label, Engine& rng) {
  std::vector<LayerLabel> out(static_cast<std::size_t>(c), LayerLabel::O);
  const int segments = final_label == Final::O ? (switches > 0 ? switches + 1 : 0) : switches;
  if (segments == 0) return out;

  std::vector<int> cuts(static_cast<std::size_t>(c - 1));
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(static_cast<std::size_t>(segments - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(c);

  LayerLabel last;
  if (final_label == Final::O)
    last = std::bernoulli_distribution(0.5)(rng) ? LayerLabel::V : LayerLabel::T;
  else
    last = final_label == Final::T ? LayerLabel::V : LayerLabel::T;
  const auto flip = [](LayerLabel l) { return l == LayerLabel::V ? LayerLabel::T : LayerLabel::V; };
  LayerLabel label = (segments % 2 == 1) ? last : flip(last);

  std::bernoulli_distribution noise(0.3);
  for (int s = 0; s < segments; ++s) {
    const int begin = cuts[static_cast<std::size_t>(s)];
    const int end = cuts[static_cast<std::size_t>(s) + 1];
    for (int i = begin; i < end; ++i)
      out[static_cast<std::size_t>(i)] = (i + 1 < end && noise(rng)) ? LayerLabel::O : label;
    label = flip(label);
  }
  return out;
}

std::string probe_token(LayerLabel l, std::string_view text_answer, std::string_view vision_answer, Engine& rng) {
  static constexpr std::array<std::string_view, 9> junk = {"the", "is", "a", "of", "it", "this", "that", ":", "Answer"};
  if (l == LayerLabel::O) return std::string(junk[std::uniform_int_distribution<std::size_t>(0, junk.size() - 1)(rng)]);
  std::string word(l == LayerLabel::T ? text_answer : vision_answer);
  if (std::bernoulli_distribution(0.2)(rng) && !word.empty())
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word;
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

}  // namespace

TraceRecord simulate_multimodal(const ConflictInstance& instance, const TraceRecord& vision_run,
                                const TraceRecord& text_run, const MockParams& params, Engine& rng) {
  const double h_v = entropy(vision_run.distribution).nats;
  const double h_t = entropy(text_run.distribution).nats;
  const double dh = relative_uncertainty(h_t, h_v).value;
  const std::string y_v = normalize_answer(vision_run.answer_text).value_or("");
  const std::string y_t = normalize_answer(text_run.answer_text).value_or("");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Final final_label;
  if (unit(rng) < params.p_other)
    final_label = Final::O;
  else if (instance.variant == Variant::text_irrelevant)
    final_label = Final::V;
  else if (instance.variant == Variant::image_irrelevant)
    final_label = Final::T;
  else
    final_label = unit(rng) < text_follow_probability(dh, params) ? Final::T : Final::V;

  TraceRecord r;
  r.instance_id = instance.instance_id;
  r.condition = multimodal_condition(instance.variant);
  r.model_id = params.model_id;
  std::string answer;
  std::vector<Color> alternatives;
  if (final_label == Final::O) {
    std::vector<Color> pool;
    for (Color c : kPalette)
      if (to_string(c) != y_v && to_string(c) != y_t) pool.push_back(c);
    std::shuffle(pool.begin(), pool.end(), rng);
    answer = std::string(to_string(pool.front()));
    alternatives.assign(pool.begin() + 1, pool.end());
  } else {
    answer = final_label == Final::T ? y_t : y_v;
  }
  const Color answer_color = color_from_string(answer).value_or(instance.expected_vision_answer);
  for (Color c : kPalette)
    if (c != answer_color && std::find(alternatives.begin(), alternatives.end(), c) == alternatives.end())
      alternatives.push_back(c);
  r.answer_text = answer;
  r.distribution = answer_distribution(std::min(h_t, h_v), answer_color, alternatives);

  // Layer dynamics.
  const int L = params.layers;
  const bool irrelevant = instance.variant != Variant::conflict;
  const bool ambiguous = !irrelevant && std::abs(dh - params.balance) <= params.region_radius;
  const double osc_mean =
      irrelevant ? params.osc_mean_irrelevant : ambiguous ? params.osc_mean_ambiguous : params.osc_mean_clear;
  const int centre = ambiguous ? (3 * L) / 4 : L / 4;
  const int c = std::uniform_int_distribution<int>(centre - params.commit_spread, centre + params.commit_spread)(rng);
  const int max_switches = final_label == Final::O ? c - 1 : c;
  int switches = 0;
  if (osc_mean > 0.0) {
    std::poisson_distribution<int> poisson(osc_mean);
    do switches = poisson(rng);
    while (switches > max_switches);
  }
  std::vector<LayerLabel> labels = pre_commit_labels(c, switches, final_label, rng);
  labels.resize(static_cast<std::size_t>(L), as_label(final_label));

  std::normal_distribution<double> diff_noise(0.0, 0.5);
  std::normal_distribution<double> base_noise(0.0, 1.0);
  const double sign = final_label == Final::T ? 1.0 : final_label == Final::V ? -1.0 : 0.0;
  std::vector<LayerProbe> probes;
  probes.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const LayerLabel lab = labels[static_cast<std::size_t>(l)];
    double diff;
    if (l < c)
      diff = lab == LayerLabel::T ? 0.3 : lab == LayerLabel::V ? -0.3 : 0.0;
    else
      diff = sign * (1.0 + 3.0 * static_cast<double>(l - c + 1) / static_cast<double>(L - c));
    diff += diff_noise(rng);
    const double logit_v = round4(8.0 + base_noise(rng));
    probes.push_back({l, probe_token(lab, y_t, y_v, rng), round4(logit_v + diff), logit_v});
  }
  r.layer_probes = std::move(probes);
  return r;
}

std::vector<TraceRecord> emit_traces(const Manifest& manifest, const MockParams& params, unsigned threads) {
  params.validate();
  std::vector<const ConflictInstance*> todo;
  for (const auto& inst : manifest.instances)
    if (inst.expected_text_answer && inst.d_t != TextTier::none) todo.push_back(&inst);

  std::vector<std::array<TraceRecord, 3>> slots(todo.size());
  parallel_for(todo.size(), threads, [&](std::size_t i) {
    const auto& inst = *todo[i];
    Engine rng(derive_seed(params.seed, StreamKind::mock_instance, fnv1a64(inst.instance_id)));
    auto vision = simulate_unimodal(inst, RunCondition::vision_only, params, rng);
    auto text = simulate_unimodal(inst, RunCondition::text_only, params, rng);
    auto multi = simulate_multimodal(inst, vision, text, params, rng);
    slots[i] = {std::move(vision), std::move(text), std::move(multi)};
  });

  std::vector<TraceRecord> out;
  out.reserve(slots.size() * 3);
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(), [](const TraceRecord& a, const TraceRecord& b) {
    if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
    return a.condition < b.condition;
  });
  return out;
}

}  // namespace modfollow
