#include "modfollow/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "modfollow/error.hpp"
#include "modfollow/io.hpp"
#include "modfollow/metrics.hpp"

namespace modfollow {

char to_char(LayerLabel l) noexcept {
  switch (l) {
    case LayerLabel::V:
      return 'V';
    case LayerLabel::T:
      return 'T';
    case LayerLabel::O:
      return 'O';
  }
  return 'O';
}

bool token_matches(std::string_view token, std::string_view candidate, TokenMatch mode) {
  if (token.empty() || candidate.empty()) return false;
  if (token == candidate) return true;
  if (mode == TokenMatch::exact) return false;
  const auto& shorter = token.size() < candidate.size() ? token : candidate;
  const auto& longer = token.size() < candidate.size() ? candidate : token;
  return shorter.size() >= 3 && longer.substr(0, shorter.size()) == shorter;
}

std::vector<LayerLabel> label_layers(std::span<const LayerProbe> probes, std::string_view text_answer,
                                     std::string_view vision_answer, TokenMatch mode) {
  const auto t = normalize_answer(text_answer);
  const auto v = normalize_answer(vision_answer);
  if (!t || !v || *t == *v) throw ContractViolation("label_layers: candidate answers must be distinct words");
  std::vector<LayerLabel> out;
  out.reserve(probes.size());
  for (const auto& p : probes) {
    const auto tok = normalize_answer(p.top1_token);
    const bool is_t = tok && token_matches(*tok, *t, mode);
    const bool is_v = tok && token_matches(*tok, *v, mode);
    // A token that fits both candidates says nothing about either.
    if (is_t && !is_v)
      out.push_back(LayerLabel::T);
    else if (is_v && !is_t)
      out.push_back(LayerLabel::V);
    else
      out.push_back(LayerLabel::O);
  }
  return out;
}

int count_oscillations(std::span<const LayerLabel> labels) {
  int runs = 0;
  std::optional<LayerLabel> last;
  for (auto l : labels) {
    if (l == LayerLabel::O) continue;
    if (l != last) ++runs;
    last = l;
  }
  return std::max(runs - 1, 0);
}

std::size_t commit_index(std::span<const LayerLabel> labels) {
  if (labels.empty()) return 0;
  std::size_t i = labels.size() - 1;
  while (i > 0 && labels[i - 1] == labels.back()) --i;
  return i;
}

TrajectoryResult make_trajectory(const CaseBundle& bundle, double dh_rel, double balance, double radius,
                                 TokenMatch mode) {
  const auto& probes = bundle.multimodal_run.layer_probes;
  if (!probes || probes->empty()) return {std::nullopt, "multimodal run has no layer probes"};
  const auto t = normalize_answer(bundle.text_run.answer_text);
  const auto v = normalize_answer(bundle.vision_run.answer_text);
  if (!t || !v) return {std::nullopt, "unanswerable unimodal run"};
  if (*t == *v) return {std::nullopt, "not a conflict: unimodal answers agree"};

  Trajectory tr;
  tr.instance_id = bundle.instance.instance_id;
  tr.variant = bundle.instance.variant;
  tr.dh_rel = dh_rel;
  tr.labels = label_layers(*probes, *t, *v, mode);
  tr.diffs.resize(static_cast<Eigen::Index>(probes->size()));
  for (std::size_t i = 0; i < probes->size(); ++i) {
    const auto& p = (*probes)[i];
    tr.layers.push_back(p.layer_index);
    tr.diffs(static_cast<Eigen::Index>(i)) = p.logit_text_answer - p.logit_vision_answer;
  }
  tr.oscillations = count_oscillations(tr.labels);
  tr.region = classify_region(dh_rel, balance, radius);
  tr.commit_layer = tr.layers[commit_index(tr.labels)];
  return {std::move(tr), {}};
}

std::vector<OscillationCell> oscillation_summary(const std::vector<Trajectory>& trajectories) {
  std::set<Variant> variants;
  for (const auto& t : trajectories) variants.insert(t.variant);
  std::vector<OscillationCell> cells;
  for (const char* region : {"ambiguous", "clear", "all"}) {
    for (Variant v : variants) {
      std::vector<double> xs;
      for (const auto& t : trajectories) {
        if (t.variant != v) continue;
        const bool amb = t.region == RegionLabel::ambiguous;
        if ((std::string_view(region) == "ambiguous" && !amb) || (std::string_view(region) == "clear" && amb))
          continue;
        xs.push_back(static_cast<double>(t.oscillations));
      }
      OscillationCell cell{region, v, xs.size(), std::nullopt, std::nullopt};
      if (!xs.empty()) {
        const Eigen::Map<const Eigen::ArrayXd> a(xs.data(), static_cast<Eigen::Index>(xs.size()));
        cell.mean = a.mean();
        if (xs.size() > 1) {
          const double var = (a - *cell.mean).square().sum() / static_cast<double>(xs.size() - 1);
          cell.stderr_mean = std::sqrt(var / static_cast<double>(xs.size()));
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

Heatmap heatmap(const std::vector<Trajectory>& trajectories, const std::vector<double>& edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw ContractViolation("heatmap: need at least two ascending edges");
  if (trajectories.empty()) throw AnalysisError("heatmap", "no trajectories");
  const auto& first = trajectories.front();
  std::vector<std::string> bad;
  for (const auto& t : trajectories)
    if (t.layers != first.layers) bad.push_back(t.instance_id);
  if (!bad.empty()) {
    std::string msg = "inconsistent layer counts (expected " + std::to_string(first.layers.size()) +
                      " layers as in " + first.instance_id + "):";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + bad[i];
    if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " total)";
    throw AnalysisError("heatmap", msg);
  }

  const std::size_t rows = edges.size() - 1;
  const auto cols = static_cast<Eigen::Index>(first.layers.size());
  Heatmap map;
  map.edges = edges;
  map.layers = first.layers;
  map.counts.assign(rows, 0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), cols);
  for (const auto& t : trajectories) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), t.dh_rel);
    const std::size_t row =
        std::clamp<std::ptrdiff_t>(it - edges.begin() - 1, 0, static_cast<std::ptrdiff_t>(rows) - 1);
    sum.row(static_cast<Eigen::Index>(row)) += t.diffs.transpose();
    ++map.counts[row];
  }
  map.mean = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows), cols,
                                       std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < rows; ++r)
    if (map.counts[r] > 0)
      map.mean.row(static_cast<Eigen::Index>(r)) =
          sum.row(static_cast<Eigen::Index>(r)) / static_cast<double>(map.counts[r]);
  return map;
}

std::vector<double> uniform_edges(double lo, double hi, double width) {
  if (!(width > 0.0) || !(hi > lo)) throw ContractViolation("uniform_edges: need hi > lo and width > 0");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));
  std::vector<double> edges;
  for (std::size_t i = 0; i <= n; ++i) edges.push_back(lo + width * static_cast<double>(i));
  return edges;
}

namespace {

std::string labels_string(const std::vector<LayerLabel>& labels) {
  std::string s;
  for (auto l : labels) s += to_char(l);
  return s;
}

}  // namespace

std::string oscillations_csv(const std::vector<Trajectory>& trajectories) {
  std::ostringstream out;
  out << "instance_id,variant,dH_rel,region,oscillations,commit_layer,labels\n";
  for (const auto& t : trajectories)
    out << csv_escape(t.instance_id) << ',' << to_string(t.variant) << ',' << format_double(t.dh_rel) << ','
        << to_string(t.region) << ',' << t.oscillations << ',' << t.commit_layer << ',' << labels_string(t.labels)
        << '\n';
  return out.str();
}

std::string oscillation_summary_csv(const std::vector<OscillationCell>& cells) {
  std::ostringstream out;
  out << "region,variant,n,mean,stderr\n";
  for (const auto& c : cells) {
    out << c.region << ',' << to_string(c.variant) << ',' << c.n << ',';
    out << (c.mean ? format_double(*c.mean) : "NA") << ',';
    out << (c.stderr_mean ? format_double(*c.stderr_mean) : "NA") << '\n';
  }
  return out.str();
}

std::string heatmap_csv(const Heatmap& map) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,n";
  for (int l : map.layers) out << ",layer_" << l;
  out << '\n';
  for (Eigen::Index r = 0; r < map.mean.rows(); ++r) {
    const auto ri = static_cast<std::size_t>(r);
    out << format_double(map.edges[ri]) << ',' << format_double(map.edges[ri + 1]) << ',' << map.counts[ri];
    for (Eigen::Index c = 0; c < map.mean.cols(); ++c) out << ',' << format_double(map.mean(r, c));
    out << '\n';
  }
  return out.str();
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream out;
  out << "layer,logit_diff,label\n";
  for (std::size_t i = 0; i < t.layers.size(); ++i)
    out << t.layers[i] << ',' << format_double(t.diffs(static_cast<Eigen::Index>(i))) << ','
        << to_char(t.labels[i]) << '\n';
  return out.str();
}

}  // namespace modfollow
