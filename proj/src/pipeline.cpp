#include "modfollow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "modfollow/error.hpp"
#include "modfollow/io.hpp"

namespace modfollow {

void AnalysisConfig::validate() const {
  if (!(bin_width > 0.0)) throw ConfigError("analysis config: bin_width must be > 0");
  if (!(radius > 0.0)) throw ConfigError("analysis config: radius must be > 0");
  if (bootstrap_n < 100) throw ConfigError("analysis config: bootstrap_n must be >= 100");
  if (min_count < 1) throw ConfigError("analysis config: min_count must be >= 1");
}

AnalysisConfig AnalysisConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("analysis config: expected a JSON object");
  AnalysisConfig c;
  try {
    if (j.contains("bin_width")) c.bin_width = j.at("bin_width").get<double>();
    if (j.contains("min_count")) c.min_count = j.at("min_count").get<std::size_t>();
    if (j.contains("radius")) c.radius = j.at("radius").get<double>();
    if (j.contains("bootstrap_n")) c.bootstrap_n = j.at("bootstrap_n").get<std::size_t>();
    if (j.contains("analysis_seed")) c.analysis_seed = j.at("analysis_seed").get<std::uint64_t>();
    if (j.contains("min_cases")) c.min_cases = j.at("min_cases").get<std::size_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("entropy_fallback")) {
      const auto s = j.at("entropy_fallback").get<std::string>();
      if (s == "truncated")
        c.entropy_fallback = EntropyFallback::truncated;
      else if (s == "exclude")
        c.entropy_fallback = EntropyFallback::exclude;
      else
        throw ConfigError("analysis config: entropy_fallback must be \"truncated\" or \"exclude\"");
    }
    if (j.contains("token_match")) {
      const auto s = j.at("token_match").get<std::string>();
      if (s == "prefix")
        c.token_match = TokenMatch::prefix;
      else if (s == "exact")
        c.token_match = TokenMatch::exact;
      else
        throw ConfigError("analysis config: token_match must be \"prefix\" or \"exact\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("analysis config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json AnalysisConfig::to_json() const {
  return {{"bin_width", bin_width},
          {"min_count", min_count},
          {"radius", radius},
          {"bootstrap_n", bootstrap_n},
          {"analysis_seed", analysis_seed},
          {"entropy_fallback", entropy_fallback == EntropyFallback::truncated ? "truncated" : "exclude"},
          {"token_match", token_match == TokenMatch::prefix ? "prefix" : "exact"},
          {"min_cases", min_cases}};
}

namespace {

FitOptions fit_options(const AnalysisConfig& c) {
  return {c.bin_width, c.min_count, c.min_cases, c.bootstrap_n, c.analysis_seed, c.threads};
}

nlohmann::json ratios_json(const std::optional<FollowingRatios>& r) {
  if (!r) return nullptr;
  return {{"tfr", r->tfr},       {"vfr", r->vfr},           {"n_text", r->n_text},
          {"n_vision", r->n_vision}, {"n_followed", r->n_followed}, {"n_other", r->n_other}};
}

bool enters_curve(const CaseMetrics& m) { return m.variant == Variant::conflict && m.d_t != TextTier::none; }

}  // namespace

AnalysisReport run_analysis(const Manifest& manifest, const std::vector<TraceRecord>& records,
                            const AnalysisConfig& config, bool split_entropy) {
  config.validate();
  AnalysisReport rep;
  const JoinResult joined = join_cases(records, manifest);
  rep.counts.records = records.size();
  rep.counts.bundles = joined.bundles.size();
  rep.counts.orphans = joined.orphans.size();
  rep.counts.duplicates = joined.duplicates.size();
  if (joined.bundles.empty()) throw AnalysisError("join", "no joinable cases");

  std::vector<OutcomeClass> all_outcomes, bicorrect_outcomes;
  std::vector<CaseMetrics> curve_cases;
  for (const auto& b : joined.bundles) {
    CaseMetrics m = compute_case_metrics(b);
    if (enters_curve(m)) {
      ++rep.counts.conflict_cases;
      if (!m.outcome) {
        ++rep.counts.not_conflicting;
      } else {
        all_outcomes.push_back(*m.outcome);
        if (m.bicorrect) {
          ++rep.counts.bicorrect;
          bicorrect_outcomes.push_back(*m.outcome);
          if (config.entropy_fallback == EntropyFallback::exclude && m.entropy_truncated)
            ++rep.counts.entropy_excluded;
          else if (m.degenerate)
            ++rep.counts.degenerate;
          else
            curve_cases.push_back(m);
        }
      }
    }
    rep.cases.push_back(std::move(m));
  }
  rep.ratios_all = following_ratios(all_outcomes);
  rep.ratios_bicorrect = following_ratios(bicorrect_outcomes);

  const auto points = curve_points(curve_cases);
  rep.counts.curve_points = points.size();
  const FitOptions opts = fit_options(config);
  rep.curve = fit_balance(points, opts);

  if (split_entropy) {
    SplitEstimate s;
    s.split = entropy_split(points);
    auto fit_half = [&](const std::vector<CurvePoint>& half, std::optional<CurveEstimate>& out,
                        std::string& error) {
      try {
        out = fit_balance(half, opts);
      } catch (const AnalysisError& e) {
        error = e.what();
      }
    };
    fit_half(s.split.low, s.low, s.low_error);
    if (s.split.degenerate)
      s.high_error = "degenerate split: every total entropy ties at the median";
    else
      fit_half(s.split.high, s.high, s.high_error);
    rep.split = std::move(s);
  }
  return rep;
}

nlohmann::json AnalysisReport::summary() const {
  nlohmann::json j;
  j["counts"] = {{"records", counts.records},
                 {"bundles", counts.bundles},
                 {"orphans", counts.orphans},
                 {"duplicates", counts.duplicates},
                 {"conflict_cases", counts.conflict_cases},
                 {"not_conflicting", counts.not_conflicting},
                 {"bicorrect", counts.bicorrect},
                 {"entropy_excluded", counts.entropy_excluded},
                 {"degenerate", counts.degenerate},
                 {"curve_points", counts.curve_points}};
  j["following_all"] = ratios_json(ratios_all);
  j["following_bicorrect"] = ratios_json(ratios_bicorrect);
  j["curve"] = balance_json(curve);
  if (split) {
    auto half = [](const std::optional<CurveEstimate>& e, const std::string& err, std::size_t n) {
      nlohmann::json h = e ? balance_json(*e) : nlohmann::json{{"error", err}};
      h["n"] = n;
      return h;
    };
    j["entropy_split"] = {{"median_total_entropy", split->split.median_total},
                          {"degenerate", split->split.degenerate},
                          {"low", half(split->low, split->low_error, split->split.low.size())},
                          {"high", half(split->high, split->high_error, split->split.high.size())}};
  }
  return j;
}

void write_analysis(const AnalysisReport& report, const AnalysisConfig& config,
                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "cases.csv", cases_csv(report.cases));
  write_file_atomic(out_dir / "curve.csv", curve_csv(report.curve.bins));
  write_file_atomic(out_dir / "balance.json", balance_json(report.curve).dump(2) + "\n");
  auto summary = report.summary();
  summary["config"] = config.to_json();
  write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
  if (report.split) {
    std::ostringstream out;
    out << "subset,center,lo,hi,n,tfr\n";
    auto rows = [&](const char* name, const std::optional<CurveEstimate>& e) {
      if (!e) return;
      for (const auto& b : e->bins)
        out << name << ',' << format_double(b.center) << ',' << format_double(b.lo) << ','
            << format_double(b.hi) << ',' << b.n << ',' << format_double(b.tfr) << '\n';
    };
    rows("low_entropy", report.split->low);
    rows("high_entropy", report.split->high);
    write_file_atomic(out_dir / "curve_split.csv", out.str());
  }
}

LayersReport run_layers(const Manifest& manifest, const std::vector<TraceRecord>& records, double balance,
                        const AnalysisConfig& config) {
  config.validate();
  const JoinResult joined = join_cases(records, manifest);
  if (joined.bundles.empty()) throw AnalysisError("join", "no joinable cases");
  const bool any_probes = std::any_of(joined.bundles.begin(), joined.bundles.end(), [](const CaseBundle& b) {
    return b.multimodal_run.layer_probes && !b.multimodal_run.layer_probes->empty();
  });
  if (!any_probes) throw AnalysisError("layers", "no multimodal record carries layer probes");

  LayersReport rep;
  const BicorrectResult filtered = bicorrect_filter(joined.bundles);
  rep.skipped = filtered.dropped;
  for (const CaseBundle* b : filtered.kept) {
    const CaseMetrics m = compute_case_metrics(*b);
    if (m.degenerate) {
      rep.skipped.push_back({m.instance_id, "degenerate relative uncertainty"});
      continue;
    }
    auto t = make_trajectory(*b, m.dh_rel, balance, config.radius, config.token_match);
    if (t.trajectory)
      rep.trajectories.push_back(std::move(*t.trajectory));
    else
      rep.skipped.push_back({m.instance_id, t.skip_reason});
  }
  if (rep.trajectories.empty()) throw AnalysisError("layers", "no usable trajectories after filtering");

  rep.summary = oscillation_summary(rep.trajectories);
  // Uniformity is checked over every trajectory; the grid itself shows conflict cases.
  const auto edges = uniform_edges(-2.0, 2.0, config.bin_width);
  rep.heatmap = heatmap(rep.trajectories, edges);
  std::vector<Trajectory> conflict;
  for (const auto& t : rep.trajectories)
    if (t.variant == Variant::conflict) conflict.push_back(t);
  if (!conflict.empty()) rep.heatmap = heatmap(conflict, edges);
  return rep;
}

void write_layers(const LayersReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "oscillations.csv", oscillations_csv(report.trajectories));
  write_file_atomic(out_dir / "oscillation_summary.csv", oscillation_summary_csv(report.summary));
  write_file_atomic(out_dir / "heatmap.csv", heatmap_csv(report.heatmap));
}

std::optional<double> read_balance(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("balance_point"))
    throw ConfigError(path.string() + ": missing balance_point");
  const auto& b = j.at("balance_point");
  if (b.is_null()) return std::nullopt;
  if (!b.is_number()) throw ConfigError(path.string() + ": balance_point must be a number or null");
  return b.get<double>();
}

}  // namespace modfollow
