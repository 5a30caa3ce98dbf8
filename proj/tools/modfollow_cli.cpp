// modfollow: dataset generation, trace simulation and analysis over the
// documented file formats. Exit codes: 0 ok, 1 data or analysis failure, 2 usage.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "modfollow/dataset.hpp"
#include "modfollow/error.hpp"
#include "modfollow/io.hpp"
#include "modfollow/mock.hpp"
#include "modfollow/pipeline.hpp"

namespace fs = std::filesystem;
using namespace modfollow;

namespace {

struct Failure {
  std::string stage;
  std::string message;
};

int fail(const Failure& f) {
  nlohmann::json j = {{"error", {{"stage", f.stage}, {"message", f.message}}}};
  std::cerr << j.dump() << '\n';
  return 1;
}

nlohmann::json read_json(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception&) {
    throw ConfigError("cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TraceRecord> read_traces(const fs::path& path) {
  ParsedTraces parsed = load_traces(path);
  for (const auto& w : parsed.warnings)
    spdlog::debug("{}:{}: {}: {}", path.string(), w.line, w.field_path, w.message);
  for (const auto& e : parsed.errors)
    spdlog::warn("{}:{}: {}: {} (line skipped)", path.string(), e.line, e.field_path, e.message);
  if (!parsed.errors.empty()) spdlog::warn("{} invalid trace line(s) skipped", parsed.errors.size());
  spdlog::info("read {} trace records from {}", parsed.records.size(), path.string());
  return std::move(parsed.records);
}

struct GenArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int groups = -1;
  unsigned threads = 0;
  bool synthetic = false;
};

int cmd_gen(const GenArgs& a) {
  DatasetConfig cfg = a.config.empty() ? DatasetConfig{} : DatasetConfig::from_json(read_json(a.config));
  if (a.groups >= 0) cfg.n_groups = a.groups;
  cfg.validate();
  Manifest m;
  if (a.synthetic) {
    m = synthetic_manifest(cfg, a.seed);
    fs::create_directories(a.out);
    write_file_atomic(fs::path(a.out) / "manifest.json", manifest_to_string(m));
  } else {
    m = generate_dataset(cfg, a.seed, a.out, resolve_threads(a.threads));
  }
  spdlog::info("wrote {} images and {} instances to {}", m.images.size(), m.instances.size(), a.out);
  return 0;
}

int cmd_validate(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  if (m.synthetic) return fail({"validate", manifest_path + ": synthetic manifest has no images"});
  const auto report = verify_manifest(m, fs::path(manifest_path).parent_path());
  std::cout << report.to_json().dump(2) << '\n';
  if (!report.passed()) {
    std::string msg = std::to_string(report.instances.size() - report.n_passed) + " instance(s) failed";
    if (!report.missing.empty()) msg += ", missing images: " + report.missing.front();
    return fail({"validate", msg});
  }
  return 0;
}

struct SimArgs {
  std::string manifest;
  std::string params;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

int cmd_simulate(const SimArgs& a) {
  MockParams p = a.params.empty() ? (a.preset.empty() ? MockParams{} : MockParams::preset(a.preset))
                                  : MockParams::from_json(read_json(a.params));
  if (a.seed) p.seed = *a.seed;
  p.validate();
  const Manifest m = load_manifest(a.manifest);
  const auto records = emit_traces(m, p, resolve_threads(a.threads));
  std::ostringstream out;
  write_traces(out, records);
  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(a.out, out.str());
  spdlog::info("wrote {} records to {}", records.size(), a.out);
  return 0;
}

struct AnalysisFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> bin_width;
  std::optional<std::size_t> min_count;
  std::optional<std::size_t> bootstrap_n;
  std::optional<double> radius;
  std::string entropy_fallback;
  bool exact_match = false;
  unsigned threads = 0;

  AnalysisConfig resolve() const {
    nlohmann::json j = config.empty() ? nlohmann::json::object() : read_json(config);
    if (seed) j["analysis_seed"] = *seed;
    if (bin_width) j["bin_width"] = *bin_width;
    if (min_count) j["min_count"] = *min_count;
    if (bootstrap_n) j["bootstrap_n"] = *bootstrap_n;
    if (radius) j["radius"] = *radius;
    if (!entropy_fallback.empty()) j["entropy_fallback"] = entropy_fallback;
    if (exact_match) j["token_match"] = "exact";
    AnalysisConfig c = AnalysisConfig::from_json(j);
    c.threads = resolve_threads(threads);
    return c;
  }
};

void add_analysis_flags(CLI::App* sub, AnalysisFlags& f) {
  sub->add_option("--config", f.config, "analysis config JSON")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "analysis seed (bootstrap)");
  sub->add_option("--bin-width", f.bin_width, "dH_rel bin width");
  sub->add_option("--min-count", f.min_count, "minimum cases per bin");
  sub->add_option("--bootstrap-n", f.bootstrap_n, "bootstrap resamples");
  sub->add_option("--radius", f.radius, "ambiguous-region radius");
  sub->add_option("--entropy-fallback", f.entropy_fallback, "truncated | exclude")
      ->check(CLI::IsMember({"truncated", "exclude"}));
  sub->add_option("--threads", f.threads, "worker threads (0 = all cores)");
}

int cmd_analyze(const std::string& manifest, const std::string& traces, const std::string& out,
                const AnalysisFlags& flags, bool split) {
  const AnalysisConfig cfg = flags.resolve();
  const Manifest m = load_manifest(manifest);
  const auto records = read_traces(traces);
  const auto report = run_analysis(m, records, cfg, split);
  write_analysis(report, cfg, out);
  const auto& c = report.curve;
  if (c.balance_point)
    spdlog::info("balance point {:.4f} from {} cases", *c.balance_point, c.n_cases);
  else
    spdlog::warn("no balance point ({} cases)", c.n_cases);
  for (const auto& f : c.flags) spdlog::warn("curve flag: {}", f);
  return 0;
}

struct LayerArgs {
  std::string manifest, traces, balance, out, instance;
  bool trajectory = false;
};

int cmd_layers(const LayerArgs& a, const AnalysisFlags& flags) {
  const AnalysisConfig cfg = flags.resolve();
  const auto balance = read_balance(a.balance);
  if (!balance) return fail({"layers", a.balance + ": balance_point is null"});
  const Manifest m = load_manifest(a.manifest);
  const auto records = read_traces(a.traces);
  const auto report = run_layers(m, records, *balance, cfg);
  write_layers(report, a.out);
  spdlog::info("{} trajectories, {} skipped", report.trajectories.size(), report.skipped.size());

  if (!a.instance.empty()) {
    const Trajectory* hit = nullptr;
    for (const auto& t : report.trajectories)
      if (t.instance_id == a.instance) hit = &t;
    if (!hit)
      for (const auto& t : report.trajectories)
        if (t.instance_id.rfind(a.instance, 0) == 0 && (!hit || t.instance_id.size() < hit->instance_id.size()))
          hit = &t;
    if (!hit) return fail({"layers", "no trajectory for instance " + a.instance});
    if (a.trajectory) {
      const auto path = fs::path(a.out) / ("trajectory_" + hit->instance_id + ".csv");
      write_file_atomic(path, trajectory_csv(*hit));
      spdlog::info("wrote {}", path.string());
    }
  }
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("modfollow");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("MODFOLLOW_LOG_LEVEL"))
    spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Modality-following dataset generation, simulation and analysis"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate the synthetic conflict dataset");
  g->add_option("--config", gen.config, "dataset config JSON")->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "master seed");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--groups", gen.groups, "number of groups (overrides config)")->check(CLI::NonNegativeNumber);
  g->add_option("--threads", gen.threads, "worker threads (0 = all cores)");
  g->add_flag("--synthetic", gen.synthetic, "write the manifest only, no images");

  std::string validate_manifest;
  auto* v = app.add_subcommand("validate", "re-check a generated dataset against its manifest");
  v->add_option("--manifest", validate_manifest, "manifest.json")->required();

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "emit mock-model traces for a manifest");
  s->add_option("--manifest", sim.manifest, "manifest.json")->required();
  auto* params_opt = s->add_option("--params", sim.params, "mock params JSON")->check(CLI::ExistingFile);
  s->add_option("--preset", sim.preset, "vision_preferring | neutral | text_preferring")
      ->check(CLI::IsMember({"vision_preferring", "neutral", "text_preferring"}))
      ->excludes(params_opt);
  s->add_option("--out", sim.out, "traces.jsonl")->required();
  s->add_option("--seed", sim.seed, "override the params seed");
  s->add_option("--threads", sim.threads, "worker threads (0 = all cores)");

  std::string an_manifest, an_traces, an_out;
  bool split = false;
  AnalysisFlags an_flags;
  auto* an = app.add_subcommand("analyze", "metrics, following curve and balance point");
  an->add_option("--manifest", an_manifest, "manifest.json")->required();
  an->add_option("--traces", an_traces, "traces.jsonl")->required();
  an->add_option("--out", an_out, "output directory")->required();
  an->add_flag("--split-entropy", split, "also fit low/high total-entropy halves");
  add_analysis_flags(an, an_flags);

  LayerArgs la;
  AnalysisFlags la_flags;
  auto* ly = app.add_subcommand("layers", "layer-wise oscillations and logit-difference heatmap");
  ly->add_option("--manifest", la.manifest, "manifest.json")->required();
  ly->add_option("--traces", la.traces, "traces.jsonl")->required();
  ly->add_option("--balance", la.balance, "balance.json from analyze")->required();
  ly->add_option("--out", la.out, "output directory")->required();
  ly->add_option("--instance", la.instance, "instance id (or id prefix) for a case study");
  ly->add_flag("--trajectory", la.trajectory, "write trajectory_<instance>.csv")->needs("--instance");
  ly->add_flag("--exact-match", la_flags.exact_match, "exact token matching for probes");
  add_analysis_flags(ly, la_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (v->parsed()) return cmd_validate(validate_manifest);
    if (s->parsed()) return cmd_simulate(sim);
    if (an->parsed()) return cmd_analyze(an_manifest, an_traces, an_out, an_flags, split);
    if (ly->parsed()) return cmd_layers(la, la_flags);
  } catch (const AnalysisError& e) {
    return fail({e.stage(), e.what()});
  } catch (const ConfigError& e) {
    return fail({"config", e.what()});
  } catch (const GenerationError& e) {
    return fail({"generate", e.what()});
  } catch (const ContractViolation& e) {
    return fail({"contract", e.what()});
  } catch (const std::exception& e) {
    return fail({"io", e.what()});
  }
  return 2;
}
