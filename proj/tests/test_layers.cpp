#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "modfollow/error.hpp"
#include "modfollow/layers.hpp"
#include "support.hpp"

using namespace modfollow;
using L = LayerLabel;

namespace {

// Reference count: strip O from the label string, then count "VT" and "TV" bigrams.
int oracle_switches(const std::vector<L>& labels) {
  std::string s;
  for (L l : labels)
    if (l != L::O) s += to_char(l);
  int n = 0;
  for (std::size_t i = 1; i < s.size(); ++i) n += s[i] != s[i - 1];
  return n;
}

std::vector<LayerProbe> probes(const std::vector<std::string>& tokens) {
  std::vector<LayerProbe> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({static_cast<int>(i), tokens[i], 0.0, 0.0});
  return out;
}

Trajectory traj(const std::string& id, double dh, std::vector<double> diffs, Variant v = Variant::conflict) {
  Trajectory t;
  t.instance_id = id;
  t.variant = v;
  t.dh_rel = dh;
  t.diffs = Eigen::Map<Eigen::VectorXd>(diffs.data(), static_cast<Eigen::Index>(diffs.size()));
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    t.layers.push_back(static_cast<int>(i));
    t.labels.push_back(diffs[i] > 0 ? L::T : L::V);
  }
  t.oscillations = count_oscillations(t.labels);
  return t;
}

}  // namespace

TEST_CASE("label_layers") {
  auto ls = label_layers(probes({"yellow", "yellow", "blue"}), "blue", "yellow");
  CHECK(ls == std::vector<L>{L::V, L::V, L::T});
  CHECK(label_layers(probes({"Blue"}), "blue", "yellow") == std::vector<L>{L::T});
  CHECK(label_layers(probes({"the"}), "blue", "yellow") == std::vector<L>{L::O});
  CHECK(label_layers(probes({" blu", "yel", "bl", ""}), "blue", "yellow") == std::vector<L>{L::T, L::V, L::O, L::O});
  CHECK(label_layers(probes({" blu"}), "blue", "yellow", TokenMatch::exact) == std::vector<L>{L::O});
  CHECK_THROWS_AS(label_layers(probes({"x"}), "blue", "Blue."), ContractViolation);
}

TEST_CASE("token matching") {
  CHECK(token_matches("blue", "blue", TokenMatch::exact));
  CHECK(token_matches("gre", "green", TokenMatch::prefix));
  CHECK(token_matches("greenish", "green", TokenMatch::prefix));
  CHECK_FALSE(token_matches("gr", "green", TokenMatch::prefix));
  CHECK_FALSE(token_matches("gre", "green", TokenMatch::exact));
  CHECK_FALSE(token_matches("red", "green", TokenMatch::prefix));
}

TEST_CASE("count_oscillations examples") {
  CHECK(count_oscillations(std::vector<L>{L::V, L::O, L::T}) == 1);
  CHECK(count_oscillations(std::vector<L>{L::V, L::V, L::V}) == 0);
  CHECK(count_oscillations(std::vector<L>{L::V, L::T, L::V, L::T}) == 3);
  CHECK(count_oscillations(std::vector<L>{}) == 0);
  CHECK(count_oscillations(std::vector<L>{L::O, L::O}) == 0);
}

TEST_CASE("count_oscillations matches the oracle on every sequence up to length 8") {
  std::size_t checked = 0;
  for (int n = 0; n <= 8; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<L> seq;
      for (int i = 0, c = code; i < n; ++i, c /= 3) seq.push_back(static_cast<L>(c % 3));
      REQUIRE(count_oscillations(seq) == oracle_switches(seq));
      ++checked;
    }
  }
  CHECK(checked == 9841);
}

TEST_CASE("count_oscillations invariances") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<L> seq(rng() % 20);
    for (auto& l : seq) l = static_cast<L>(rng() % 3);
    const int base = count_oscillations(seq);

    auto with_o = seq;
    with_o.insert(with_o.begin() + static_cast<std::ptrdiff_t>(rng() % (with_o.size() + 1)), L::O);
    CHECK(count_oscillations(with_o) == base);

    if (!seq.empty()) {
      auto dup = seq;
      const auto at = rng() % dup.size();
      dup.insert(dup.begin() + static_cast<std::ptrdiff_t>(at), dup[at]);
      CHECK(count_oscillations(dup) == base);
    }

    auto swapped = seq;
    for (auto& l : swapped) l = l == L::V ? L::T : l == L::T ? L::V : L::O;
    CHECK(count_oscillations(swapped) == base);

    const int non_o = static_cast<int>(std::count_if(seq.begin(), seq.end(), [](L l) { return l != L::O; }));
    CHECK(base <= std::max(non_o - 1, 0));
  }
}

TEST_CASE("commit index") {
  CHECK(commit_index(std::vector<L>{L::V, L::T, L::T}) == 1);
  CHECK(commit_index(std::vector<L>{L::T, L::T}) == 0);
  CHECK(commit_index(std::vector<L>{L::T, L::O, L::V}) == 2);
  CHECK(commit_index(std::vector<L>{}) == 0);
}

TEST_CASE("trajectory from a bundle") {
  auto b = testsupport::bundle("yellow", "blue", "blue");
  CHECK_FALSE(make_trajectory(b, -1.0, -0.6, 0.5).trajectory.has_value());
  b.multimodal_run.layer_probes = std::vector<LayerProbe>{
      {0, "blue", 2.0, 1.0}, {1, "Blue", 3.0, 1.0}, {2, "blue", 5.0, 1.0}};
  auto r = make_trajectory(b, -1.5, -0.6, 0.5);
  REQUIRE(r.trajectory);
  const auto& t = *r.trajectory;
  CHECK(t.oscillations == 0);
  CHECK(t.commit_layer == 0);
  CHECK(t.region == RegionLabel::clear_text);
  CHECK((t.diffs.array() > 0).all());
  CHECK(t.diffs(2) == doctest::Approx(4.0));
  CHECK(trajectory_csv(t) == "layer,logit_diff,label\n0,1,T\n1,2,T\n2,4,T\n");

  auto same = testsupport::bundle("blue", "blue", "blue");
  same.multimodal_run.layer_probes = b.multimodal_run.layer_probes;
  CHECK_FALSE(make_trajectory(same, 0.0, 0.0, 0.5).trajectory.has_value());
}

TEST_CASE("oscillation summary") {
  auto one = traj("a", 0.0, {1, -1, 1});
  one.region = RegionLabel::ambiguous;
  auto cells = oscillation_summary({one});
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].region == "ambiguous");
  CHECK(cells[0].mean == 2.0);
  CHECK_FALSE(cells[0].stderr_mean.has_value());
  CHECK(cells[1].region == "clear");
  CHECK(cells[1].n == 0);
  CHECK_FALSE(cells[1].mean.has_value());
  CHECK(cells[2].mean == 2.0);

  auto two = traj("b", 1.0, {1, 1, 1});
  two.region = RegionLabel::clear_vision;
  auto three = traj("c", -1.0, {1, -1, -1});
  three.region = RegionLabel::clear_text;
  cells = oscillation_summary({one, two, three});
  CHECK(cells[1].n == 2);
  CHECK(cells[1].mean == doctest::Approx(0.5));
  REQUIRE(cells[1].stderr_mean);
  CHECK(*cells[1].stderr_mean == doctest::Approx(0.5));
  const auto csv = oscillation_summary_csv(cells);
  CHECK(csv.rfind("region,variant,n,mean,stderr\nambiguous,conflict,1,2,NA\n", 0) == 0);
}

TEST_CASE("heatmap") {
  const auto edges = uniform_edges(-2.0, 2.0, 1.0);
  REQUIRE(edges.size() == 5);
  auto m = heatmap({traj("a", -1.5, {0.5, 1.0, 2.0})}, edges);
  CHECK(m.counts == std::vector<std::size_t>{1, 0, 0, 0});
  CHECK(m.mean(0, 2) == 2.0);
  CHECK(std::isnan(m.mean(1, 0)));

  m = heatmap({traj("a", 1.2, {1.0, 3.0}), traj("b", 1.8, {2.0, -1.0}), traj("c", 5.0, {0.0, 0.0})}, edges);
  CHECK(m.counts[3] == 3);
  CHECK(m.mean(3, 0) == doctest::Approx(1.0));
  CHECK(m.mean(3, 1) == doctest::Approx(2.0 / 3.0));
  const auto csv = heatmap_csv(m);
  CHECK(csv.rfind("bin_lo,bin_hi,n,layer_0,layer_1\n-2,-1,0,NA,NA\n", 0) == 0);

  try {
    heatmap({traj("a", 0.0, {1, 2, 3}), traj("bad_one", 0.0, {1, 2})}, edges);
    FAIL("expected AnalysisError");
  } catch (const AnalysisError& e) {
    CHECK(e.stage() == "heatmap");
    CHECK(std::string(e.what()).find("bad_one") != std::string::npos);
  }
}

TEST_CASE("heatmap cells stay within the contributing range") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 2.0);
  std::uniform_real_distribution<double> dh(-2.0, 2.0);
  std::vector<Trajectory> ts;
  for (int i = 0; i < 300; ++i) ts.push_back(traj("t" + std::to_string(i), dh(rng), {d(rng), d(rng), d(rng), d(rng)}));
  const auto edges = uniform_edges(-2.0, 2.0, 0.5);
  const auto m = heatmap(ts, edges);
  for (Eigen::Index r = 0; r < m.mean.rows(); ++r)
    for (Eigen::Index c = 0; c < m.mean.cols(); ++c) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& t : ts) {
        const auto row = std::clamp<std::ptrdiff_t>(
            std::upper_bound(edges.begin(), edges.end(), t.dh_rel) - edges.begin() - 1, 0, 7);
        if (row != r) continue;
        lo = std::min(lo, t.diffs(c));
        hi = std::max(hi, t.diffs(c));
      }
      if (m.counts[static_cast<std::size_t>(r)] == 0) continue;
      CHECK(m.mean(r, c) >= lo - 1e-12);
      CHECK(m.mean(r, c) <= hi + 1e-12);
    }
}
