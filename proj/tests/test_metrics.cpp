#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "modfollow/error.hpp"
#include "modfollow/metrics.hpp"
#include "modfollow/stats.hpp"
#include "support.hpp"

using namespace modfollow;

namespace {

AnswerDistribution dist(std::vector<double> probs) {
  AnswerDistribution d;
  for (std::size_t i = 0; i < probs.size(); ++i) d.entries.push_back({"t" + std::to_string(i), probs[i]});
  return d;
}

// Term-by-term reference in long double, written out independently of the library kernel.
double entropy_oracle(const std::vector<double>& probs) {
  long double h = 0.0L;
  for (double p : probs)
    if (p > 0.0) h += -static_cast<long double>(p) * std::log(static_cast<long double>(p));
  return static_cast<double>(h);
}

}  // namespace

TEST_CASE("entropy of fixed distributions") {
  CHECK(entropy(dist({1.0})).nats == 0.0);
  CHECK(entropy(dist({1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6})).nats ==
        doctest::Approx(1.791759).epsilon(1e-6));

  const std::vector<double> p = {0.7, 0.2, 0.1};
  const double h = entropy(dist(p)).nats;
  CHECK(h == doctest::Approx(entropy_oracle(p)).epsilon(1e-12));
  CHECK(std::abs(h - 0.801819) < 5e-7);
}

TEST_CASE("entropy prefers the runner's full-vocabulary value") {
  auto d = dist({0.6, 0.3});
  d.tail_mass = 0.1;
  auto e = entropy(d);
  CHECK(e.truncated);
  CHECK(e.nats == doctest::Approx(entropy_oracle({0.6, 0.3})));

  d.full_entropy_nats = 1.25;
  e = entropy(d);
  CHECK_FALSE(e.truncated);
  CHECK(e.nats == 1.25);
}

TEST_CASE("relative uncertainty") {
  CHECK(relative_uncertainty(1.5, 0.5).value == doctest::Approx(1.0));
  CHECK(relative_uncertainty(0.2, 0.6).value == doctest::Approx(-1.0));
  CHECK(relative_uncertainty(0.9, 0.9).value == 0.0);
  auto z = relative_uncertainty(0.0, 0.0);
  CHECK(z.degenerate);
  CHECK(z.value == 0.0);
  CHECK_FALSE(relative_uncertainty(0.0, 0.3).degenerate);
  CHECK(relative_uncertainty(0.0, 0.3).value == doctest::Approx(-2.0));
  CHECK_THROWS_AS(relative_uncertainty(-0.1, 0.3), ContractViolation);
  CHECK_THROWS_AS(relative_uncertainty(0.1, std::nan("")), ContractViolation);
}

TEST_CASE("relative uncertainty properties on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng), c = 0.01 + u(rng);
    const auto ab = relative_uncertainty(a, b).value;
    CHECK(ab == doctest::Approx(-relative_uncertainty(b, a).value));
    CHECK(ab == doctest::Approx(relative_uncertainty(c * a, c * b).value));
    CHECK(ab >= -2.0);
    CHECK(ab <= 2.0);
    CHECK((ab > 0) == (a > b));
  }
}

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("Blue.") == "blue");
  CHECK(normalize_answer("  YELLOW\n") == "yellow");
  CHECK(normalize_answer("blue square") == "blue");
  CHECK(normalize_answer("\"Red\"!") == "red");
  CHECK_FALSE(normalize_answer("").has_value());
  CHECK_FALSE(normalize_answer(" ... ").has_value());
}

TEST_CASE("classify_outcome") {
  using testsupport::bundle;
  CHECK(classify_outcome(bundle("yellow", "blue", "Blue.")).outcome == OutcomeClass::text_following);
  CHECK(classify_outcome(bundle("yellow", "blue", "YELLOW")).outcome == OutcomeClass::vision_following);
  CHECK(classify_outcome(bundle("yellow", "blue", "green")).outcome == OutcomeClass::other);
  const auto same = classify_outcome(bundle("blue", "blue", "blue"));
  CHECK_FALSE(same.outcome.has_value());
  CHECK(same.excluded_reason.find("not a conflict") != std::string::npos);
  CHECK(classify_outcome(bundle("yellow", "blue", "")).outcome == OutcomeClass::other);
}

TEST_CASE("bicorrect_filter") {
  using testsupport::bundle;
  std::vector<CaseBundle> bs = {bundle("yellow", "blue", "blue"), bundle("red", "blue", "blue"),
                                bundle("yellow", "green", "blue"),
                                bundle("yellow", "blue", "blue", Color::yellow, std::nullopt)};
  auto r = bicorrect_filter(bs);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0] == &bs[0]);
  REQUIRE(r.dropped.size() == 3);
  CHECK(r.dropped[0].reason.find("vision") != std::string::npos);
  CHECK(r.dropped[1].reason.find("text") != std::string::npos);
  CHECK(r.dropped[2].reason.find("no expected text answer") != std::string::npos);
}

TEST_CASE("following ratios") {
  using O = OutcomeClass;
  auto r = following_ratios({O::text_following, O::text_following, O::vision_following, O::other});
  REQUIRE(r);
  CHECK(r->tfr == doctest::Approx(2.0 / 3.0));
  CHECK(r->vfr == doctest::Approx(1.0 / 3.0));
  CHECK(r->n_other == 1);
  CHECK(following_ratios({O::vision_following, O::vision_following})->tfr == 0.0);
  CHECK_FALSE(following_ratios({O::other}).has_value());
  CHECK_FALSE(following_ratios({}).has_value());
}

TEST_CASE("case metrics and csv") {
  auto b = testsupport::bundle("yellow", "blue", "blue");
  b.vision_run.distribution.full_entropy_nats = 0.75;
  b.text_run.distribution.full_entropy_nats = 0.25;
  const auto m = compute_case_metrics(b);
  CHECK(m.h_vision == 0.75);
  CHECK(m.h_text == 0.25);
  CHECK(m.dh_rel == doctest::Approx(-1.0));
  CHECK(m.bicorrect);
  CHECK_FALSE(m.entropy_truncated);
  CHECK(m.outcome == OutcomeClass::text_following);
  const auto csv = cases_csv({m});
  CHECK(csv.rfind("instance_id,d_v,d_t,variant,H_text,H_vision,dH_rel,outcome,bicorrect,flags\n", 0) == 0);
  CHECK(csv.find("g0000_v00_t0,0,0,conflict,0.25,0.75,-1,text_following,true,") != std::string::npos);
}

TEST_CASE("spearman with ties against a direct rank formula") {
  Eigen::ArrayXd x(6), y(6);
  x << 1, 2, 2, 3, 4, 5;
  y << 10, 9, 9, 4, 4, 1;
  // Average ranks by hand: x -> 1, 2.5, 2.5, 4, 5, 6 ; y -> 6, 4.5, 4.5, 2.5, 2.5, 1
  Eigen::ArrayXd rx(6), ry(6);
  rx << 1, 2.5, 2.5, 4, 5, 6;
  ry << 6, 4.5, 4.5, 2.5, 2.5, 1;
  const Eigen::ArrayXd dx = rx - rx.mean(), dy = ry - ry.mean();
  const double expected = (dx * dy).sum() / std::sqrt(dx.square().sum() * dy.square().sum());
  CHECK(stats::spearman(x, y) == doctest::Approx(expected));
  Eigen::ArrayXd flat = Eigen::ArrayXd::Constant(6, 0.5);
  CHECK(std::isnan(stats::spearman(x, flat)));
}

TEST_CASE("logistic fit solves the score equations") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 3000;
  Eigen::ArrayXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = u(rng);
    y(i) = unit(rng) < 1.0 / (1.0 + std::exp(-(-1.8 - 3.0 * x(i)))) ? 1.0 : 0.0;
  }
  const auto fit = stats::fit_logistic(x, y);
  REQUIRE(fit.converged);
  double g0 = 0.0, g1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(fit.beta(0) + fit.beta(1) * x(i))));
    g0 += y(i) - p;
    g1 += (y(i) - p) * x(i);
  }
  CHECK(std::abs(g0) < 1e-6);
  CHECK(std::abs(g1) < 1e-6);
  CHECK(fit.beta(0) == doctest::Approx(-1.8).epsilon(0.15));
  CHECK(fit.beta(1) == doctest::Approx(-3.0).epsilon(0.15));
  CHECK(fit.covariance(1, 1) > 0.0);
}

TEST_CASE("quantile interpolates") {
  CHECK(stats::quantile(std::vector<double>{3, 1, 2, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(stats::quantile(std::vector<double>{3, 1, 2, 4}, 0.0) == 1.0);
  CHECK(stats::quantile(std::vector<double>{3, 1, 2, 4}, 1.0) == 4.0);
}
