#include "modfollow/curve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "modfollow/error.hpp"
#include "modfollow/io.hpp"
#include "modfollow/parallel.hpp"
#include "modfollow/rng.hpp"
#include "modfollow/stats.hpp"

namespace modfollow {

std::vector<CurvePoint> curve_points(const std::vector<CaseMetrics>& cases) {
  std::vector<CurvePoint> out;
  for (const auto& c : cases) {
    if (!c.bicorrect || c.degenerate || !c.outcome || *c.outcome == OutcomeClass::other) continue;
    out.push_back({c.dh_rel, *c.outcome == OutcomeClass::text_following, c.total_entropy()});
  }
  return out;
}

std::vector<CurveBin> bin_curve(const std::vector<CurvePoint>& points, double bin_width, std::size_t min_count) {
  if (!(bin_width > 0.0)) throw ContractViolation("bin_width must be positive");
  if (points.empty()) throw AnalysisError("bin_curve", "no usable cases");
  const auto [mn, mx] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& a, const auto& b) { return a.dh_rel < b.dh_rel; });
  const double lo = mn->dh_rel;
  const double span = mx->dh_rel - lo;
  const auto n_bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / bin_width - 1e-12)));

  std::vector<std::size_t> n(n_bins, 0), text(n_bins, 0);
  for (const auto& p : points) {
    auto idx = static_cast<std::size_t>(std::floor((p.dh_rel - lo) / bin_width));
    idx = std::min(idx, n_bins - 1);
    ++n[idx];
    text[idx] += p.text_following;
  }
  std::vector<CurveBin> bins;
  for (std::size_t i = 0; i < n_bins; ++i) {
    if (n[i] < min_count || n[i] == 0) continue;
    const double b_lo = lo + bin_width * static_cast<double>(i);
    bins.push_back({b_lo + bin_width / 2.0, b_lo, b_lo + bin_width, n[i],
                    static_cast<double>(text[i]) / static_cast<double>(n[i])});
  }
  if (bins.size() < 2)
    throw AnalysisError("bin_curve", "insufficient data: " + std::to_string(bins.size()) +
                                         " bin(s) with at least " + std::to_string(min_count) + " cases");
  return bins;
}

double monotonicity_score(const std::vector<CurveBin>& bins) {
  Eigen::ArrayXd centers(static_cast<Eigen::Index>(bins.size()));
  Eigen::ArrayXd tfr(static_cast<Eigen::Index>(bins.size()));
  for (std::size_t i = 0; i < bins.size(); ++i) {
    centers(static_cast<Eigen::Index>(i)) = bins[i].center;
    tfr(static_cast<Eigen::Index>(i)) = bins[i].tfr;
  }
  return stats::spearman(centers, tfr);
}

std::optional<double> interpolated_crossing(const std::vector<CurveBin>& bins) {
  for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
    const double a = bins[i].tfr - 0.5;
    const double b = bins[i + 1].tfr - 0.5;
    if (a == 0.0 && b == 0.0) continue;
    if (a == 0.0) {
      const bool crossed = i > 0 && (bins[i - 1].tfr - 0.5) * b < 0.0;
      if (crossed) return bins[i].center;
      continue;
    }
    if (a * b < 0.0) return bins[i].center + (bins[i + 1].center - bins[i].center) * a / (a - b);
  }
  return std::nullopt;
}

double CurveEstimate::ci_half_width() const {
  if (!balance_ci) return std::numeric_limits<double>::quiet_NaN();
  return (balance_ci->second - balance_ci->first) / 2.0;
}

namespace {

bool separated(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  double max_text = -INFINITY, min_text = INFINITY, max_vis = -INFINITY, min_vis = INFINITY;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (y(i) > 0.5) {
      max_text = std::max(max_text, x(i));
      min_text = std::min(min_text, x(i));
    } else {
      max_vis = std::max(max_vis, x(i));
      min_vis = std::min(min_vis, x(i));
    }
  }
  if (!std::isfinite(max_text) || !std::isfinite(max_vis)) return true;  // one class only
  return max_text <= min_vis || max_vis <= min_text;
}

}  // namespace

CurveEstimate fit_balance(const std::vector<CurvePoint>& points, const FitOptions& options) {
  if (points.size() < options.min_cases)
    throw AnalysisError("fit_balance", "insufficient data: " + std::to_string(points.size()) +
                                           " usable cases, need " + std::to_string(options.min_cases));
  CurveEstimate est;
  est.n_cases = points.size();
  est.bins = bin_curve(points, options.bin_width, options.min_count);
  est.monotonicity = monotonicity_score(est.bins);
  est.interpolated_balance = interpolated_crossing(est.bins);
  if (!est.interpolated_balance) est.flags.insert("no_crossing");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::ArrayXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = points[static_cast<std::size_t>(i)].dh_rel;
    y(i) = points[static_cast<std::size_t>(i)].text_following ? 1.0 : 0.0;
  }

  if (separated(x, y)) {
    est.flags.insert("separation");
    est.balance_point = est.interpolated_balance;
    return est;
  }
  const auto fit = stats::fit_logistic(x, y);
  est.beta0 = fit.beta(0);
  est.beta1 = fit.beta(1);
  if (!fit.converged) {
    est.flags.insert("not_converged");
    est.balance_point = est.interpolated_balance;
    return est;
  }
  est.beta1_stderr = std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  if (est.beta1 >= 0.0) est.flags.insert("non_monotonic_fit");
  if (std::abs(est.beta1) < 1.96 * est.beta1_stderr) {
    est.flags.insert("flat_fit");
    return est;
  }
  est.balance_point = -est.beta0 / est.beta1;

  if (options.bootstrap_n == 0) return est;
  std::vector<double> draws(options.bootstrap_n, std::numeric_limits<double>::quiet_NaN());
  const double sign = est.beta1 < 0.0 ? -1.0 : 1.0;
  parallel_for(options.bootstrap_n, options.threads, [&](std::size_t r) {
    Engine rng(derive_seed(options.seed, StreamKind::bootstrap, r));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::ArrayXd bx(n), by(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = pick(rng);
      bx(i) = x(k);
      by(i) = y(k);
    }
    const auto bfit = stats::fit_logistic(bx, by, fit.beta, 50);
    if (bfit.converged && bfit.beta(1) * sign > 0.0) draws[r] = -bfit.beta(0) / bfit.beta(1);
  });
  std::vector<double> ok;
  for (double d : draws)
    if (std::isfinite(d)) ok.push_back(d);
  est.bootstrap_used = ok.size();
  if (ok.size() * 2 < options.bootstrap_n) {
    est.flags.insert("bootstrap_unstable");
    return est;
  }
  est.balance_ci = std::pair{stats::quantile(ok, 0.025), stats::quantile(ok, 0.975)};
  return est;
}

EntropySplit entropy_split(const std::vector<CurvePoint>& points) {
  if (points.empty()) throw ContractViolation("entropy_split: no cases");
  std::vector<double> totals;
  totals.reserve(points.size());
  for (const auto& p : points) totals.push_back(p.total_entropy);
  std::sort(totals.begin(), totals.end());
  EntropySplit out;
  out.median_total = totals[(totals.size() - 1) / 2];
  for (const auto& p : points) (p.total_entropy <= out.median_total ? out.low : out.high).push_back(p);
  out.degenerate = out.high.empty();
  return out;
}

std::string_view to_string(RegionLabel r) noexcept {
  switch (r) {
    case RegionLabel::ambiguous:
      return "ambiguous";
    case RegionLabel::clear_text:
      return "clear_text";
    case RegionLabel::clear_vision:
      return "clear_vision";
  }
  return "ambiguous";
}

RegionLabel classify_region(double dh_rel, double balance, double radius) {
  if (!std::isfinite(dh_rel) || !std::isfinite(balance) || !(radius > 0.0))
    throw ContractViolation("classify_region: finite inputs and positive radius required");
  const double d = dh_rel - balance;
  if (d < -radius) return RegionLabel::clear_text;
  if (d > radius) return RegionLabel::clear_vision;
  return RegionLabel::ambiguous;
}

std::string curve_csv(const std::vector<CurveBin>& bins) {
  std::ostringstream out;
  out << "center,lo,hi,n,tfr\n";
  for (const auto& b : bins)
    out << format_double(b.center) << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.n
        << ',' << format_double(b.tfr) << '\n';
  return out.str();
}

nlohmann::json balance_json(const CurveEstimate& e) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json ci = e.balance_ci ? json::array({e.balance_ci->first, e.balance_ci->second}) : json(nullptr);
  return {
      {"beta0", num(e.beta0)},
      {"beta1", num(e.beta1)},
      {"beta1_stderr", num(e.beta1_stderr)},
      {"balance_point", opt(e.balance_point)},
      {"balance_ci", ci},
      {"interpolated_balance", opt(e.interpolated_balance)},
      {"monotonicity_score", num(e.monotonicity)},
      {"n_cases", e.n_cases},
      {"n_bins", e.bins.size()},
      {"bootstrap_used", e.bootstrap_used},
      {"flags", std::vector<std::string>(e.flags.begin(), e.flags.end())},
  };
}

}  // namespace modfollow
