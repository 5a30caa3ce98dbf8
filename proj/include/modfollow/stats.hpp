#pragma once

// Numeric kernels shared by the metrics, curve and mock modules. Everything
// here is templated on the scalar type and takes Eigen expressions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "modfollow/error.hpp"

namespace modfollow::stats {

/// -sum p ln p with 0 ln 0 := 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::ArrayBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar q = p(i);
    if (q > Scalar(0)) h -= q * std::log(q);
  }
  return h;
}

template <typename Scalar>
struct RelativeUncertainty {
  Scalar value = Scalar(0);
  bool degenerate = false;
};

/// 2 (h_text - h_vision) / (h_text + h_vision); both zero gives (0, degenerate).
template <typename Scalar>
RelativeUncertainty<Scalar> relative_uncertainty(Scalar h_text, Scalar h_vision) {
  if (!(h_text >= Scalar(0)) || !(h_vision >= Scalar(0)))
    throw ContractViolation("relative_uncertainty: entropies must be non-negative and finite");
  const Scalar total = h_text + h_vision;
  if (total == Scalar(0)) return {Scalar(0), true};
  return {Scalar(2) * (h_text - h_vision) / total, false};
}

/// 1-based ranks, ties receive the average rank.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(
    const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  Eigen::Array<Scalar, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[j + 1]) == x(order[i])) ++j;
    const Scalar r = Scalar(i + j) / Scalar(2) + Scalar(1);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = r;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of the average ranks. NaN when either side is constant.
template <typename DX, typename DY>
typename DX::Scalar spearman(const Eigen::ArrayBase<DX>& x, const Eigen::ArrayBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<Scalar>::quiet_NaN();
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  rx -= rx.mean();
  ry -= ry.mean();
  const Scalar denom = std::sqrt(rx.square().sum() * ry.square().sum());
  if (denom == Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
  return (rx * ry).sum() / denom;
}

template <typename Scalar>
Scalar logistic(Scalar eta) {
  if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-eta));
  const Scalar e = std::exp(eta);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
struct LogisticFit {
  Eigen::Matrix<Scalar, 2, 1> beta = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Eigen::Matrix<Scalar, 2, 2> covariance = Eigen::Matrix<Scalar, 2, 2>::Zero();
  Scalar log_likelihood = Scalar(0);
  int iterations = 0;
  bool converged = false;
};

/// Maximum-likelihood fit of P(y = 1 | x) = logistic(beta0 + beta1 x) by damped
/// Newton iterations. `y` holds 0/1. Non-convergence is reported, not thrown.
template <typename DX, typename DY>
LogisticFit<typename DX::Scalar> fit_logistic(
    const Eigen::ArrayBase<DX>& x, const Eigen::ArrayBase<DY>& y,
    Eigen::Matrix<typename DX::Scalar, 2, 1> start = Eigen::Matrix<typename DX::Scalar, 2, 1>::Zero(),
    int max_iterations = 100) {
  using Scalar = typename DX::Scalar;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

  struct State {
    Scalar ll;
    Vec2 grad;
    Mat2 info;
  };
  // Log-likelihood, score and Fisher information in a single pass.
  auto evaluate = [&](const Vec2& b) {
    State s{Scalar(0), Vec2::Zero(), Mat2::Zero()};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar xi = x(i);
      const Scalar eta = b(0) + b(1) * xi;
      const Scalar e = std::exp(-std::abs(eta));
      const Scalar p = eta >= Scalar(0) ? Scalar(1) / (Scalar(1) + e) : e / (Scalar(1) + e);
      s.ll += y(i) * eta - (std::max(eta, Scalar(0)) + std::log1p(e));
      const Scalar r = y(i) - p;
      const Scalar w = p * (Scalar(1) - p);
      s.grad(0) += r;
      s.grad(1) += r * xi;
      s.info(0, 0) += w;
      s.info(0, 1) += w * xi;
      s.info(1, 1) += w * xi * xi;
    }
    s.info(1, 0) = s.info(0, 1);
    return s;
  };

  LogisticFit<Scalar> fit;
  Vec2 beta = start;
  State cur = evaluate(beta);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::LDLT<Mat2> ldlt(cur.info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > Scalar(0)).all()) break;
    const Vec2 step = ldlt.solve(cur.grad);
    Scalar scale(1);
    Vec2 candidate = beta + step;
    State next = evaluate(candidate);
    while (next.ll < cur.ll - Scalar(1e-12) && scale > Scalar(1e-6)) {
      scale /= Scalar(2);
      candidate = beta + scale * step;
      next = evaluate(candidate);
    }
    beta = candidate;
    cur = next;
    fit.iterations = it + 1;
    if ((scale * step).cwiseAbs().maxCoeff() < Scalar(1e-9)) {
      fit.converged = true;
      break;
    }
  }
  fit.beta = beta;
  fit.log_likelihood = cur.ll;
  if (fit.converged) fit.covariance = cur.info.inverse();
  return fit;
}

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
template <typename Scalar>
Scalar quantile(std::vector<Scalar> values, Scalar q) {
  if (values.empty()) return std::numeric_limits<Scalar>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const Scalar pos = q * Scalar(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const Scalar frac = pos - Scalar(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace modfollow::stats
