#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace pfmlab::stats {

struct summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 when n < 2
};

inline summary summarize(std::span<const double> xs) {
  summary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(s.n - 1);
  }
  return s;
}

struct test_result {
  double effect = 0.0;     // mean(a) - mean(b)
  double statistic = 0.0;
  double p_value = 1.0;    // two-sided
};

/// Welch's unequal-variance t-test. Degenerate zero-variance samples give
/// p = 1 when the means agree and p = 0 when they differ.
inline test_result welch_t_test(std::span<const double> a, std::span<const double> b) {
  const summary sa = summarize(a);
  const summary sb = summarize(b);
  test_result r;
  r.effect = sa.mean - sb.mean;
  if (sa.n < 2 || sb.n < 2) return r;
  const double va = sa.variance / static_cast<double>(sa.n);
  const double vb = sb.variance / static_cast<double>(sb.n);
  const double se2 = va + vb;
  if (!(se2 > 0.0)) {
    r.p_value = r.effect == 0.0 ? 1.0 : 0.0;
    r.statistic = r.effect == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.effect);
    return r;
  }
  r.statistic = r.effect / std::sqrt(se2);
  const double df = se2 * se2 /
                    (va * va / static_cast<double>(sa.n - 1) + vb * vb / static_cast<double>(sb.n - 1));
  boost::math::students_t dist(df);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic))), 0.0, 1.0);
  return r;
}

/// Pooled two-proportion z-test on 0/1 samples.
inline test_result two_proportion_z_test(std::span<const double> a, std::span<const double> b) {
  test_result r;
  if (a.empty() || b.empty()) return r;
  double xa = 0.0, xb = 0.0;
  for (double x : a) xa += x;
  for (double x : b) xb += x;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pa = xa / na;
  const double pb = xb / nb;
  r.effect = pa - pb;
  const double pooled = (xa + xb) / (na + nb);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
  if (!(se > 0.0)) {
    r.p_value = r.effect == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = r.effect / se;
  boost::math::normal_distribution<double> dist;
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic))), 0.0, 1.0);
  return r;
}

/// Upper-tail chi-square probability, used by the generator's goodness-of-fit tests.
inline double chi_square_sf(double statistic, double dof) {
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

// Weighted Stouffer combination of two-sided p-values. Each p is turned into
// a signed z using the sign of its effect; weights are typically sqrt(n).
// Returns the two-sided p of the combined z.
inline test_result stouffer(std::span<const double> p_values, std::span<const double> effects,
                            std::span<const double> weights) {
  const boost::math::normal_distribution<double> n01;
  double num = 0.0, den = 0.0, eff = 0.0;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    const double p = std::clamp(p_values[i], 1e-300, 1.0);
    double z = p >= 1.0 ? 0.0 : boost::math::quantile(boost::math::complement(n01, p / 2.0));
    if (effects[i] < 0) z = -z;
    num += weights[i] * z;
    den += weights[i] * weights[i];
    eff += weights[i] * effects[i];
  }
  test_result r;
  if (den <= 0.0) return r;
  r.statistic = num / std::sqrt(den);
  r.effect = eff / std::accumulate(weights.begin(), weights.end(), 0.0);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(n01, std::abs(r.statistic)));
  return r;
}

}  // namespace pfmlab::stats
