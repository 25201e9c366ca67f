#pragma once

#include <cmath>
#include <cstddef>

#include "ggdfit/dual.hpp"
#include "ggdfit/rng.hpp"
#include "ggdfit/special.hpp"

namespace ggdfit {

struct TweedieParams {
  double mu = 1.0;     // mean, > 0
  double power = 1.5;  // p in (1, 2)
  double phi = 1.0;    // dispersion, > 0
};

inline void tweedie_check(const TweedieParams& p) {
  if (!(p.mu > 0.0)) throw domain_error("tweedie: mu must be > 0");
  if (!(p.power > 1.0 && p.power < 2.0)) throw domain_error("tweedie: power must be in (1,2)");
  if (!(p.phi > 0.0)) throw domain_error("tweedie: phi must be > 0");
}

// Compound Poisson-gamma: N ~ Poisson(lambda), y | N ~ Gamma(N alpha, theta).
// lambda = mu^(2-p) / (phi (2-p)), alpha = (2-p)/(p-1), theta = phi (p-1) mu^(p-1).

namespace tweedie_detail {
inline constexpr std::size_t kMaxTerms = 100000;
inline constexpr double kRelTol = 1e-12;
}  // namespace tweedie_detail

// pow with general exponent for the dual types (both arguments vary).
inline double pow_t(double a, double b) { return std::pow(a, b); }
inline Dual pow_t(Dual a, Dual b) { return exp(b * log(a)); }
inline Dual2 pow_t(Dual2 a, Dual2 b) { return exp(b * log(a)); }

// Series log-density, summed outward from the dominant term index.
template <typename T>
T tweedie_logpdf_t(double y, T mu, T power, T phi) {
  using std::exp;
  using std::lgamma;
  using std::log;
  if (!(y >= 0.0)) throw domain_error("tweedie: y must be >= 0");
  const T p1 = power - T(1.0);
  const T p2 = T(2.0) - power;
  const T lambda = pow_t(mu, p2) / (phi * p2);
  if (y == 0.0) return -lambda;

  const T alpha = p2 / p1;
  const T theta = phi * p1 * pow_t(mu, p1);
  const T log_lambda = log(lambda);
  const T log_theta = log(theta);
  const double logy = std::log(y);

  auto log_term = [&](double j) -> T {
    const T ja = T(j) * alpha;
    return -lambda + T(j) * log_lambda - T(std::lgamma(j + 1.0)) + (ja - T(1.0)) * T(logy) -
           ja * log_theta - lgamma(ja) - T(y) / theta;
  };

  // Dominant index of the series.
  const double j_center = std::max(1.0, std::round(std::pow(y, value_of(p2)) /
                                                   (value_of(phi) * value_of(p2))));
  const T t0 = log_term(j_center);
  const double v0 = value_of(t0);
  T sum = exp(t0 - T(v0));

  std::size_t used = 1;
  for (double j = j_center + 1.0;; ++j) {
    const T t = log_term(j);
    sum += exp(t - T(v0));
    if (++used > tweedie_detail::kMaxTerms)
      throw numerical_error("tweedie: series did not converge (upward) at y=" + std::to_string(y));
    if (std::exp(value_of(t) - v0) < tweedie_detail::kRelTol * value_of(sum)) break;
  }
  for (double j = j_center - 1.0; j >= 1.0; --j) {
    const T t = log_term(j);
    sum += exp(t - T(v0));
    if (++used > tweedie_detail::kMaxTerms)
      throw numerical_error("tweedie: series did not converge (downward) at y=" + std::to_string(y));
    if (std::exp(value_of(t) - v0) < tweedie_detail::kRelTol * value_of(sum)) break;
  }
  return T(v0) + log(sum);
}

inline double tweedie_logpdf(double y, const TweedieParams& p) {
  tweedie_check(p);
  return tweedie_logpdf_t<double>(y, p.mu, p.power, p.phi);
}

inline double tweedie_cdf(double y, const TweedieParams& p) {
  tweedie_check(p);
  if (!(y >= 0.0)) throw domain_error("tweedie: y must be >= 0");
  const double p1 = p.power - 1.0;
  const double p2 = 2.0 - p.power;
  const double lambda = std::pow(p.mu, p2) / (p.phi * p2);
  const double alpha = p2 / p1;
  const double theta = p.phi * p1 * std::pow(p.mu, p1);
  double cdf = std::exp(-lambda);
  if (y == 0.0) return cdf;
  // Sum Poisson weights outward from the mode.
  const double j_mode = std::max(1.0, std::floor(lambda));
  auto log_pois = [&](double j) {
    return -lambda + j * std::log(lambda) - std::lgamma(j + 1.0);
  };
  double tail = 0.0;
  std::size_t used = 0;
  for (double j = j_mode; j >= 1.0; --j) {
    const double w = std::exp(log_pois(j));
    tail += w * gamma_p(j * alpha, y / theta);
    if (w < 1e-17 && j < j_mode) break;
    if (++used > tweedie_detail::kMaxTerms)
      throw numerical_error("tweedie_cdf: series did not converge");
  }
  for (double j = j_mode + 1.0;; ++j) {
    const double w = std::exp(log_pois(j));
    if (w < 1e-17) break;
    tail += w * gamma_p(j * alpha, y / theta);
    if (++used > tweedie_detail::kMaxTerms)
      throw numerical_error("tweedie_cdf: series did not converge");
  }
  return std::min(1.0, cdf + tail);
}

inline double tweedie_sample_one(Rng& rng, const TweedieParams& p) {
  tweedie_check(p);
  const double p1 = p.power - 1.0;
  const double p2 = 2.0 - p.power;
  const double lambda = std::pow(p.mu, p2) / (p.phi * p2);
  const double alpha = p2 / p1;
  const double theta = p.phi * p1 * std::pow(p.mu, p1);
  const auto n = rng.poisson(lambda);
  if (n == 0) return 0.0;
  return rng.gamma(static_cast<double>(n) * alpha, theta);
}

}  // namespace ggdfit
