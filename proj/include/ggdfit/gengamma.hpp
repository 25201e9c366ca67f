#pragma once

#include <algorithm>
#include <cmath>

#include <boost/math/tools/toms748_solve.hpp>

#include "ggdfit/dual.hpp"
#include "ggdfit/rng.hpp"
#include "ggdfit/special.hpp"

namespace ggdfit {

// Below this |Q| all generalized-gamma functions route to the lognormal
// limit; the Gamma-function ratios lose precision as Q -> 0.
inline constexpr double kLognormalSwitch = 1e-4;

struct GengammaLocation {
  double mu = 0.0;
};

struct GengammaParams {
  double mean = 1.0;   // response units
  double sigma = 1.0;  // scale
  double q = 1.0;      // shape; q -> 0 is lognormal, q = sigma is gamma
};

namespace detail {
inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw domain_error(std::string("gengamma: non-finite ") + what);
}
}  // namespace detail

// Converts the log-mean linear predictor eta into the Prentice location mu,
// so that the distribution with location mu has mean exp(eta).
template <typename T>
T gg_mu_from_eta(T eta, T sigma, T q) {
  using std::fabs;
  using std::lgamma;
  using std::log;
  if (fabs(q) < kLognormalSwitch) {
    return eta - sigma * sigma * T(0.5);
  }
  const T k = T(1.0) / (q * q);
  const T inv_beta = sigma / q;  // 1 / beta
  const T arg = k + inv_beta;
  if (value_of(arg) <= 0.0)
    throw domain_error("gengamma: mean undefined (k + sigma/q <= 0); sigma too large for this q");
  const T mu = eta - (lgamma(arg) - lgamma(k)) + log(k) * inv_beta;
  detail::require_finite(value_of(mu), "location from eta (sigma/q overflow in logGamma)");
  return mu;
}

inline GengammaLocation gg_location_from_eta(double eta, double sigma, double q) {
  if (!(sigma > 0.0)) throw domain_error("gengamma: sigma must be > 0");
  return {gg_mu_from_eta(eta, sigma, q)};
}

// Prentice-form log density; w = (log y - mu) / sigma.
template <typename T>
T gg_logpdf(double y, T mu, T sigma, T q) {
  using std::exp;
  using std::fabs;
  using std::lgamma;
  using std::log;
  if (!(y > 0.0)) throw domain_error("gengamma: y must be > 0");
  const T logy = T(std::log(y));
  if (fabs(q) < kLognormalSwitch) {
    const T z = (logy - mu) / sigma;
    return -logy - log(sigma) - T(0.5) * z * z - T(0.9189385332046727417803297);
  }
  const T k = T(1.0) / (q * q);
  const T w = (logy - mu) / sigma;
  const T qw = q * w;
  return -log(sigma) - logy + log(fabs(q)) + k * log(k) - lgamma(k) + k * (qw - exp(qw));
}

inline double gg_logpdf(double y, GengammaLocation loc, double sigma, double q) {
  return gg_logpdf<double>(y, loc.mu, sigma, q);
}

inline double gg_cdf(double y, double mu, double sigma, double q) {
  if (!(y > 0.0)) throw domain_error("gengamma: y must be > 0");
  if (std::fabs(q) < kLognormalSwitch) return norm_cdf((std::log(y) - mu) / sigma);
  const double k = 1.0 / (q * q);
  const double u = k * std::exp(q * (std::log(y) - mu) / sigma);
  return q > 0.0 ? gamma_p(k, u) : gamma_q(k, u);
}

inline double gg_cdf(double y, GengammaLocation loc, double sigma, double q) {
  return gg_cdf(y, loc.mu, sigma, q);
}

inline double gg_quantile(double p, double mu, double sigma, double q) {
  if (!(p > 0.0 && p < 1.0)) throw domain_error("gengamma: p must be in (0,1)");
  if (std::fabs(q) < kLognormalSwitch) return std::exp(mu + sigma * norm_quantile(p));
  const double k = 1.0 / (q * q);
  const double u = q > 0.0 ? gamma_p_inv(k, p) : gamma_q_inv(k, p);
  return std::exp(mu + sigma * std::log(u / k) / q);
}

inline double gg_quantile(double p, GengammaLocation loc, double sigma, double q) {
  return gg_quantile(p, loc.mu, sigma, q);
}

inline double gg_sample_one(Rng& rng, double mu, double sigma, double q) {
  if (std::fabs(q) < kLognormalSwitch) return std::exp(rng.normal(mu, sigma));
  const double k = 1.0 / (q * q);
  const double g = rng.gamma(k, 1.0);
  return std::exp(mu + sigma * std::log(q * q * g) / q);
}

inline std::vector<double> gg_sample(Rng& rng, GengammaLocation loc, double sigma, double q,
                                     std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = gg_sample_one(rng, loc.mu, sigma, q);
  return out;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double cv = 0.0;
};

// log E[y^m] = m mu + lgamma(k + m/beta) - lgamma(k) - m log(k)/beta.
inline double gg_log_raw_moment(double mu, double sigma, double q, int m) {
  const double k = 1.0 / (q * q);
  const double inv_beta = sigma / q;
  const double arg = k + m * inv_beta;
  if (arg <= 0.0)
    throw domain_error("gengamma: raw moment undefined (k + m sigma/q <= 0)");
  const double v = m * mu + lgamma_(arg) - lgamma_(k) - m * std::log(k) * inv_beta;
  detail::require_finite(v, "moment (logGamma overflow for sigma/q)");
  return v;
}

inline Moments gg_moments(double mu, double sigma, double q) {
  if (!(sigma > 0.0)) throw domain_error("gengamma: sigma must be > 0");
  if (std::fabs(q) < kLognormalSwitch) {
    const double s2 = sigma * sigma;
    const double mean = std::exp(mu + 0.5 * s2);
    const double variance = (std::expm1(s2)) * std::exp(2.0 * mu + s2);
    return {mean, variance, std::sqrt(std::expm1(s2))};
  }
  const double lm1 = gg_log_raw_moment(mu, sigma, q, 1);
  const double lm2 = gg_log_raw_moment(mu, sigma, q, 2);
  // var = m2 - m1^2 = m1^2 (exp(lm2 - 2 lm1) - 1)
  const double ratio = std::expm1(lm2 - 2.0 * lm1);
  if (!(ratio > 0.0)) throw domain_error("gengamma: variance underflow");
  const double mean = std::exp(lm1);
  return {mean, ratio * std::exp(2.0 * lm1), std::sqrt(ratio)};
}

inline Moments gg_moments(GengammaLocation loc, double sigma, double q) {
  return gg_moments(loc.mu, sigma, q);
}

// CV as a function of sigma at fixed q; independent of mu.
inline double gg_cv(double sigma, double q) {
  return gg_moments(0.0, sigma, q).cv;
}

// Finds sigma such that the generalized-gamma CV equals cv_target.
inline double solve_sigma_for_cv(double q, double cv_target) {
  if (!(cv_target > 0.0)) throw domain_error("solve_sigma_for_cv: cv_target must be > 0");
  if (std::fabs(q) < kLognormalSwitch)
    return std::sqrt(std::log1p(cv_target * cv_target));
  double hi = 20.0;
  // Second moment requires k + 2 sigma / q > 0, so sigma < -1/(2q) for q < 0.
  if (q < 0.0) hi = std::min(hi, -1.0 / (2.0 * q) * (1.0 - 1e-9));
  const double lo = 1e-6;
  auto f = [&](double s) { return gg_cv(s, q) - cv_target; };
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0)
    throw domain_error("solve_sigma_for_cv: target CV not bracketable in [1e-6, 20]");
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace ggdfit
