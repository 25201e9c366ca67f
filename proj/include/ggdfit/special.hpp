#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace ggdfit {

struct domain_error : std::runtime_error {
  explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double lgamma_(double x) { return std::lgamma(x); }
inline double digamma_(double x) { return boost::math::digamma(x); }
inline double trigamma_(double x) { return boost::math::trigamma(x); }

// Regularized incomplete gamma P(a, x) and Q(a, x) with inverses.
inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }
inline double gamma_q(double a, double x) { return boost::math::gamma_q(a, x); }
inline double gamma_p_inv(double a, double p) { return boost::math::gamma_p_inv(a, p); }
inline double gamma_q_inv(double a, double q) { return boost::math::gamma_q_inv(a, q); }

inline double bessel_k1(double x) { return boost::math::cyl_bessel_k(1, x); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw domain_error("norm_quantile: p must be in (0,1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

inline double norm_logpdf(double z) {
  return -0.5 * z * z - 0.9189385332046727417803297;  // log sqrt(2 pi)
}

}  // namespace ggdfit
