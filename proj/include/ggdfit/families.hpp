#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "ggdfit/gengamma.hpp"
#include "ggdfit/tweedie.hpp"

namespace ggdfit {

struct LognormalParams {
  double meanlog = 0.0;
  double sdlog = 1.0;
};

struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

struct BernoulliLogitParams {
  double prob = 0.5;
};

using FamilyParams =
    std::variant<GengammaParams, LognormalParams, GammaParams, TweedieParams, BernoulliLogitParams>;

inline double lognormal_logpdf(double y, double meanlog, double sdlog) {
  if (!(y > 0.0)) throw domain_error("lognormal: y must be > 0");
  const double z = (std::log(y) - meanlog) / sdlog;
  return -std::log(y * sdlog) - 0.5 * z * z - 0.9189385332046727417803297;
}

inline double lognormal_cdf(double y, double meanlog, double sdlog) {
  if (!(y > 0.0)) throw domain_error("lognormal: y must be > 0");
  return norm_cdf((std::log(y) - meanlog) / sdlog);
}

inline double lognormal_quantile(double p, double meanlog, double sdlog) {
  return std::exp(meanlog + sdlog * norm_quantile(p));
}

inline double gamma_logpdf(double y, double shape, double scale) {
  if (!(y > 0.0)) throw domain_error("gamma: y must be > 0");
  return (shape - 1.0) * std::log(y) - y / scale - lgamma_(shape) - shape * std::log(scale);
}

inline double gamma_cdf(double y, double shape, double scale) {
  if (!(y > 0.0)) throw domain_error("gamma: y must be > 0");
  return gamma_p(shape, y / scale);
}

inline double gamma_quantile(double p, double shape, double scale) {
  return gamma_p_inv(shape, p) * scale;
}

inline double bernoulli_logpmf(bool z, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw domain_error("bernoulli: prob must be in (0,1)");
  return z ? std::log(prob) : std::log1p(-prob);
}

// Dispatch over the concrete parameter sets. y >= 0 is allowed only for
// Tweedie; the continuous families require y > 0.
inline double family_logpdf(const FamilyParams& params, double y) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GengammaParams>) {
          const auto loc = gg_location_from_eta(std::log(p.mean), p.sigma, p.q);
          return gg_logpdf(y, loc, p.sigma, p.q);
        } else if constexpr (std::is_same_v<P, LognormalParams>) {
          return lognormal_logpdf(y, p.meanlog, p.sdlog);
        } else if constexpr (std::is_same_v<P, GammaParams>) {
          return gamma_logpdf(y, p.shape, p.scale);
        } else if constexpr (std::is_same_v<P, TweedieParams>) {
          return tweedie_logpdf(y, p);
        } else {
          return bernoulli_logpmf(y > 0.0, p.prob);
        }
      },
      params);
}

// Observation families offered for fitting.
enum class Family { gengamma, lognormal, gamma, tweedie };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gengamma: return "gengamma";
    case Family::lognormal: return "lognormal";
    case Family::gamma: return "gamma";
    case Family::tweedie: return "tweedie";
  }
  return "?";
}

inline Family family_from_name(const std::string& s) {
  if (s == "gengamma" || s == "gg") return Family::gengamma;
  if (s == "lognormal") return Family::lognormal;
  if (s == "gamma") return Family::gamma;
  if (s == "tweedie") return Family::tweedie;
  throw domain_error("unknown family: " + s);
}

inline double invlogit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Mean-parameterized positive-part log densities: eta is the log of the
// distribution mean, disp the family dispersion parameters on unconstrained
// scale. Scalar-templated so the same code yields analytic derivatives.
//   lognormal: disp = {log sdlog}
//   gamma:     disp = {log cv}
//   gengamma:  disp = {log sigma, q}
//   tweedie:   disp = {log phi, t} with power = 1 + invlogit(t)
template <typename T>
T positive_logpdf_eta(Family fam, double y, T eta, const T* disp) {
  using std::exp;
  using std::lgamma;
  using std::log;
  switch (fam) {
    case Family::lognormal: {
      const T sdlog = exp(disp[0]);
      const T meanlog = eta - T(0.5) * sdlog * sdlog;
      const T z = (T(std::log(y)) - meanlog) / sdlog;
      return -T(std::log(y)) - disp[0] - T(0.5) * z * z - T(0.9189385332046727417803297);
    }
    case Family::gamma: {
      const T cv = exp(disp[0]);
      const T shape = T(1.0) / (cv * cv);
      const T log_scale = eta - log(shape);
      return (shape - T(1.0)) * T(std::log(y)) - T(y) * exp(-log_scale) - lgamma(shape) -
             shape * log_scale;
    }
    case Family::gengamma: {
      const T sigma = exp(disp[0]);
      const T q = disp[1];
      const T mu = gg_mu_from_eta(eta, sigma, q);
      return gg_logpdf(y, mu, sigma, q);
    }
    case Family::tweedie: {
      const T phi = exp(disp[0]);
      const T power = T(1.0) + T(1.0) / (T(1.0) + exp(-disp[1]));
      return tweedie_logpdf_t(y, exp(eta), power, phi);
    }
  }
  throw domain_error("positive_logpdf_eta: bad family");
}

// Number of dispersion parameters per family.
inline int n_dispersion(Family f) {
  return (f == Family::gengamma || f == Family::tweedie) ? 2 : 1;
}

// CDF of the mean-parameterized positive part (used for quantile residuals).
inline double positive_cdf_eta(Family fam, double y, double eta, const double* disp) {
  switch (fam) {
    case Family::lognormal: {
      const double sdlog = std::exp(disp[0]);
      return lognormal_cdf(y, eta - 0.5 * sdlog * sdlog, sdlog);
    }
    case Family::gamma: {
      const double cv = std::exp(disp[0]);
      const double shape = 1.0 / (cv * cv);
      return gamma_cdf(y, shape, std::exp(eta) / shape);
    }
    case Family::gengamma: {
      const double sigma = std::exp(disp[0]);
      const double q = disp[1];
      return gg_cdf(y, gg_mu_from_eta(eta, sigma, q), sigma, q);
    }
    case Family::tweedie: {
      TweedieParams p{std::exp(eta), 1.0 + invlogit(disp[1]), std::exp(disp[0])};
      return tweedie_cdf(y, p);
    }
  }
  throw domain_error("positive_cdf_eta: bad family");
}

}  // namespace ggdfit
