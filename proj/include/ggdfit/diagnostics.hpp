#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggdfit/fit.hpp"
#include "ggdfit/rng.hpp"

namespace ggdfit {

struct ResidualSet {
  std::vector<double> residuals;       // standard-normal scale
  std::vector<std::size_t> obs_index;  // rows of the original dataset
  bool positive_only = false;          // delta families: positive predictor only
  std::uint64_t seed = 0;              // stream used for the random-effect draw
};

// One draw from the approximate posterior MVN(u_hat, H^-1) of a spatial
// component, using the stored joint-precision Cholesky factor H = L L'.
inline Eigen::VectorXd sample_random_effects(Rng& rng, const ComponentFit& cf) {
  if (!cf.data.spatial) throw domain_error("sample_random_effects: component has no field");
  const Eigen::Index m = cf.u_hat.size();
  if (cf.hess_chol_L.rows() != m || m == 0)
    throw numerical_error("sample_random_effects: missing precision factor");
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
  // u = u_hat + L^-T z has covariance (L L')^-1.
  Eigen::VectorXd u = cf.hess_chol_L.transpose()
                          .triangularView<Eigen::Upper>()
                          .solve(z);
  return cf.u_hat + u;
}

// Randomized quantile residuals: u = F(y | theta_hat, one sampled
// random-effect draw) through the standard-normal quantile. Delta families
// use positive observations and the positive-component CDF only; Tweedie
// zeros are randomized uniformly on (0, F(0)).
inline ResidualSet rqr(Rng& rng, const FitResult& fit, const Dataset& data) {
  ResidualSet out;
  out.seed = rng.seed();
  const bool delta = fit.spec.is_delta();
  out.positive_only = delta;
  const auto& cf = fit.components[delta ? 1 : 0];
  const auto& c = cf.data;

  Eigen::VectorXd u_draw;
  if (c.spatial) u_draw = sample_random_effects(rng, cf);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!delta || data.y[i] > 0.0) rows.push_back(i);
  }
  if (rows.size() != c.n_obs())
    throw domain_error("rqr: fit and dataset shapes disagree");

  const double scale = fit.spec.response_scale;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    const int yi = c.year.empty() ? 0 : c.year[k];
    double eta = c.intercept_fixed ? c.fixed_intercept : cf.theta[yi];
    if (!c.offset.empty()) eta += c.offset[k];
    if (c.spatial) eta += u_draw[static_cast<Eigen::Index>(k)];
    const double y = data.y[i] * scale;
    double p;
    try {
      p = positive_cdf_eta(c.fam, y, eta, cf.dispersion());
      if (y == 0.0) p *= rng.uniform();  // Tweedie point mass at zero
    } catch (const std::exception& e) {
      throw numerical_error("rqr: CDF failed at observation " + std::to_string(i) + ": " +
                            e.what());
    }
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    out.residuals.push_back(norm_quantile(p));
    out.obs_index.push_back(i);
  }
  return out;
}

struct QQPair {
  double theoretical = 0.0;
  double empirical = 0.0;
};

// Ordered quantile pairs at plotting positions (i - 0.5) / n.
inline std::vector<QQPair> qq_data(const ResidualSet& rs) {
  const std::size_t n = rs.residuals.size();
  if (n < 2) throw domain_error("qq_data: need at least 2 residuals");
  std::vector<double> sorted = rs.residuals;
  std::sort(sorted.begin(), sorted.end());
  std::vector<QQPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].theoretical = norm_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    out[i].empirical = sorted[i];
  }
  return out;
}

}  // namespace ggdfit
