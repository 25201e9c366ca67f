#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ggdfit/rng.hpp"
#include "ggdfit/special.hpp"

namespace ggdfit {

struct MaternParams {
  double range = 0.5;        // distance at which correlation decays to ~0.13
  double marginal_sd = 1.0;
};

enum class PointRole { observation, prediction };

struct PointSet {
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;  // positions in [0,1]^2
  std::vector<PointRole> roles;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
};

struct FieldRealization {
  Eigen::VectorXd values;  // log-scale deviations, one per point
};

// Matern smoothness nu = 1: corr(h) = kappa h K1(kappa h), kappa = sqrt(8)/range.
inline double matern_corr(double distance, double range) {
  if (!(range > 0.0)) throw domain_error("matern: range must be > 0");
  if (distance < 0.0) throw domain_error("matern: distance must be >= 0");
  const double x = std::sqrt(8.0) * distance / range;
  if (x < 1e-12) return 1.0;
  if (x > 700.0) return 0.0;
  return x * bessel_k1(x);
}

inline constexpr std::size_t kDenseLimit = 4000;

namespace matern_detail {
// Exact duplicates make the covariance singular; nudge them apart.
inline Eigen::Matrix<double, Eigen::Dynamic, 2> deduplicate(
    Eigen::Matrix<double, Eigen::Dynamic, 2> c) {
  const auto n = c.rows();
  std::uint64_t salt = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(c(i, 0) - c(j, 0)) < 1e-12 && std::abs(c(i, 1) - c(j, 1)) < 1e-12) {
        c(i, 0) += 1e-9 * (static_cast<double>(splitmix64(++salt) >> 11) * 0x1.0p-53 - 0.5);
        c(i, 1) += 1e-9 * (static_cast<double>(splitmix64(++salt) >> 11) * 0x1.0p-53 - 0.5);
        j = -1;  // recheck against all earlier points
      }
    }
  }
  return c;
}
}  // namespace matern_detail

inline Eigen::MatrixXd build_covariance(const PointSet& points, const MaternParams& params) {
  if (!(params.marginal_sd > 0.0)) throw domain_error("matern: marginal_sd must be > 0");
  const std::size_t n = points.size();
  if (n > kDenseLimit) throw domain_error("matern: point count exceeds dense limit");
  const auto coords = matern_detail::deduplicate(points.coords);
  const double v = params.marginal_sd * params.marginal_sd;
  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    cov(i, i) = v;
    for (std::size_t j = 0; j < i; ++j) {
      const double dx = coords(i, 0) - coords(j, 0);
      const double dy = coords(i, 1) - coords(j, 1);
      const double c = v * matern_corr(std::sqrt(dx * dx + dy * dy), params.range);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

// Cholesky with an escalating diagonal jitter: 1e-10 v up to 1e-6 v.
inline Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(const Eigen::MatrixXd& cov,
                                                    double marginal_var) {
  for (double jitter = 1e-10; jitter <= 1.1e-6; jitter *= 10.0) {
    Eigen::MatrixXd m = cov;
    m.diagonal().array() += jitter * marginal_var;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw numerical_error("matern: covariance factorization failed after maximum jitter");
}

inline FieldRealization sample_field(Rng& rng, const PointSet& points,
                                     const MaternParams& params) {
  const auto cov = build_covariance(points, params);
  const auto llt = chol_with_jitter(cov, params.marginal_sd * params.marginal_sd);
  Eigen::VectorXd z(points.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return {llt.matrixL() * z};
}

}  // namespace ggdfit
