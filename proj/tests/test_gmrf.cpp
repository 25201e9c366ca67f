#include "doctest.h"

#include <cmath>

#include "ggdfit/matern.hpp"

using namespace ggdfit;

namespace {
PointSet random_points(Rng& rng, std::size_t n) {
  PointSet ps;
  ps.coords.resize(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    ps.coords(i, 0) = rng.uniform();
    ps.coords(i, 1) = rng.uniform();
  }
  ps.roles.assign(n, PointRole::observation);
  return ps;
}
}  // namespace

TEST_CASE("matern correlation: unit at zero, ~0.13 at range, decreasing") {
  CHECK(matern_corr(0.0, 0.5) == doctest::Approx(1.0));
  const double at_range = matern_corr(0.5, 0.5);
  CHECK(at_range > 0.12);
  CHECK(at_range < 0.15);
  CHECK(matern_corr(1.0, 0.5) < at_range);
  double prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double c = matern_corr(0.04 * i, 0.5);
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("build_covariance basic structure") {
  {
    PointSet one;
    one.coords.resize(1, 2);
    one.coords << 0.5, 0.5;
    one.roles = {PointRole::observation};
    const auto cov = build_covariance(one, {0.5, 2.0});
    CHECK(cov.rows() == 1);
    CHECK(cov(0, 0) == doctest::Approx(4.0));
  }
  {
    // duplicated coordinates get perturbed; correlation stays ~1
    PointSet two;
    two.coords.resize(2, 2);
    two.coords << 0.3, 0.3, 0.3, 0.3;
    two.roles = {PointRole::observation, PointRole::observation};
    const auto cov = build_covariance(two, {0.5, 1.5});
    CHECK(cov(0, 1) == doctest::Approx(2.25).epsilon(1e-6));
  }
  {
    Rng rng(17);
    auto ps = random_points(rng, 100);
    const auto cov = build_covariance(ps, {0.5, 1.0});
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto llt = chol_with_jitter(cov, 1.0);
    const Eigen::MatrixXd l = llt.matrixL();
    CHECK((l * l.transpose() - cov).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sample_field: degenerate sd, Monte Carlo covariance, determinism") {
  Rng rng(23);
  auto ps = random_points(rng, 25);

  {
    Rng r(3);
    auto f = sample_field(r, ps, {0.5, 1e-8});
    CHECK(f.values.cwiseAbs().maxCoeff() < 1e-6);
  }

  {
    const MaternParams mp{0.5, 1.0};
    const auto cov = build_covariance(ps, mp);
    const int reps = 2000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(25, 25);
    Rng master(99);
    for (int r = 0; r < reps; ++r) {
      auto stream = master.stream(static_cast<std::uint64_t>(r));
      auto f = sample_field(stream, ps, mp);
      acc += f.values * f.values.transpose();
    }
    acc /= static_cast<double>(reps);
    // elementwise 3-sigma Monte Carlo bound: sd of a covariance entry is
    // roughly sqrt((c_ii c_jj + c_ij^2)/reps)
    for (int i = 0; i < 25; ++i) {
      for (int j = 0; j < 25; ++j) {
        const double se =
            std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / reps);
        CHECK(std::abs(acc(i, j) - cov(i, j)) < 3.5 * se + 0.01);
      }
    }
    // empirical marginal variance near marginal_sd^2 (10%)
    CHECK(acc.diagonal().mean() == doctest::Approx(1.0).epsilon(0.1));
  }

  {
    Rng a(55), b(55);
    auto fa = sample_field(a, ps, {0.5, 1.0});
    auto fb = sample_field(b, ps, {0.5, 1.0});
    CHECK(fa.values == fb.values);
  }
}

TEST_CASE("field continuity: close points give close values") {
  PointSet ps;
  ps.coords.resize(3, 2);
  ps.coords << 0.5, 0.5, 0.500001, 0.5, 0.9, 0.1;
  ps.roles.assign(3, PointRole::observation);
  Rng rng(77);
  auto f = sample_field(rng, ps, {0.5, 1.0});
  CHECK(std::abs(f.values(0) - f.values(1)) < 0.01);
}

TEST_CASE("point order permutes field values given matched draws") {
  Rng rng(31);
  auto ps = random_points(rng, 6);
  PointSet swapped = ps;
  swapped.coords.row(0).swap(swapped.coords.row(1));
  // Same underlying draws applied to the permuted covariance square root
  // should produce the same field at the same physical location up to the
  // factor ordering; check the weaker exchangeability property: the joint
  // covariance of permuted points equals the permuted covariance.
  const auto cov = build_covariance(ps, {0.5, 1.0});
  const auto cov2 = build_covariance(swapped, {0.5, 1.0});
  CHECK(cov(0, 1) == doctest::Approx(cov2(1, 0)));
  CHECK(cov(0, 5) == doctest::Approx(cov2(1, 5)));
  CHECK(cov(1, 3) == doctest::Approx(cov2(0, 3)));
}

TEST_CASE("dense limit enforced") {
  PointSet ps;
  ps.coords.resize(kDenseLimit + 1, 2);
  ps.coords.setZero();
  ps.roles.assign(kDenseLimit + 1, PointRole::observation);
  CHECK_THROWS_AS(build_covariance(ps, {0.5, 1.0}), domain_error);
}
