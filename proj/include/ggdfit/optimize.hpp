#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "ggdfit/special.hpp"

namespace ggdfit {

struct OptimResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central finite-difference gradient; evaluations that throw count as +inf.
inline Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                   double rel_step = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                  double rel_step = 1e-4) {
  const Eigen::Index p = x.size();
  Eigen::MatrixXd h(p, p);
  const double f0 = f(x);
  Eigen::VectorXd step(p);
  for (Eigen::Index i = 0; i < p; ++i) step[i] = rel_step * std::max(1.0, std::abs(x[i]));
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < p; ++i) {
    xp[i] = x[i] + step[i];
    const double fp = f(xp);
    xp[i] = x[i] - step[i];
    const double fm = f(xp);
    xp[i] = x[i];
    h(i, i) = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      xp[i] = x[i] + step[i];
      xp[j] = x[j] + step[j];
      const double fpp = f(xp);
      xp[j] = x[j] - step[j];
      const double fpm = f(xp);
      xp[i] = x[i] - step[i];
      const double fmm = f(xp);
      xp[j] = x[j] + step[j];
      const double fmp = f(xp);
      xp[i] = x[i];
      xp[j] = x[j];
      h(i, j) = h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
    }
  }
  return h;
}

// BFGS with backtracking Armijo line search. The objective may return +inf
// (or throw) outside its domain; the line search backs off.
inline OptimResult minimize_bfgs(const ObjectiveFn& f_raw, const GradientFn& g,
                                 Eigen::VectorXd x0, double grad_tol = 1e-6,
                                 int max_iterations = 300) {
  auto f = [&](const Eigen::VectorXd& x) -> double {
    try {
      const double v = f_raw(x);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::Index p = x0.size();
  OptimResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  if (!std::isfinite(res.f)) throw numerical_error("minimize_bfgs: infeasible starting point");
  res.grad = g(res.x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);

  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    if (res.grad.cwiseAbs().maxCoeff() < grad_tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -hinv * res.grad;
    double slope = res.grad.dot(dir);
    if (!(slope < 0.0)) {  // reset on loss of descent
      hinv.setIdentity();
      dir = -res.grad;
      slope = res.grad.dot(dir);
    }
    // Guard against absurd first steps.
    const double dir_norm = dir.norm();
    if (dir_norm > 10.0) dir *= 10.0 / dir_norm;
    slope = res.grad.dot(dir);

    double step = 1.0;
    double fnew = std::numeric_limits<double>::infinity();
    Eigen::VectorXd xnew;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      xnew = res.x + step * dir;
      fnew = f(xnew);
      if (fnew <= res.f + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      // No progress possible along this direction.
      res.converged = res.grad.cwiseAbs().maxCoeff() < 100.0 * grad_tol;
      return res;
    }
    const Eigen::VectorXd gnew = g(xnew);
    const Eigen::VectorXd s = xnew - res.x;
    const Eigen::VectorXd yv = gnew - res.grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const Eigen::VectorXd hy = hinv * yv;
      const double yhy = yv.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    const double fprev = res.f;
    res.x = std::move(xnew);
    res.f = fnew;
    res.grad = gnew;
    if (std::abs(fprev - fnew) < 1e-12 * (1.0 + std::abs(fnew)) &&
        res.grad.cwiseAbs().maxCoeff() < 1e-3) {
      res.converged = true;
      return res;
    }
  }
  res.converged = res.grad.cwiseAbs().maxCoeff() < grad_tol;
  return res;
}

}  // namespace ggdfit
