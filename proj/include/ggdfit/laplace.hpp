#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "ggdfit/special.hpp"

namespace ggdfit {

// Data-side term of a joint objective in the latent vector u. Returns the
// value; when grad / hess are non-null the implementation ADDS its gradient
// and Hessian contributions (hess may be dense, e.g. for the epsilon-method
// functional).
using DataTerm =
    std::function<double(const Eigen::VectorXd& u, Eigen::VectorXd* grad, Eigen::MatrixXd* hess)>;

struct LaplaceResult {
  double value = 0.0;            // marginal negative log-likelihood
  Eigen::VectorXd u_hat;         // inner mode
  Eigen::MatrixXd hess_chol_L;   // lower Cholesky factor of the joint Hessian in u
  double joint_at_mode = 0.0;
  double inner_grad_norm = 0.0;
};

inline constexpr double kHalfLog2Pi = 0.9189385332046727417803297;

// Laplace approximation of -log integral exp(-joint(u)) du with a Gaussian
// prior N(0, Sigma) given as (precision, log det Sigma):
//   joint(u) = data(u) + u' P u / 2 + log|Sigma| / 2 + m log(2 pi) / 2
//   marginal = joint(u_hat) + log|H| / 2 - m log(2 pi) / 2.
// Newton with step halving; damped retries if the Hessian loses positive
// definiteness.
inline LaplaceResult laplace_marginal(const DataTerm& data, const Eigen::MatrixXd& precision,
                                      double logdet_sigma, Eigen::VectorXd u0,
                                      int max_iterations = 100, double grad_tol = 1e-8) {
  const Eigen::Index m = precision.rows();
  Eigen::VectorXd u = u0.size() == m ? std::move(u0) : Eigen::VectorXd::Zero(m).eval();

  const double prior_const = 0.5 * logdet_sigma + static_cast<double>(m) * kHalfLog2Pi;
  auto joint = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad,
                   Eigen::MatrixXd* hess) -> double {
    if (grad) grad->setZero(m);
    if (hess) *hess = precision;
    double val = data(v, grad, hess);
    if (grad) *grad += precision * v;
    return val + 0.5 * v.dot(precision * v) + prior_const;
  };

  Eigen::VectorXd grad(m);
  Eigen::MatrixXd hess(m, m);
  double jval = joint(u, &grad, &hess);
  if (!std::isfinite(jval)) {
    u.setZero();
    jval = joint(u, &grad, &hess);
    if (!std::isfinite(jval)) throw numerical_error("laplace: joint objective non-finite at u=0");
  }

  Eigen::LLT<Eigen::MatrixXd> llt;
  int it = 0;
  bool converged = false;
  for (; it < max_iterations; ++it) {
    llt.compute(hess);
    double damp = 1e-6;
    int retries = 0;
    while (llt.info() != Eigen::Success) {
      if (++retries > 5) throw numerical_error("laplace: inner Hessian not positive definite");
      Eigen::MatrixXd damped = hess;
      damped.diagonal().array() += damp;
      llt.compute(damped);
      damp *= 10.0;
    }
    const Eigen::VectorXd delta = llt.solve(grad);
    // Scale-aware stopping: absolute gradient for well-scaled problems,
    // Newton decrement when the prior precision is huge.
    const double hscale = std::max(1.0, hess.diagonal().maxCoeff());
    const double decrement = grad.dot(delta);
    if (grad.cwiseAbs().maxCoeff() < grad_tol * hscale ||
        decrement < 1e-14 * (1.0 + std::abs(jval))) {
      converged = true;
      break;
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd cand = u - step * delta;
      const double jc = joint(cand, nullptr, nullptr);
      if (std::isfinite(jc) && jc <= jval - 1e-12 * std::abs(jval)) {
        u = cand;
        jval = joint(u, &grad, &hess);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      // No downhill progress left; accept only if essentially converged.
      if (decrement < 1e-9 * (1.0 + std::abs(jval))) {
        converged = true;
        break;
      }
      throw numerical_error("laplace: inner optimization stalled with large gradient");
    }
  }
  if (!converged)
    throw numerical_error("laplace: inner Newton did not converge in 100 iterations");

  llt.compute(hess);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd damped = hess;
    damped.diagonal().array() += 1e-8;
    llt.compute(damped);
    if (llt.info() != Eigen::Success)
      throw numerical_error("laplace: Hessian factorization failed at the mode");
  }
  double half_logdet_h = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) half_logdet_h += std::log(llt.matrixL()(i, i));

  LaplaceResult res;
  res.u_hat = u;
  res.joint_at_mode = jval;
  res.hess_chol_L = llt.matrixL();
  res.inner_grad_norm = grad.cwiseAbs().maxCoeff();
  res.value = jval + half_logdet_h - static_cast<double>(m) * kHalfLog2Pi;
  return res;
}

}  // namespace ggdfit
