#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ggdfit/data.hpp"
#include "ggdfit/laplace.hpp"
#include "ggdfit/likelihood.hpp"
#include "ggdfit/matern.hpp"
#include "ggdfit/optimize.hpp"

namespace ggdfit {

// Correlation structure of a spatial component at a given range, cached so
// that outer-optimizer steps that leave the range untouched reuse it.
struct SpatialCache {
  double log_range = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd c_inv;
  double logdet_c = 0.0;
  Eigen::VectorXd u_warm;

  void refresh(const Eigen::Matrix<double, Eigen::Dynamic, 2>& coords, double new_log_range) {
    if (new_log_range == log_range) return;
    PointSet ps{coords, {}};
    const auto corr = build_covariance(ps, {std::exp(new_log_range), 1.0});
    const auto llt = chol_with_jitter(corr, 1.0);
    logdet_c = 0.0;
    for (Eigen::Index i = 0; i < corr.rows(); ++i)
      logdet_c += 2.0 * std::log(llt.matrixL()(i, i));
    c_inv = llt.solve(Eigen::MatrixXd::Identity(corr.rows(), corr.cols()));
    log_range = new_log_range;
  }
};

// Data term of the joint objective for a spatial component: eta_i adds u_i.
inline DataTerm make_component_data_term(const ComponentData& c, const Eigen::VectorXd& theta) {
  const int ni = c.n_free_intercepts();
  const int nd = c.n_disp();
  std::vector<Dual2> disp(nd);
  for (int j = 0; j < nd; ++j) disp[j] = Dual2{theta[ni + j]};
  std::vector<double> eta_fixed(c.n_obs());
  for (std::size_t i = 0; i < c.n_obs(); ++i) {
    const int yi = c.year.empty() ? 0 : c.year[i];
    eta_fixed[i] = (c.intercept_fixed ? c.fixed_intercept : theta[yi]) +
                   (c.offset.empty() ? 0.0 : c.offset[i]);
  }
  double prior = 0.0;
  if (c.intercept_prior_sd > 0.0 && !c.intercept_fixed) {
    for (int t = 0; t < ni; ++t) {
      const double z = theta[t] / c.intercept_prior_sd;
      prior += 0.5 * z * z + std::log(c.intercept_prior_sd) + kHalfLog2Pi;
    }
  }
  return [&c, disp = std::move(disp), eta_fixed = std::move(eta_fixed), prior](
             const Eigen::VectorXd& u, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) -> double {
    double val = prior;
    for (std::size_t i = 0; i < c.n_obs(); ++i) {
      const Dual2 eta{eta_fixed[i] + u[static_cast<Eigen::Index>(i)], 1.0, 0.0};
      const Dual2 term = component_obs_nll(c, i, eta, disp.data());
      val += term.v;
      if (grad) (*grad)[static_cast<Eigen::Index>(i)] += term.d1;
      if (hess) (*hess)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += term.d2;
    }
    return val;
  };
}

// Joint objective (data + GMRF prior) of a spatial component; the test
// surface for the Laplace machinery.
inline double component_joint_negloglik(const ComponentData& c, const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& u) {
  if (!c.spatial) throw domain_error("joint_negloglik: component has no spatial field");
  const int p = c.n_params();
  const double log_tau = theta[p - 2];
  const double log_range = theta[p - 1];
  SpatialCache cache;
  cache.refresh(c.coords, log_range);
  const double tau2 = std::exp(2.0 * log_tau);
  const auto m = static_cast<double>(c.n_obs());
  const auto dt = make_component_data_term(c, theta);
  return dt(u, nullptr, nullptr) + 0.5 * u.dot(cache.c_inv * u) / tau2 +
         0.5 * (cache.logdet_c + 2.0 * m * log_tau) + m * kHalfLog2Pi;
}

// Laplace-approximated marginal objective of one spatial component.
inline LaplaceResult component_laplace(const ComponentData& c, const Eigen::VectorXd& theta,
                                       SpatialCache& cache) {
  const int p = c.n_params();
  const double log_tau = theta[p - 2];
  const double log_range = theta[p - 1];
  cache.refresh(c.coords, log_range);
  const double inv_tau2 = std::exp(-2.0 * log_tau);
  const Eigen::MatrixXd precision = cache.c_inv * inv_tau2;
  const double logdet_sigma = cache.logdet_c + 2.0 * static_cast<double>(c.n_obs()) * log_tau;
  auto res = laplace_marginal(make_component_data_term(c, theta), precision, logdet_sigma,
                              cache.u_warm);
  cache.u_warm = res.u_hat;
  return res;
}

inline double component_marginal_negloglik(const ComponentData& c, const Eigen::VectorXd& theta,
                                           SpatialCache& cache) {
  if (!c.spatial) return component_negloglik_fixed(c, theta);
  return component_laplace(c, theta, cache).value;
}

struct ComponentFit {
  ComponentData data;
  Eigen::VectorXd theta;
  std::vector<std::string> names;
  double nll = 0.0;  // marginal contribution
  bool optimizer_converged = false;
  // Spatial pieces (empty when no field):
  Eigen::VectorXd u_hat;
  Eigen::MatrixXd hess_chol_L;  // joint-precision Cholesky factor
  Eigen::MatrixXd c_inv;        // inverse correlation at the fitted range
  double logdet_c = 0.0;
  double tau = 0.0;
  double range = 0.0;

  double intercept(int year_idx = 0) const {
    if (data.intercept_fixed) return data.fixed_intercept;
    return theta[std::min(year_idx, data.n_intercepts - 1)];
  }
  const double* dispersion() const { return theta.data() + data.n_free_intercepts(); }
};

struct IndexEstimate;  // defined in index.hpp

struct FitResult {
  ModelSpec spec;
  std::vector<ComponentFit> components;
  double nll = 0.0;   // total marginal nll, on the original response scale
  double aic = 0.0;
  int k_params = 0;
  double max_gradient = std::numeric_limits<double>::infinity();
  bool hessian_pd = false;
  bool optimizer_converged = false;
  std::vector<double> field_sds;
  Eigen::VectorXd theta;                // concatenated component parameters
  std::vector<std::string> param_names;
  Eigen::MatrixXd hessian;              // FD Hessian of the marginal nll
  Eigen::MatrixXd covariance;           // its inverse when PD
  std::vector<std::string> refit_actions;
  ConvergenceReport report;

  bool has_random_effects() const {
    for (const auto& c : components)
      if (c.data.spatial) return true;
    return false;
  }
};

namespace fit_detail {

inline Eigen::VectorXd component_init(const ComponentData& c) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(c.n_params());
  const int ni = c.n_free_intercepts();
  if (c.kind == ComponentKind::encounter) {
    if (!c.intercept_fixed) {
      const double n = static_cast<double>(c.n_obs());
      for (int t = 0; t < ni; ++t) {
        double s = 0.0, cnt = 0.0;
        for (std::size_t i = 0; i < c.n_obs(); ++i) {
          if ((c.year.empty() ? 0 : c.year[i]) != t && ni > 1) continue;
          s += c.y[i];
          cnt += 1.0;
        }
        const double p = std::clamp(cnt > 0 ? s / cnt : 0.5, 1.0 / (n + 1.0), n / (n + 1.0));
        theta[t] = std::log(p / (1.0 - p));
      }
    }
  } else {
    // Link-transformed sample means per intercept; dispersion from the
    // positive-part sample CV.
    double gsum = 0.0, gcnt = 0.0;
    std::vector<double> sum(static_cast<std::size_t>(std::max(ni, 1)), 0.0),
        cnt(static_cast<std::size_t>(std::max(ni, 1)), 0.0);
    std::vector<double> positives;
    for (std::size_t i = 0; i < c.n_obs(); ++i) {
      const double adj = c.y[i] * std::exp(-(c.offset.empty() ? 0.0 : c.offset[i]));
      const int t = (c.year.empty() || ni <= 1) ? 0 : c.year[i];
      sum[static_cast<std::size_t>(t)] += adj;
      cnt[static_cast<std::size_t>(t)] += 1.0;
      gsum += adj;
      gcnt += 1.0;
      if (c.y[i] > 0.0) positives.push_back(c.y[i]);
    }
    const double gmean = std::max(gsum / std::max(gcnt, 1.0), 1e-8);
    for (int t = 0; t < ni; ++t) {
      const double m = cnt[static_cast<std::size_t>(t)] > 0
                           ? sum[static_cast<std::size_t>(t)] / cnt[static_cast<std::size_t>(t)]
                           : gmean;
      theta[t] = std::log(std::max(m, 1e-8));
    }
    double pm = 0.0;
    for (double v : positives) pm += v;
    pm /= std::max<double>(1.0, static_cast<double>(positives.size()));
    double pv = 0.0;
    for (double v : positives) pv += (v - pm) * (v - pm);
    pv /= std::max<double>(1.0, static_cast<double>(positives.size() - 1));
    const double cv = std::clamp(std::sqrt(pv) / std::max(pm, 1e-12), 0.05, 5.0);
    double* disp = theta.data() + ni;
    switch (c.fam) {
      case Family::lognormal:
        disp[0] = std::log(std::sqrt(std::log1p(cv * cv)));
        break;
      case Family::gamma:
        disp[0] = std::log(cv);
        break;
      case Family::gengamma:
        disp[0] = std::log(std::sqrt(std::log1p(cv * cv)));
        disp[1] = 0.2;
        break;
      case Family::tweedie:
        disp[0] = std::log(std::max(cv * cv, 0.05));
        disp[1] = 0.0;  // power starts at 1.5
        break;
    }
  }
  if (c.spatial) {
    double span = 1e-3;
    for (int d = 0; d < 2; ++d)
      span = std::max(span, c.coords.col(d).maxCoeff() - c.coords.col(d).minCoeff());
    theta[c.n_params() - 2] = std::log(0.5);         // log_tau
    theta[c.n_params() - 1] = std::log(0.4 * span);  // log_range
  }
  return theta;
}

inline ComponentFit optimize_component(ComponentData c, std::optional<Eigen::VectorXd> init) {
  ComponentFit out;
  Eigen::VectorXd x0 = init ? *init : component_init(c);
  if (c.n_params() == 0) {  // fully pinned encounter component
    out.data = std::move(c);
    out.theta = x0;
    out.nll = component_negloglik_fixed(out.data, out.theta);
    out.optimizer_converged = true;
    out.names = out.data.param_names();
    return out;
  }
  if (!c.spatial) {
    ObjectiveFn f = [&](const Eigen::VectorXd& t) { return component_negloglik_fixed(c, t); };
    GradientFn g = [&](const Eigen::VectorXd& t) { return component_gradient_fixed(c, t); };
    auto res = minimize_bfgs(f, g, x0, 1e-6, 400);
    out.theta = res.x;
    out.nll = res.f;
    out.optimizer_converged = res.converged;
  } else {
    SpatialCache cache;
    ObjectiveFn f = [&](const Eigen::VectorXd& t) {
      return component_marginal_negloglik(c, t, cache);
    };
    GradientFn g = [&](const Eigen::VectorXd& t) { return fd_gradient(f, t); };
    auto res = minimize_bfgs(f, g, x0, 1e-6, 200);
    if (!res.converged) {
      // Restart with a fresh curvature model; Laplace-marginal surfaces have
      // narrow ridges where a stale BFGS approximation stalls the line search.
      auto retry = minimize_bfgs(f, g, res.x, 1e-6, 200);
      if (retry.f <= res.f) res = std::move(retry);
    }
    out.theta = res.x;
    out.nll = res.f;
    out.optimizer_converged = res.converged;
    auto lap = component_laplace(c, out.theta, cache);
    out.u_hat = lap.u_hat;
    out.hess_chol_L = lap.hess_chol_L;
    out.c_inv = cache.c_inv;
    out.logdet_c = cache.logdet_c;
    out.tau = std::exp(out.theta[c.n_params() - 2]);
    out.range = std::exp(out.theta[c.n_params() - 1]);
  }
  out.names = c.param_names();
  out.data = std::move(c);
  return out;
}

}  // namespace fit_detail

inline ConvergenceReport check_convergence(const FitResult& fit,
                                           std::optional<double> index_cv = std::nullopt) {
  ConvergenceReport r;
  r.gradient_ok = fit.max_gradient < 0.005;
  r.hessian_pd = fit.hessian_pd;
  r.fields_off_boundary = true;
  for (double sd : fit.field_sds)
    if (sd < 0.01) r.fields_off_boundary = false;
  r.index_cv_ok = !index_cv.has_value() || *index_cv < 1.0;
  r.refit_actions = fit.refit_actions;
  r.verdict = r.gradient_ok && r.hessian_pd && r.fields_off_boundary && r.index_cv_ok;
  return r;
}

// Maximum-likelihood fit with Laplace-approximated spatial random fields.
// When a fitted field SD collapses below 0.01 the field is dropped and the
// component refit without it.
inline FitResult fit(const ModelSpec& spec, const Dataset& data,
                     std::optional<Eigen::VectorXd> init = std::nullopt) {
  FitResult out;
  out.spec = spec;
  auto comps = build_components(spec, data);

  // Slice any user-provided full initial vector into component pieces.
  std::vector<std::optional<Eigen::VectorXd>> inits(comps.size());
  if (init) {
    int off = 0;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      const int p = comps[ci].n_params();
      if (off + p > init->size()) throw domain_error("fit: init vector has wrong length");
      inits[ci] = init->segment(off, p);
      off += p;
    }
  }

  std::size_t n_pos = 0;
  for (double v : data.y)
    if (v > 0.0) ++n_pos;

  out.optimizer_converged = true;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    auto cf = fit_detail::optimize_component(comps[ci], inits[ci]);
    if (cf.data.spatial && cf.tau < 0.01) {
      out.refit_actions.push_back(
          std::string("dropped_field_") +
          (cf.data.kind == ComponentKind::encounter ? "encounter" : "positive"));
      ComponentData flat = cf.data;
      flat.spatial = false;
      Eigen::VectorXd warm = cf.theta.head(flat.n_params());
      cf = fit_detail::optimize_component(std::move(flat), warm);
    }
    out.optimizer_converged = out.optimizer_converged && cf.optimizer_converged;
    if (cf.data.spatial) out.field_sds.push_back(cf.tau);
    out.components.push_back(std::move(cf));
  }

  // Totals; the scaling Jacobian puts the likelihood back on the original
  // response scale so AICs are comparable across response_scale choices.
  double nll = 0.0;
  int k = 0;
  for (const auto& cf : out.components) {
    nll += cf.nll;
    k += cf.data.n_params();
  }
  if (spec.response_scale != 1.0)
    nll -= static_cast<double>(n_pos) * std::log(spec.response_scale);
  out.nll = nll;
  out.k_params = k;
  out.aic = 2.0 * nll + 2.0 * k;

  // Concatenated parameters and marginal-gradient / Hessian diagnostics.
  out.theta.resize(k);
  int off = 0;
  for (const auto& cf : out.components) {
    out.theta.segment(off, cf.theta.size()) = cf.theta;
    for (const auto& n : cf.names) out.param_names.push_back(n);
    off += static_cast<int>(cf.theta.size());
  }
  std::vector<SpatialCache> caches(out.components.size());
  ObjectiveFn total = [&](const Eigen::VectorXd& t) {
    double v = 0.0;
    int o = 0;
    for (std::size_t ci = 0; ci < out.components.size(); ++ci) {
      const auto& cd = out.components[ci].data;
      const int p = cd.n_params();
      if (p > 0) v += component_marginal_negloglik(cd, t.segment(o, p), caches[ci]);
      o += p;
    }
    return v;
  };
  if (k > 0) {
    out.max_gradient = fd_gradient(total, out.theta).cwiseAbs().maxCoeff();
    // Laplace-marginal evaluations carry inner-solve noise around 1e-7; a
    // second-difference step of 1e-3 keeps that noise (which scales as
    // noise / step^2) well below real curvature.
    out.hessian = fd_hessian(total, out.theta, 1e-3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.hessian);
    out.hessian_pd = es.eigenvalues().minCoeff() > 0.0;
    if (out.hessian_pd) out.covariance = out.hessian.inverse();
  } else {
    out.max_gradient = 0.0;
    out.hessian_pd = true;
  }
  out.report = check_convergence(out);
  return out;
}

// Akaike weights over converged fits: w_i = exp(-delta_i/2) / sum.
inline std::vector<double> aic_weights(const std::vector<double>& aics) {
  if (aics.empty()) throw domain_error("aic_weights: empty input");
  const double best = *std::min_element(aics.begin(), aics.end());
  std::vector<double> w(aics.size());
  double total = 0.0;
  for (std::size_t i = 0; i < aics.size(); ++i) {
    w[i] = std::exp(-0.5 * (aics[i] - best));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace ggdfit
