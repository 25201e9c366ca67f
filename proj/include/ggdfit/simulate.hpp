#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "ggdfit/data.hpp"
#include "ggdfit/families.hpp"
#include "ggdfit/index.hpp"
#include "ggdfit/matern.hpp"
#include "ggdfit/rng.hpp"

namespace ggdfit {

struct SimConfig {
  int grid_nx = 40;            // 40 desk-scale, 100 paper-scale
  int n_observations = 250;    // 250 desk, 500 paper
  int n_replicates = 200;      // 200 desk, 1000 paper
  Family family = Family::gengamma;
  double q = 0.5;              // used when family is gengamma
  double target_cv = 0.95;
  double encounter_prob = 0.5;
  double mean_catch_rate = 1.0;
  double tweedie_power = 1.5;
  double matern_range = 0.5;
  double matern_sd = 1.0;
  bool shared_field_on_encounter = false;  // sensitivity override: field also
                                           // shifts the encounter logit
  std::uint64_t seed = 1;

  void validate() const {
    if (grid_nx < 1 || n_observations < 1 || n_replicates < 1)
      throw domain_error("sim config: counts must be >= 1");
    if (!(target_cv > 0.0)) throw domain_error("sim config: CV must be > 0");
    if (!(encounter_prob > 0.0 && encounter_prob < 1.0))
      throw domain_error("sim config: encounter probability must be in (0,1)");
    if (!(mean_catch_rate > 0.0))
      throw domain_error("sim config: mean catch rate must be > 0");
    if (!(tweedie_power > 1.0 && tweedie_power < 2.0))
      throw domain_error("sim config: tweedie power must be in (1,2)");
    if (!(matern_range > 0.0) || matern_sd < 0.0)
      throw domain_error("sim config: bad field hyperparameters");
  }
};

// Prediction-grid cell centers on [0,1]^2.
inline Eigen::Matrix<double, Eigen::Dynamic, 2> sim_grid(const SimConfig& cfg) {
  const int nx = cfg.grid_nx;
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts(nx * nx, 2);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) {
      pts(i * nx + j, 0) = (i + 0.5) / nx;
      pts(i * nx + j, 1) = (j + 0.5) / nx;
    }
  return pts;
}

// One simulated survey: latent field over observation locations and the
// prediction grid jointly, expected density mu_s = exp(alpha + omega_s)
// with alpha chosen so the spatial mean of mu is the configured catch rate,
// observation error per family, and the true grid index.
inline std::pair<Dataset, TrueIndex> simulate_dataset(Rng& rng, const SimConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_observations;
  const int ng = cfg.grid_nx * cfg.grid_nx;

  Dataset d;
  d.has_coords = true;
  d.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    d.coords(i, 0) = rng.uniform();
    d.coords(i, 1) = rng.uniform();
  }
  const auto grid = sim_grid(cfg);

  Eigen::VectorXd field = Eigen::VectorXd::Zero(n + ng);
  if (cfg.matern_sd > 0.0) {
    Eigen::Matrix<double, Eigen::Dynamic, 2> all(n + ng, 2);
    all.topRows(n) = d.coords;
    all.bottomRows(ng) = grid;
    PointSet ps{all, {}};
    auto real = sample_field(rng, ps, {cfg.matern_range, cfg.matern_sd});
    field = real.values;
  }

  // E[exp(omega)] = exp(sd^2 / 2), so this alpha makes E[mu_s] the target.
  const double alpha =
      std::log(cfg.mean_catch_rate) - 0.5 * cfg.matern_sd * cfg.matern_sd;

  const bool delta = cfg.family != Family::tweedie;
  double sigma = 0.0, sdlog = 0.0, shape = 0.0;
  switch (cfg.family) {
    case Family::gengamma:
      sigma = solve_sigma_for_cv(cfg.q, cfg.target_cv);
      break;
    case Family::lognormal:
      sdlog = std::sqrt(std::log1p(cfg.target_cv * cfg.target_cv));
      break;
    case Family::gamma:
      shape = 1.0 / (cfg.target_cv * cfg.target_cv);
      break;
    case Family::tweedie:
      break;
  }
  // phi = cv^2 gives variance phi * mu^p = cv^2 at mu = 1.
  const double phi = cfg.target_cv * cfg.target_cv;

  const double logit_p = std::log(cfg.encounter_prob / (1.0 - cfg.encounter_prob));
  for (int i = 0; i < n; ++i) {
    const double mu = std::exp(alpha + field[i]);
    if (!delta) {
      d.y.push_back(tweedie_sample_one(rng, {mu, cfg.tweedie_power, phi}));
      continue;
    }
    const double p =
        cfg.shared_field_on_encounter ? invlogit(logit_p + field[i]) : cfg.encounter_prob;
    if (!rng.bernoulli(p)) {
      d.y.push_back(0.0);
      continue;
    }
    double y = 0.0;
    switch (cfg.family) {
      case Family::gengamma:
        y = gg_sample_one(rng, gg_mu_from_eta(std::log(mu), sigma, cfg.q), sigma, cfg.q);
        break;
      case Family::lognormal:
        y = std::exp(rng.normal(std::log(mu) - 0.5 * sdlog * sdlog, sdlog));
        break;
      case Family::gamma:
        y = rng.gamma(shape, mu / shape);
        break;
      case Family::tweedie:
        break;
    }
    d.y.push_back(y);
  }

  TrueIndex truth;
  const double area = 1.0 / static_cast<double>(ng);
  for (int j = 0; j < ng; ++j) {
    const double mu = std::exp(alpha + field[n + j]);
    const double p = cfg.shared_field_on_encounter ? invlogit(logit_p + field[n + j])
                                                   : cfg.encounter_prob;
    truth.value += (delta ? p * mu : mu) * area;
  }
  return {std::move(d), truth};
}

}  // namespace ggdfit
