#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "ggdfit/data.hpp"
#include "ggdfit/dual.hpp"
#include "ggdfit/families.hpp"

namespace ggdfit {

enum class ComponentKind { encounter, positive, tweedie_all };

// One linear predictor with its observations. Delta models have an
// encounter and a positive component; Tweedie has a single component.
struct ComponentData {
  ComponentKind kind = ComponentKind::tweedie_all;
  Family fam = Family::tweedie;  // ignored for encounter
  std::vector<double> y;
  std::vector<double> offset;
  std::vector<int> year;         // empty -> single intercept
  int n_intercepts = 1;
  double intercept_prior_sd = 0.0;
  bool spatial = false;
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;
  bool intercept_fixed = false;  // degenerate encounter: intercept pinned
  double fixed_intercept = 0.0;

  std::size_t n_obs() const { return y.size(); }
  int n_disp() const {
    return kind == ComponentKind::encounter ? 0 : n_dispersion(fam);
  }
  int n_free_intercepts() const { return intercept_fixed ? 0 : n_intercepts; }
  int n_params() const { return n_free_intercepts() + n_disp() + (spatial ? 2 : 0); }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    if (!intercept_fixed) {
      for (int t = 0; t < n_intercepts; ++t)
        names.push_back(n_intercepts == 1 ? std::string("b0") : "b_year" + std::to_string(t));
    }
    if (kind != ComponentKind::encounter) {
      switch (fam) {
        case Family::lognormal: names.push_back("log_sdlog"); break;
        case Family::gamma: names.push_back("log_cv"); break;
        case Family::gengamma: names.push_back("log_sigma"); names.push_back("q"); break;
        case Family::tweedie: names.push_back("log_phi"); names.push_back("tweedie_t"); break;
      }
    }
    if (spatial) {
      names.push_back("log_tau");
      names.push_back("log_range");
    }
    return names;
  }
};

template <typename T>
T softplus(T x) {
  using std::exp;
  using std::log1p;
  if (value_of(x) > 35.0) return x;
  return log1p(exp(x));
}

// Negative log-likelihood contribution of observation i given its linear
// predictor eta (which includes any offset and latent field value).
template <typename T>
T component_obs_nll(const ComponentData& c, std::size_t i, T eta, const T* disp) {
  if (c.kind == ComponentKind::encounter) {
    const bool z = c.y[i] > 0.0;
    return softplus(eta) - (z ? eta : T(0.0));
  }
  return -positive_logpdf_eta(c.fam, c.y[i], eta, disp);
}

// Fixed-effects objective for one component (no latent field): sum of
// per-observation terms plus the optional intercept prior penalty.
template <typename T>
T component_negloglik_fixed(const ComponentData& c, const T* theta) {
  const int ni = c.n_free_intercepts();
  const T* disp = theta + ni;
  T nll = T(0.0);
  for (std::size_t i = 0; i < c.n_obs(); ++i) {
    const int yi = c.year.empty() ? 0 : c.year[i];
    T eta = c.intercept_fixed ? T(c.fixed_intercept) : theta[yi];
    eta += T(c.offset.empty() ? 0.0 : c.offset[i]);
    const T term = component_obs_nll(c, i, eta, disp);
    if constexpr (std::is_same_v<T, double>) {
      if (!std::isfinite(term))
        throw numerical_error("negloglik: non-finite likelihood at observation " +
                              std::to_string(i));
    }
    nll += term;
  }
  if (c.intercept_prior_sd > 0.0 && !c.intercept_fixed) {
    const double sd = c.intercept_prior_sd;
    for (int t = 0; t < ni; ++t) {
      const T z = theta[t] / T(sd);
      nll += T(0.5) * z * z + T(std::log(sd) + 0.9189385332046727417803297);
    }
  }
  return nll;
}

inline double component_negloglik_fixed(const ComponentData& c, const Eigen::VectorXd& theta) {
  std::vector<double> t(theta.data(), theta.data() + theta.size());
  return component_negloglik_fixed<double>(c, t.data());
}

// Analytic (forward-mode) gradient of the fixed-effects objective.
inline Eigen::VectorXd component_gradient_fixed(const ComponentData& c,
                                                const Eigen::VectorXd& theta) {
  const int p = static_cast<int>(theta.size());
  Eigen::VectorXd grad(p);
  std::vector<Dual> t(p);
  for (int j = 0; j < p; ++j) t[j] = Dual{theta[j], 0.0};
  for (int j = 0; j < p; ++j) {
    t[j].d = 1.0;
    grad[j] = component_negloglik_fixed<Dual>(c, t.data()).d;
    t[j].d = 0.0;
  }
  return grad;
}

// Assembles the components of a model. Delta families get an encounter
// component over all observations and a positive component over y > 0.
inline std::vector<ComponentData> build_components(const ModelSpec& spec, const Dataset& data) {
  if (data.size() == 0) throw domain_error("model: dataset is empty");
  std::vector<ComponentData> comps;
  const bool years = spec.year_intercepts && !data.year.empty();
  auto base = [&](ComponentKind kind) {
    ComponentData c;
    c.kind = kind;
    c.fam = spec.family;
    c.n_intercepts = years ? data.n_years() : 1;
    c.intercept_prior_sd = spec.year_prior_sd;
    return c;
  };
  if (!spec.is_delta()) {
    auto c = base(ComponentKind::tweedie_all);
    c.spatial = spec.spatial_pos;
    for (std::size_t i = 0; i < data.size(); ++i) {
      c.y.push_back(data.y[i] * spec.response_scale);
      if (spec.use_offset) c.offset.push_back(data.offset_at(i));
      if (years) c.year.push_back(data.year[i]);
    }
    if (c.spatial) {
      if (!data.has_coords) throw domain_error("model: spatial fit requires coordinates");
      c.coords = data.coords;
    }
    comps.push_back(std::move(c));
    return comps;
  }

  auto enc = base(ComponentKind::encounter);
  enc.spatial = spec.spatial_bin;
  auto pos = base(ComponentKind::positive);
  pos.spatial = spec.spatial_pos;
  std::vector<Eigen::Index> pos_rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    enc.y.push_back(data.y[i] > 0.0 ? 1.0 : 0.0);
    if (years) enc.year.push_back(data.year[i]);
    if (data.y[i] > 0.0) {
      pos.y.push_back(data.y[i] * spec.response_scale);
      if (spec.use_offset) pos.offset.push_back(data.offset_at(i));
      if (years) pos.year.push_back(data.year[i]);
      pos_rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (pos.y.empty())
    throw domain_error("model: delta family requires at least one positive observation");
  if ((spec.spatial_bin || spec.spatial_pos) && !data.has_coords)
    throw domain_error("model: spatial fit requires coordinates");
  if (enc.spatial) enc.coords = data.coords;
  if (pos.spatial) {
    pos.coords.resize(static_cast<Eigen::Index>(pos_rows.size()), 2);
    for (Eigen::Index r = 0; r < pos.coords.rows(); ++r)
      pos.coords.row(r) = data.coords.row(pos_rows[static_cast<std::size_t>(r)]);
  }
  // Degenerate encounter patterns: pin the intercept instead of diverging.
  const double enc_mean =
      std::accumulate(enc.y.begin(), enc.y.end(), 0.0) / static_cast<double>(enc.y.size());
  if ((enc_mean == 0.0 || enc_mean == 1.0) && enc.n_intercepts == 1) {
    enc.intercept_fixed = true;
    enc.fixed_intercept = enc_mean == 1.0 ? 20.0 : -20.0;
  }
  comps.push_back(std::move(enc));
  comps.push_back(std::move(pos));
  return comps;
}

// Whole-model fixed-effects objective over the concatenated parameter vector.
inline double negloglik_fixed(const std::vector<ComponentData>& comps,
                              const Eigen::VectorXd& theta) {
  double nll = 0.0;
  int off = 0;
  for (const auto& c : comps) {
    const int p = c.n_free_intercepts() + c.n_disp();  // spatial params not used here
    nll += component_negloglik_fixed(c, theta.segment(off, p));
    off += c.n_params();
  }
  if (!std::isfinite(nll)) throw numerical_error("negloglik_fixed: non-finite objective");
  return nll;
}

}  // namespace ggdfit
