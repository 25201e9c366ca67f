#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ggdfit/diagnostics.hpp"
#include "ggdfit/fit.hpp"
#include "ggdfit/index.hpp"
#include "ggdfit/simulate.hpp"

namespace ggdfit {

struct ReplicateResult {
  int cell = 0;
  int replicate = 0;
  std::string sim_family;
  double sim_q = std::numeric_limits<double>::quiet_NaN();
  std::string fit_family;
  std::string status = "ok";  // "ok" or the failure message
  bool converged = false;     // full convergence verdict
  double true_index = std::numeric_limits<double>::quiet_NaN();
  double index_value = std::numeric_limits<double>::quiet_NaN();
  double naive_index = std::numeric_limits<double>::quiet_NaN();
  double relative_error = std::numeric_limits<double>::quiet_NaN();
  double naive_relative_error = std::numeric_limits<double>::quiet_NaN();
  double index_cv = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double aic_weight = std::numeric_limits<double>::quiet_NaN();
  double q_hat = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr Family kFitFamilies[] = {Family::gengamma, Family::lognormal, Family::gamma,
                                          Family::tweedie};

namespace experiment_detail {

inline std::string sim_label(const SimConfig& cfg) { return family_name(cfg.family); }

// All four family fits on one simulated replicate.
inline std::vector<ReplicateResult> run_replicate(const SimConfig& cfg, int cell_idx, int rep,
                                                  bool spatial) {
  const std::uint64_t seed =
      derive_seed(cfg.seed, static_cast<std::uint64_t>(cell_idx) * 1000003u +
                                static_cast<std::uint64_t>(rep));
  std::vector<ReplicateResult> rows;
  ReplicateResult base;
  base.cell = cell_idx;
  base.replicate = rep;
  base.sim_family = sim_label(cfg);
  if (cfg.family == Family::gengamma) base.sim_q = cfg.q;
  base.seed = seed;

  Rng rng(seed);
  Dataset data;
  TrueIndex truth;
  try {
    auto sim = simulate_dataset(rng, cfg);
    data = std::move(sim.first);
    truth = sim.second;
  } catch (const std::exception& e) {
    base.fit_family = "simulation";
    base.status = std::string("simulation failed: ") + e.what();
    rows.push_back(base);
    return rows;
  }
  base.true_index = truth.value;

  const auto pts = sim_grid(cfg);
  const double area = 1.0 / static_cast<double>(pts.rows());
  for (Family fam : kFitFamilies) {
    ReplicateResult r = base;
    r.fit_family = family_name(fam);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ModelSpec spec;
      spec.family = fam;
      spec.spatial_pos = spatial;
      auto f = fit(spec, data);
      auto est = index_bias_corrected(f, pts, area);
      r.index_value = est.bias_corrected_value;
      r.naive_index = est.naive_value;
      r.relative_error = relative_error(est.bias_corrected_value, truth.value);
      r.naive_relative_error = relative_error(est.naive_value, truth.value);
      r.index_cv = est.cv;
      r.aic = f.aic;
      r.converged = check_convergence(f, est.cv).verdict && f.optimizer_converged;
      if (fam == Family::gengamma) {
        const auto& pos = f.components[f.spec.is_delta() ? 1 : 0];
        r.q_hat = pos.theta[pos.data.n_free_intercepts() + 1];
      }
    } catch (const std::exception& e) {
      r.status = e.what();
      r.converged = false;
    }
    r.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(r));
  }

  // Akaike weights over the converged fits of this replicate.
  std::vector<std::size_t> conv;
  std::vector<double> aics;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].converged && std::isfinite(rows[i].aic)) {
      conv.push_back(i);
      aics.push_back(rows[i].aic);
    }
  }
  if (!conv.empty()) {
    const auto w = aic_weights(aics);
    for (std::size_t k = 0; k < conv.size(); ++k) rows[conv[k]].aic_weight = w[k];
  }
  return rows;
}

}  // namespace experiment_detail

// Factorial simulation-estimation run: for each cell and replicate, simulate
// one dataset, fit all four families to it, and index each fit. Replicates
// use independent derived seeds, so the result table is identical whether
// they run serially or across threads.
inline std::vector<ReplicateResult> run_factorial(const std::vector<SimConfig>& cells,
                                                  int threads = 1, bool spatial = true) {
  if (cells.empty()) throw domain_error("experiment: no simulation cells");
  for (const auto& c : cells) c.validate();

  struct Job {
    int cell;
    int rep;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int r = 0; r < cells[c].n_replicates; ++r)
      jobs.push_back({static_cast<int>(c), r});

  std::vector<std::vector<ReplicateResult>> slots(jobs.size());
  const int nw = std::max(1, threads);
  auto worker = [&](int w) {
    for (std::size_t j = static_cast<std::size_t>(w); j < jobs.size();
         j += static_cast<std::size_t>(nw)) {
      slots[j] = experiment_detail::run_replicate(cells[static_cast<std::size_t>(jobs[j].cell)],
                                                  jobs[j].cell, jobs[j].rep, spatial);
    }
  };
  if (nw == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }

  std::vector<ReplicateResult> out;
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

struct CellSummary {
  std::string sim_family;
  double sim_q = std::numeric_limits<double>::quiet_NaN();
  std::string fit_family;
  int n_total = 0;
  int n_converged = 0;
  double convergence_rate = 0.0;
  double median_relative_error = std::numeric_limits<double>::quiet_NaN();
  double median_aic_weight = std::numeric_limits<double>::quiet_NaN();
};

namespace experiment_detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace experiment_detail

// Per (simulation cell x fitted family) medians over converged replicates,
// with convergence rates.
inline std::vector<CellSummary> summarize(const std::vector<ReplicateResult>& results) {
  if (results.empty()) throw domain_error("summarize: no results");
  std::vector<CellSummary> out;
  auto find = [&](const ReplicateResult& r) -> CellSummary& {
    for (auto& s : out) {
      const bool same_q = (std::isnan(s.sim_q) && std::isnan(r.sim_q)) || s.sim_q == r.sim_q;
      if (s.sim_family == r.sim_family && same_q && s.fit_family == r.fit_family) return s;
    }
    CellSummary s;
    s.sim_family = r.sim_family;
    s.sim_q = r.sim_q;
    s.fit_family = r.fit_family;
    out.push_back(std::move(s));
    return out.back();
  };
  std::vector<std::vector<double>> res, weights;
  for (const auto& r : results) {
    if (r.fit_family == "simulation") continue;
    auto& s = find(r);
    const std::size_t idx = static_cast<std::size_t>(&s - out.data());
    if (idx >= res.size()) {
      res.resize(out.size());
      weights.resize(out.size());
    }
    ++s.n_total;
    if (r.converged) {
      ++s.n_converged;
      res[idx].push_back(r.relative_error);
      if (std::isfinite(r.aic_weight)) weights[idx].push_back(r.aic_weight);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].convergence_rate =
        out[i].n_total > 0 ? static_cast<double>(out[i].n_converged) / out[i].n_total : 0.0;
    out[i].median_relative_error = experiment_detail::median_of(res[i]);
    out[i].median_aic_weight = experiment_detail::median_of(weights[i]);
  }
  return out;
}

}  // namespace ggdfit
