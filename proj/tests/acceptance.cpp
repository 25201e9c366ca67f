// Acceptance gate: one pass/fail line per criterion, non-zero exit if any
// fail. The heavyweight criteria (3-5) run the same desk-scale experiment
// machinery as the CLI.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ggdfit/diagnostics.hpp"
#include "ggdfit/experiment.hpp"
#include "ggdfit/index.hpp"
#include "ggdfit/outputs.hpp"
#include "oracles.hpp"

using namespace ggdfit;

namespace {

int g_failures = 0;

void report(int n, const char* what, bool pass, const std::string& detail) {
  std::printf("%s  criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", n, what,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// --- 1: special-case equivalence -------------------------------------------

bool criterion1(std::string& detail) {
  double worst_ln = 0.0, worst_ga = 0.0;
  const double mu = 0.3, sigma = 0.7;
  for (double y = 0.01; y <= 100.0; y *= 1.04) {
    {
      // |Q| = 1e-6 vs analytic lognormal log density
      const double gg = gg_logpdf(y, mu, sigma, 1e-6);
      const double ln = -std::log(y * sigma) - 0.5 * std::log(2.0 * M_PI) -
                        0.5 * std::pow((std::log(y) - mu) / sigma, 2);
      worst_ln = std::max(worst_ln, std::abs(gg - ln));
    }
    {
      // Q = sigma vs analytic gamma(shape 1/sigma^2, scale exp(mu) sigma^2)
      const double gg = gg_logpdf(y, mu, sigma, sigma);
      const double shape = 1.0 / (sigma * sigma);
      const double scale = std::exp(mu) * sigma * sigma;
      const double ga = (shape - 1.0) * std::log(y) - y / scale - lgamma_(shape) -
                        shape * std::log(scale);
      worst_ga = std::max(worst_ga, std::abs(gg - ga));
    }
  }
  std::ostringstream d;
  d << "max |dev| lognormal " << worst_ln << " (tol 1e-4), gamma " << worst_ga
    << " (tol 1e-8)";
  detail = d.str();
  return worst_ln < 1e-4 && worst_ga < 1e-8;
}

// --- 2: mean contract -------------------------------------------------------

bool criterion2(std::string& detail) {
  Rng rng(7771);
  int done = 0;
  double worst = 0.0;
  while (done < 20) {
    const double eta = rng.normal(0.0, 0.7);
    const double sigma = 0.2 + rng.uniform();
    const double q = -1.5 + 3.5 * rng.uniform();
    // require the first moment to be comfortably integrable: for q < 0 the
    // right tail is polynomial with index k + sigma/q
    if (q < 0.0 && 1.0 / (q * q) + sigma / q < 0.5) continue;
    double mu;
    try {
      mu = gg_mu_from_eta(eta, sigma, q);
    } catch (const domain_error&) {
      continue;  // mean undefined for this (sigma, q); draw another triple
    }
    // Integration window covering both the density and the mean-weighted
    // density: y f(y) is a generalized gamma with gamma shape k + sigma/q on
    // the same transform t = mu + (sigma/q) log(q^2 g).
    const double k = 1.0 / (q * q);
    double tlo = std::numeric_limits<double>::infinity(), thi = -tlo;
    for (double kk : {k, k + sigma / q}) {
      for (double g : {gamma_p_inv(kk, 1e-14), gamma_q_inv(kk, 1e-14)}) {
        const double t = mu + sigma * std::log(q * q * g) / q;
        tlo = std::min(tlo, t);
        thi = std::max(thi, t);
      }
    }
    const double mean = oracle::log_space_moment(
        [&](double y) { return gg_logpdf(y, mu, sigma, q); }, 1, tlo, thi);
    worst = std::max(worst, std::abs(mean - std::exp(eta)) / std::exp(eta));
    ++done;
  }
  std::ostringstream d;
  d << "20 triples, worst relative deviation " << worst << " (tol 1e-6)";
  detail = d.str();
  return worst < 1e-6;
}

// --- 3 & 4: desk-scale experiment ------------------------------------------

struct ExperimentOutcome {
  std::vector<CellSummary> summaries;
  std::vector<ReplicateResult> results;
};

ExperimentOutcome run_desk_experiment() {
  SimConfig lognormal_cell;  // desk-scale defaults: 40x40, 250 obs, 200 reps
  lognormal_cell.family = Family::lognormal;
  lognormal_cell.seed = 20260824;
  SimConfig q2_cell = lognormal_cell;
  q2_cell.family = Family::gengamma;
  q2_cell.q = 2.0;
  auto results = run_factorial({lognormal_cell, q2_cell}, 1, /*spatial=*/true);
  return {summarize(results), results};
}

const CellSummary* find_cell(const std::vector<CellSummary>& s, const std::string& sim,
                             const std::string& fit) {
  for (const auto& c : s)
    if (c.sim_family == sim && c.fit_family == fit) return &c;
  return nullptr;
}

bool criterion3(const ExperimentOutcome& out, std::string& detail) {
  const auto* c = find_cell(out.summaries, "lognormal", "gengamma");
  if (!c) {
    detail = "missing lognormal/gengamma cell";
    return false;
  }
  std::ostringstream d;
  d << "median GGD AIC weight on lognormal data " << c->median_aic_weight
    << " (band [0.20, 0.35], expectation 0.268), convergence " << c->convergence_rate;
  detail = d.str();
  return c->median_aic_weight >= 0.20 && c->median_aic_weight <= 0.35;
}

bool criterion4(const ExperimentOutcome& out, std::string& detail) {
  bool ok = true;
  std::ostringstream d;
  for (const char* sim : {"lognormal", "gengamma"}) {
    for (const char* fam : {"gengamma", "gamma", "tweedie"}) {
      const auto* c = find_cell(out.summaries, sim, fam);
      if (!c || c->n_converged == 0) {
        d << sim << "/" << fam << ": no converged fits; ";
        ok = false;
        continue;
      }
      d << sim << "/" << fam << " medRE " << c->median_relative_error << " (conv "
        << c->convergence_rate << "); ";
      if (std::abs(c->median_relative_error) >= 0.05) ok = false;
    }
  }
  const auto* ln_on_q2 = find_cell(out.summaries, "gengamma", "lognormal");
  if (!ln_on_q2 || ln_on_q2->n_converged == 0) {
    d << "q2/lognormal: no converged fits";
    ok = false;
  } else {
    d << "q2/lognormal medRE " << ln_on_q2->median_relative_error << " (must be > 0.1)";
    if (!(ln_on_q2->median_relative_error > 0.1)) ok = false;
  }
  detail = d.str();
  return ok;
}

// --- 5: residual calibration at n = 2000 -----------------------------------

bool criterion5(std::string& detail) {
  const int repeats = 50, n = 2000;
  int ks_pass = 0, tail_short = 0;
  const double sig_q05 = solve_sigma_for_cv(0.5, 0.95);
  const double mu_q05 = gg_mu_from_eta(0.0, sig_q05, 0.5);
  const double sig_q2 = solve_sigma_for_cv(2.0, 0.95);
  const double mu_q2 = gg_mu_from_eta(0.0, sig_q2, 2.0);
  for (int rep = 0; rep < repeats; ++rep) {
    {
      // correctly specified: GGD data, GGD fit
      Rng rng(derive_seed(551, rep));
      Dataset data;
      for (int i = 0; i < n; ++i)
        data.y.push_back(rng.bernoulli(0.5) ? gg_sample_one(rng, mu_q05, sig_q05, 0.5) : 0.0);
      ModelSpec spec;
      spec.family = Family::gengamma;
      auto f = fit(spec, data);
      Rng rr(derive_seed(552, rep));
      auto rs = rqr(rr, f, data);
      const double ks =
          oracle::ks_statistic(rs.residuals, [](double x) { return norm_cdf(x); });
      if (ks < oracle::ks_critical(static_cast<double>(rs.residuals.size()), 0.05)) ++ks_pass;
    }
    {
      // misspecified upper tail: Q = 2 data, lognormal fit
      Rng rng(derive_seed(553, rep));
      Dataset data;
      for (int i = 0; i < n; ++i)
        data.y.push_back(rng.bernoulli(0.5) ? gg_sample_one(rng, mu_q2, sig_q2, 2.0) : 0.0);
      ModelSpec spec;
      spec.family = Family::lognormal;
      auto f = fit(spec, data);
      Rng rr(derive_seed(554, rep));
      auto rs = rqr(rr, f, data);
      auto qq = qq_data(rs);
      double emp = 0.0, theo = 0.0;
      for (std::size_t i = qq.size() - qq.size() / 10; i < qq.size(); ++i) {
        emp += qq[i].empirical;
        theo += qq[i].theoretical;
      }
      if (emp < theo) ++tail_short;
    }
  }
  std::ostringstream d;
  d << "KS pass " << ks_pass << "/50 (need >= 45), tail shortfall " << tail_short
    << "/50 (need >= 40)";
  detail = d.str();
  return ks_pass >= 45 && tail_short >= 40;
}

// --- 6: Laplace and bias-correction oracles --------------------------------

bool criterion6(std::string& detail) {
  // Gaussian-conjugate marginal vs the analytic integral.
  Rng rng(661);
  const int n = 12;
  const double s = 0.6;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  const Eigen::MatrixXd sigma = a * a.transpose() + 0.4 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal();
  DataTerm gauss = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g,
                       Eigen::MatrixXd* h) -> double {
    double val = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = y[i] - u[i];
      val += 0.5 * r * r / (s * s) + std::log(s) + kHalfLog2Pi;
      if (g) (*g)[i] += -r / (s * s);
      if (h) (*h)(i, i) += 1.0 / (s * s);
    }
    return val;
  };
  const auto lap = laplace_marginal(gauss, sigma.inverse(), std::log(sigma.determinant()),
                                    Eigen::VectorXd::Zero(n));
  const Eigen::MatrixXd total = sigma + s * s * Eigen::MatrixXd::Identity(n, n);
  const double analytic = 0.5 * y.dot(total.inverse() * y) +
                          0.5 * std::log(total.determinant()) + n * kHalfLog2Pi;
  const double laplace_dev = std::abs(lap.value - analytic);

  // Single Gaussian random intercept, functional exp(w).
  const double tau = 0.5;
  DataTerm none = [](const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*) {
    return 0.0;
  };
  Eigen::MatrixXd prec(1, 1);
  prec << 1.0 / (tau * tau);
  const double corrected =
      epsilon_corrected_expectation(none, prec, 2.0 * std::log(tau), Eigen::VectorXd::Zero(1),
                                    Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1));
  const double eps_dev = std::abs(corrected / std::exp(tau * tau / 2.0) - 1.0);

  std::ostringstream d;
  d << "laplace |dev| " << laplace_dev << " (tol 1e-8), correction rel dev " << eps_dev
    << " (tol 1e-3)";
  detail = d.str();
  return laplace_dev < 1e-8 && eps_dev < 1e-3;
}

// --- 7: parameter recovery vs profile-likelihood grid oracle ----------------

bool criterion7(std::string& detail) {
  bool ok = true;
  std::ostringstream d;
  for (double q_true : {-1.0, 0.5, 2.0}) {
    const double sigma = solve_sigma_for_cv(q_true, 0.95);
    const double mu = gg_mu_from_eta(0.0, sigma, q_true);
    Rng rng(derive_seed(771, static_cast<std::uint64_t>(q_true * 10 + 100)));
    Dataset data;
    data.y = gg_sample(rng, {mu}, sigma, q_true, 5000);
    ModelSpec spec;
    spec.family = Family::gengamma;
    auto f = fit(spec, data);
    const auto& pos = f.components[1];
    const double q_hat = pos.theta[2];
    const double mean_hat = std::exp(pos.theta[0]);

    // Brute-force profile likelihood on a (sigma, q) grid; eta profiled by
    // golden-section search on the density sum.
    auto nll_at = [&](double eta, double sg, double qq) {
      const double m = gg_mu_from_eta(eta, sg, qq);
      double nll = 0.0;
      for (double yv : data.y) nll -= gg_logpdf(yv, m, sg, qq);
      return nll;
    };
    auto profile = [&](double sg, double qq) {
      double lo = -1.0, hi = 1.0;
      const double gr = 0.6180339887498949;
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = nll_at(x1, sg, qq), f2 = nll_at(x2, sg, qq);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = nll_at(x1, sg, qq);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = nll_at(x2, sg, qq);
        }
      }
      return std::min(f1, f2);
    };
    double best_q = 0.0, best_nll = std::numeric_limits<double>::infinity();
    for (double qq = q_true - 0.6; qq <= q_true + 0.6 + 1e-9; qq += 0.05) {
      if (std::abs(qq) < 2e-4) continue;
      for (double sg = std::max(0.1, sigma - 0.4); sg <= sigma + 0.4 + 1e-9; sg += 0.02) {
        if (qq < 0.0 && sg >= -0.5 / qq) continue;  // mean undefined
        double v;
        try {
          v = profile(sg, qq);
        } catch (const std::exception&) {
          continue;
        }
        if (v < best_nll) {
          best_nll = v;
          best_q = qq;
        }
      }
    }
    d << "q=" << q_true << ": q_hat " << q_hat << ", mean_hat " << mean_hat << ", grid q "
      << best_q << "; ";
    if (std::abs(q_hat - q_true) > 0.15) ok = false;
    if (std::abs(mean_hat - 1.0) > 0.05) ok = false;
    if (std::abs(q_hat - best_q) > 0.1) ok = false;  // fitter agrees with the oracle
  }
  detail = d.str();
  return ok;
}

// --- 8: CLI determinism -----------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool criterion8(std::string& detail) {
#ifndef GGDFIT_CLI_PATH
  detail = "CLI path not configured";
  return false;
#else
  const std::string cli = GGDFIT_CLI_PATH;
  const std::string base = "acceptance_cli_out";
  std::string cfg_path = base + "_cells.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << "[{\"family\":\"lognormal\",\"grid_nx\":10,\"n_observations\":120,"
           "\"n_replicates\":3,\"seed\":99}]\n";
  }
  for (const char* run : {"1", "2"}) {
    const std::string cmd = cli + " experiment --config " + cfg_path + " --out-dir " + base +
                            run + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      detail = "experiment run " + std::string(run) + " failed";
      return false;
    }
  }
  const bool csv_same = slurp(base + "1/replicates.csv") == slurp(base + "2/replicates.csv");
  const bool json_same = slurp(base + "1/summary.json") == slurp(base + "2/summary.json");
  const bool nonempty = !slurp(base + "1/replicates.csv").empty();
  detail = std::string("replicates.csv ") + (csv_same ? "identical" : "DIFFER") +
           ", summary.json " + (json_same ? "identical" : "DIFFER");
  return csv_same && json_same && nonempty;
#endif
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;

  report(1, "special-case density equivalence (lognormal, gamma)", criterion1(detail), detail);
  report(2, "mean contract under the eta link", criterion2(detail), detail);

  std::printf("... running desk-scale experiment (2 cells x 200 replicates)\n");
  std::fflush(stdout);
  const auto outcome = run_desk_experiment();
  {
    // keep the replicate table for inspection
    std::ostringstream csv;
    write_replicates_csv(csv, outcome.results);
    std::ofstream os("acceptance_replicates.csv", std::ios::binary);
    os << csv.str();
  }
  report(3, "nested AIC-weight expectation on lognormal data", criterion3(outcome, detail),
         detail);
  report(4, "index bias pattern across families", criterion4(outcome, detail), detail);

  report(5, "residual calibration at n=2000", criterion5(detail), detail);
  report(6, "Laplace and bias-correction oracles", criterion6(detail), detail);
  report(7, "parameter recovery vs profile-likelihood oracle", criterion7(detail), detail);
  report(8, "byte-identical experiment outputs", criterion8(detail), detail);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 8 criteria passed (%.1f s)\n", 8 - g_failures, secs);
  return g_failures == 0 ? 0 : 1;
}
