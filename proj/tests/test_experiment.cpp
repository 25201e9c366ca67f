#include "doctest.h"

#include <cmath>

#include "ggdfit/experiment.hpp"
#include "oracles.hpp"

using namespace ggdfit;

namespace {

SimConfig small_cell(Family fam) {
  SimConfig cfg;
  cfg.family = fam;
  cfg.grid_nx = 8;
  cfg.n_observations = 120;
  cfg.n_replicates = 1;
  cfg.matern_sd = 0.0;  // fixed-effects fits: fast
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("run_factorial: one replicate produces four fits of one dataset") {
  auto res = run_factorial({small_cell(Family::lognormal)}, 1, /*spatial=*/false);
  REQUIRE(res.size() == 4);
  for (const auto& r : res) {
    CHECK(r.status == "ok");
    CHECK(r.sim_family == "lognormal");
    CHECK(r.true_index == res[0].true_index);  // shared dataset
    CHECK(std::isfinite(r.aic));
    CHECK(std::isfinite(r.relative_error));
  }
  // weights over converged fits sum to 1
  double wsum = 0.0;
  int conv = 0;
  for (const auto& r : res)
    if (r.converged) {
      wsum += r.aic_weight;
      ++conv;
    }
  REQUIRE(conv > 0);
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  // the GGD row carries a q estimate
  for (const auto& r : res)
    if (r.fit_family == "gengamma") CHECK(std::isfinite(r.q_hat));
}

TEST_CASE("run_factorial is deterministic and thread-count invariant") {
  auto cell = small_cell(Family::gamma);
  cell.n_replicates = 3;
  auto a = run_factorial({cell}, 1, false);
  auto b = run_factorial({cell}, 1, false);
  auto c = run_factorial({cell}, 3, false);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index_value == b[i].index_value);
    CHECK(a[i].aic == b[i].aic);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].index_value == c[i].index_value);
    CHECK(a[i].aic == c[i].aic);
  }
  CHECK_THROWS_AS(run_factorial({}, 1), domain_error);
}

TEST_CASE("run_factorial survives fit failures and records their status") {
  // Encounter probability near zero: replicates with no positive catches
  // make the delta fits fail; the run keeps going.
  auto cell = small_cell(Family::lognormal);
  cell.n_observations = 30;
  cell.encounter_prob = 1e-3;
  cell.n_replicates = 2;
  auto res = run_factorial({cell}, 1, false);
  REQUIRE(res.size() >= 2);
  bool any_failure = false;
  for (const auto& r : res)
    if (r.status != "ok") any_failure = true;
  CHECK(any_failure);
}

TEST_CASE("run_factorial: spatial smoke replicate end to end") {
  SimConfig cfg;
  cfg.family = Family::gengamma;
  cfg.q = 0.5;
  cfg.grid_nx = 8;
  cfg.n_observations = 90;
  cfg.n_replicates = 1;
  cfg.seed = 31;
  auto res = run_factorial({cfg}, 1, /*spatial=*/true);
  REQUIRE(res.size() == 4);
  for (const auto& r : res) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.relative_error));
    CHECK(std::abs(r.relative_error) < 2.0);  // sanity, not a bias claim
  }
}

TEST_CASE("summarize") {
  std::vector<ReplicateResult> rows;
  auto mk = [](double re, double w, bool conv) {
    ReplicateResult r;
    r.sim_family = "lognormal";
    r.fit_family = "gengamma";
    r.relative_error = re;
    r.aic_weight = w;
    r.converged = conv;
    return r;
  };
  rows.push_back(mk(0.2, 0.4, true));
  {
    auto s = summarize(rows);
    REQUIRE(s.size() == 1);
    CHECK(s[0].median_relative_error == doctest::Approx(0.2));
    CHECK(s[0].median_aic_weight == doctest::Approx(0.4));
    CHECK(s[0].convergence_rate == 1.0);
  }
  rows.clear();
  rows.push_back(mk(-0.1, 0.1, true));
  rows.push_back(mk(0.0, 0.2, true));
  rows.push_back(mk(0.1, 0.3, true));
  rows.push_back(mk(5.0, 0.9, false));  // excluded from medians
  {
    auto s = summarize(rows);
    REQUIRE(s.size() == 1);
    CHECK(s[0].median_relative_error == doctest::Approx(0.0));
    CHECK(s[0].median_aic_weight == doctest::Approx(0.2));
    CHECK(s[0].n_total == 4);
    CHECK(s[0].n_converged == 3);
    CHECK(s[0].convergence_rate == doctest::Approx(0.75));
  }
  CHECK_THROWS_AS(summarize({}), domain_error);
}
