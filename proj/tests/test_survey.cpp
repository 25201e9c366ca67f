#include "doctest.h"

#include <cmath>
#include <sstream>

#include "ggdfit/survey.hpp"
#include "oracles.hpp"

using namespace ggdfit;

TEST_CASE("load_survey_csv: parsing and validation") {
  {
    std::istringstream in("year,catch_kg,effort\n2001,1.5,2.0\n2000,0,1.0\n2001,3,4\n");
    auto d = load_survey_csv(in);
    REQUIRE(d.y.size() == 3);
    CHECK(d.y[0] == 1.5);
    CHECK(d.offset[0] == doctest::Approx(std::log(2.0)));
    // year labels sorted; indices follow
    REQUIRE(d.year_labels.size() == 2);
    CHECK(d.year_labels[0] == "2000");
    CHECK(d.year[0] == 1);
    CHECK(d.year[1] == 0);
    CHECK_FALSE(d.has_coords);
  }
  {
    // column order free; coordinates picked up
    std::istringstream in("x,effort,year,catch_kg,y\n0.1,1,1999,2.5,0.9\n");
    auto d = load_survey_csv(in);
    CHECK(d.has_coords);
    CHECK(d.coords(0, 0) == 0.1);
    CHECK(d.coords(0, 1) == 0.9);
    CHECK(d.y[0] == 2.5);
  }
  {
    // effort all 1 -> offset contributes zero
    std::istringstream in("year,catch_kg,effort\n2000,1,1\n2000,2,1\n");
    auto d = load_survey_csv(in);
    CHECK(d.offset[0] == 0.0);
    CHECK(d.offset[1] == 0.0);
  }
  {
    std::istringstream in("year,weight\n");
    CHECK_THROWS_WITH_AS(load_survey_csv(in),
                         doctest::Contains("missing required column 'catch_kg'"), domain_error);
  }
  {
    // header-only file: error mentions the required columns
    std::istringstream in("year,catch_kg,effort\n");
    CHECK_THROWS_WITH_AS(load_survey_csv(in), doctest::Contains("required columns"),
                         domain_error);
  }
  {
    // malformed number carries the line number
    std::istringstream in("year,catch_kg,effort\n2000,1,2\n2000,abc,2\n");
    CHECK_THROWS_WITH_AS(load_survey_csv(in), doctest::Contains("line 3"), domain_error);
  }
  {
    std::istringstream in("year,catch_kg,effort\n2000,-1,2\n");
    CHECK_THROWS_AS(load_survey_csv(in), domain_error);
  }
  {
    std::istringstream in("year,catch_kg,effort\n2000,1,0\n");
    CHECK_THROWS_WITH_AS(load_survey_csv(in), doctest::Contains("effort"), domain_error);
  }
  {
    std::istringstream in("year,catch_kg,effort\n2000,1\n");
    CHECK_THROWS_WITH_AS(load_survey_csv(in), doctest::Contains("line 2"), domain_error);
  }
}

TEST_CASE("fit_survey: delta-gamma round trip recovers yearly indices") {
  // Synthetic survey from a delta-gamma with known yearly means and varying
  // effort; no spatial field.
  Rng rng(1234);
  const std::vector<double> year_mean = {0.8, 1.6, 1.1};
  const double p_enc = 0.6, cv = 0.7;
  const double shape = 1.0 / (cv * cv);
  std::ostringstream csv;
  csv << "year,catch_kg,effort\n";
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 500; ++i) {
      const double effort = 0.5 + rng.uniform();
      double c = 0.0;
      if (rng.bernoulli(p_enc)) c = rng.gamma(shape, year_mean[t] * effort / shape);
      csv << (2000 + t) << "," << c << "," << effort << "\n";
    }
  }
  std::istringstream in(csv.str());
  auto d = load_survey_csv(in);
  auto res = fit_survey(d);
  REQUIRE(res.fits.size() == 4);
  REQUIRE(res.year_labels.size() == 3);

  const SurveyFit* gamma_fit = nullptr;
  for (const auto& f : res.fits)
    if (f.family == "gamma") gamma_fit = &f;
  REQUIRE(gamma_fit != nullptr);
  CHECK(gamma_fit->converged);
  CHECK(gamma_fit->refit_rung == 0);
  REQUIRE(gamma_fit->index_by_year.size() == 3);
  for (int t = 0; t < 3; ++t) {
    // density index: p * yearly mean (unit prediction area, effort removed)
    CHECK(gamma_fit->index_by_year[static_cast<std::size_t>(t)].bias_corrected_value ==
          doctest::Approx(p_enc * year_mean[static_cast<std::size_t>(t)]).epsilon(0.10));
  }

  // weights over converged fits sum to 1
  double wsum = 0.0;
  for (double w : res.aic_weights)
    if (std::isfinite(w)) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_survey: all-zero year is handled through the year prior rung") {
  // One year with zero catches makes its encounter intercept diverge; the
  // weak N(0, 30^2) prior rung keeps it finite.
  Rng rng(77);
  std::ostringstream csv;
  csv << "year,catch_kg,effort\n";
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 120; ++i) {
      double c = 0.0;
      if (t == 0 && rng.bernoulli(0.5)) c = rng.gamma(2.0, 0.5);
      csv << (2010 + t) << "," << c << ",1\n";
    }
  std::istringstream in(csv.str());
  auto d = load_survey_csv(in);
  auto res = fit_survey(d);
  for (const auto& f : res.fits) {
    if (f.family == "tweedie") continue;  // no binomial separation there
    CHECK(f.refit_rung >= 1);
    if (f.converged) {
      for (const auto& e : f.index_by_year) CHECK(std::isfinite(e.bias_corrected_value));
      // the empty year's index is pushed toward zero
      CHECK(f.index_by_year[1].bias_corrected_value < 0.05);
    }
  }
}

TEST_CASE("fit_survey: spatial survey smoke test") {
  Rng rng(99);
  const int n = 100;
  std::ostringstream csv;
  csv << "year,catch_kg,effort,x,y\n";
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  PointSet ps{coords, {}};
  auto field = sample_field(rng, ps, {0.5, 0.8});
  for (int i = 0; i < n; ++i) {
    const double mu = std::exp(-0.32 + field.values[i]);
    double c = rng.bernoulli(0.7) ? rng.gamma(4.0, mu / 4.0) : 0.0;
    csv << "2000," << c << ",1," << coords(i, 0) << "," << coords(i, 1) << "\n";
  }
  std::istringstream in(csv.str());
  auto d = load_survey_csv(in);
  REQUIRE(d.has_coords);
  SurveyOptions opt;
  auto sf = fit_survey_family(Family::gamma, d, opt);
  CHECK(sf.status == "ok");
  REQUIRE(sf.index_by_year.size() == 1);
  CHECK(std::isfinite(sf.index_by_year[0].bias_corrected_value));
  CHECK(sf.index_by_year[0].bias_corrected_value > 0.0);
}
