#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ggdfit/families.hpp"

namespace ggdfit {

struct Dataset {
  std::vector<double> y;            // responses, >= 0
  std::vector<double> offset;       // log effort; empty means zero offset
  std::vector<int> year;            // index into year_labels; empty means no year structure
  std::vector<std::string> year_labels;
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;
  bool has_coords = false;

  std::size_t size() const { return y.size(); }
  double offset_at(std::size_t i) const { return offset.empty() ? 0.0 : offset[i]; }
  int n_years() const { return year_labels.empty() ? 1 : static_cast<int>(year_labels.size()); }
};

struct ModelSpec {
  Family family = Family::tweedie;
  bool year_intercepts = false;
  bool use_offset = false;
  bool spatial_pos = false;      // field on the positive (or Tweedie) predictor
  bool spatial_bin = false;      // field on the encounter predictor
  double year_prior_sd = 0.0;    // 0 disables the weak year-intercept prior
  double response_scale = 1.0;   // catch multiplied by this before fitting

  bool is_delta() const { return family != Family::tweedie; }
};

struct ConvergenceReport {
  bool gradient_ok = false;       // max |marginal gradient| < 0.005
  bool hessian_pd = false;
  bool fields_off_boundary = true;  // no field SD < 0.01
  bool index_cv_ok = true;          // mean index CV < 1 (when supplied)
  bool verdict = false;
  std::vector<std::string> refit_actions;
};

}  // namespace ggdfit
