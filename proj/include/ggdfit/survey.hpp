#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ggdfit/experiment.hpp"
#include "ggdfit/fit.hpp"
#include "ggdfit/index.hpp"

namespace ggdfit {

namespace survey_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_number(const std::string& s, const std::string& col, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw domain_error("survey csv line " + std::to_string(line_no) + ": column '" + col +
                       "' is not a number: '" + s + "'");
  }
}

}  // namespace survey_detail

// Survey CSV: header row with columns year, catch_kg, effort and optional
// x, y coordinates (any order). Catch in kg, effort in area-swept units;
// the fit uses log(effort) as an offset.
inline Dataset load_survey_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw domain_error("survey csv: empty file; required columns: year, catch_kg, effort");
  auto header = survey_detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* req : {"year", "catch_kg", "effort"}) {
    if (!col.count(req))
      throw domain_error(
          "survey csv: missing required column '" + std::string(req) +
          "'; required columns: year, catch_kg, effort (optional: x, y)");
  }
  const bool coords = col.count("x") && col.count("y");

  Dataset d;
  std::map<std::string, int> year_ids;
  std::vector<std::string> years_raw;
  std::vector<double> xs, ys;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = survey_detail::split_csv_line(line);
    if (f.size() < header.size())
      throw domain_error("survey csv line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(f.size()));
    const double catch_kg =
        survey_detail::parse_number(f[col["catch_kg"]], "catch_kg", line_no);
    const double effort = survey_detail::parse_number(f[col["effort"]], "effort", line_no);
    if (catch_kg < 0.0)
      throw domain_error("survey csv line " + std::to_string(line_no) + ": catch_kg < 0");
    if (!(effort > 0.0))
      throw domain_error("survey csv line " + std::to_string(line_no) + ": effort must be > 0");
    d.y.push_back(catch_kg);
    d.offset.push_back(std::log(effort));
    years_raw.push_back(f[col["year"]]);
    if (coords) {
      xs.push_back(survey_detail::parse_number(f[col["x"]], "x", line_no));
      ys.push_back(survey_detail::parse_number(f[col["y"]], "y", line_no));
    }
  }
  if (d.y.empty())
    throw domain_error("survey csv: no data rows; required columns: year, catch_kg, effort");

  // Year labels in sorted order so indices are stable across row orderings.
  std::vector<std::string> labels = years_raw;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i) year_ids[labels[i]] = static_cast<int>(i);
  d.year_labels = labels;
  for (const auto& yr : years_raw) d.year.push_back(year_ids[yr]);

  if (coords) {
    d.has_coords = true;
    d.coords.resize(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      d.coords(static_cast<Eigen::Index>(i), 0) = xs[i];
      d.coords(static_cast<Eigen::Index>(i), 1) = ys[i];
    }
  }
  return d;
}

inline Dataset load_survey_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw domain_error("survey csv: cannot open '" + path + "'");
  return load_survey_csv(in);
}

struct SurveyOptions {
  bool spatial = true;  // field on the positive predictor when coords exist
};

struct SurveyFit {
  std::string family;
  FitResult fit;
  bool converged = false;
  int refit_rung = 0;  // 0 base fit, 1 year-intercept prior, 2 response rescale
  std::vector<IndexEstimate> index_by_year;
  double mean_index_cv = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct SurveyResult {
  std::vector<std::string> year_labels;
  std::vector<SurveyFit> fits;
  std::vector<double> aic_weights;  // over converged fits, aligned with fits
};

namespace survey_detail {

inline std::vector<IndexEstimate> year_indices(const FitResult& f, const Dataset& d) {
  // Prediction points: observation locations (equal weight) when spatial,
  // otherwise a single nominal point.
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts;
  if (f.has_random_effects()) {
    pts = d.coords;
  } else {
    pts.resize(1, 2);
    pts.setZero();
  }
  const double area = 1.0 / static_cast<double>(pts.rows());
  std::vector<IndexEstimate> out;
  for (int t = 0; t < d.n_years(); ++t)
    out.push_back(index_bias_corrected(f, pts, area, t));
  return out;
}

inline double mean_cv(const std::vector<IndexEstimate>& idx) {
  double s = 0.0;
  int n = 0;
  for (const auto& e : idx) {
    if (std::isfinite(e.cv)) {
      s += e.cv;
      ++n;
    }
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace survey_detail

// Fit one family to survey data with the non-convergence ladder: base fit
// (collapsed fields are dropped automatically), then a weak N(0, 30^2) year
// intercept prior, then catch rescaled by 0.01.
inline SurveyFit fit_survey_family(Family fam, const Dataset& data, const SurveyOptions& opt) {
  SurveyFit out;
  out.family = family_name(fam);
  ModelSpec spec;
  spec.family = fam;
  spec.year_intercepts = !data.year.empty();
  spec.use_offset = !data.offset.empty();
  spec.spatial_pos = opt.spatial && data.has_coords;

  for (int rung = 0; rung < 3; ++rung) {
    ModelSpec s = spec;
    if (rung >= 1) s.year_prior_sd = 30.0;
    if (rung >= 2) s.response_scale = 0.01;
    try {
      auto f = fit(s, data);
      auto idx = survey_detail::year_indices(f, data);
      const double mcv = survey_detail::mean_cv(idx);
      const bool ok = check_convergence(f, std::isfinite(mcv) ? std::optional<double>(mcv)
                                                              : std::nullopt)
                          .verdict &&
                      f.optimizer_converged;
      if (ok || rung == 2) {
        out.status = "ok";
        out.fit = std::move(f);
        out.index_by_year = std::move(idx);
        out.mean_index_cv = mcv;
        out.converged = ok;
        out.refit_rung = rung;
        return out;
      }
    } catch (const std::exception& e) {
      out.status = e.what();
      if (rung == 2) {
        out.converged = false;
        out.refit_rung = rung;
        return out;
      }
    }
  }
  return out;  // unreachable
}

// All four families with AIC weights over the converged subset.
inline SurveyResult fit_survey(const Dataset& data, const SurveyOptions& opt = {}) {
  SurveyResult res;
  res.year_labels = data.year_labels;
  for (Family fam : kFitFamilies) res.fits.push_back(fit_survey_family(fam, data, opt));
  res.aic_weights.assign(res.fits.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> conv;
  std::vector<double> aics;
  for (std::size_t i = 0; i < res.fits.size(); ++i) {
    if (res.fits[i].converged && std::isfinite(res.fits[i].fit.aic)) {
      conv.push_back(i);
      aics.push_back(res.fits[i].fit.aic);
    }
  }
  if (!conv.empty()) {
    const auto w = aic_weights(aics);
    for (std::size_t k = 0; k < conv.size(); ++k) res.aic_weights[conv[k]] = w[k];
  }
  return res;
}

inline SurveyResult fit_survey_csv(const std::string& path, const SurveyOptions& opt = {}) {
  return fit_survey(load_survey_csv(path), opt);
}

}  // namespace ggdfit
