#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ggdfit/diagnostics.hpp"
#include "ggdfit/experiment.hpp"
#include "ggdfit/survey.hpp"

namespace ggdfit {

namespace outputs_detail {

// Deterministic shortest-roundtrip-ish formatting; "." decimal always.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace outputs_detail

// Replicate table. Wall times are deliberately omitted so identical seeds
// produce byte-identical files.
inline void write_replicates_csv(std::ostream& os, const std::vector<ReplicateResult>& results) {
  using outputs_detail::fmt;
  os << "cell,replicate,seed,sim_family,sim_q,fit_family,status,converged,true_index,"
        "index,naive_index,relative_error,naive_relative_error,index_cv,aic,aic_weight,q_hat\n";
  for (const auto& r : results) {
    std::string status = r.status;
    for (auto& c : status)
      if (c == ',' || c == '\n') c = ';';
    os << r.cell << ',' << r.replicate << ',' << r.seed << ',' << r.sim_family << ','
       << fmt(r.sim_q) << ',' << r.fit_family << ',' << status << ',' << (r.converged ? 1 : 0)
       << ',' << fmt(r.true_index) << ',' << fmt(r.index_value) << ',' << fmt(r.naive_index)
       << ',' << fmt(r.relative_error) << ',' << fmt(r.naive_relative_error) << ','
       << fmt(r.index_cv) << ',' << fmt(r.aic) << ',' << fmt(r.aic_weight) << ','
       << fmt(r.q_hat) << '\n';
  }
}

inline nlohmann::ordered_json config_json(const SimConfig& cfg) {
  nlohmann::ordered_json j;
  j["grid_nx"] = cfg.grid_nx;
  j["n_observations"] = cfg.n_observations;
  j["n_replicates"] = cfg.n_replicates;
  j["family"] = family_name(cfg.family);
  if (cfg.family == Family::gengamma) j["q"] = cfg.q;
  j["target_cv"] = cfg.target_cv;
  j["encounter_prob"] = cfg.encounter_prob;
  j["mean_catch_rate"] = cfg.mean_catch_rate;
  j["tweedie_power"] = cfg.tweedie_power;
  j["matern_range"] = cfg.matern_range;
  j["matern_sd"] = cfg.matern_sd;
  j["shared_field_on_encounter"] = cfg.shared_field_on_encounter;
  j["seed"] = cfg.seed;
  return j;
}

inline SimConfig config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  if (j.contains("grid_nx")) cfg.grid_nx = j["grid_nx"].get<int>();
  if (j.contains("n_observations")) cfg.n_observations = j["n_observations"].get<int>();
  if (j.contains("n_replicates")) cfg.n_replicates = j["n_replicates"].get<int>();
  if (j.contains("family")) cfg.family = family_from_name(j["family"].get<std::string>());
  if (j.contains("q")) cfg.q = j["q"].get<double>();
  if (j.contains("target_cv")) cfg.target_cv = j["target_cv"].get<double>();
  if (j.contains("encounter_prob")) cfg.encounter_prob = j["encounter_prob"].get<double>();
  if (j.contains("mean_catch_rate")) cfg.mean_catch_rate = j["mean_catch_rate"].get<double>();
  if (j.contains("tweedie_power")) cfg.tweedie_power = j["tweedie_power"].get<double>();
  if (j.contains("matern_range")) cfg.matern_range = j["matern_range"].get<double>();
  if (j.contains("matern_sd")) cfg.matern_sd = j["matern_sd"].get<double>();
  if (j.contains("shared_field_on_encounter"))
    cfg.shared_field_on_encounter = j["shared_field_on_encounter"].get<bool>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

// Summary document: configuration echo with seeds plus per-cell medians.
inline nlohmann::ordered_json summary_json(const std::vector<SimConfig>& cells,
                                           const std::vector<ReplicateResult>& results) {
  nlohmann::ordered_json doc;
  doc["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) doc["cells"].push_back(config_json(c));
  doc["summaries"] = nlohmann::ordered_json::array();
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
  };
  for (const auto& s : summarize(results)) {
    nlohmann::ordered_json j;
    j["sim_family"] = s.sim_family;
    j["sim_q"] = num(s.sim_q);
    j["fit_family"] = s.fit_family;
    j["n_total"] = s.n_total;
    j["n_converged"] = s.n_converged;
    j["convergence_rate"] = s.convergence_rate;
    j["median_relative_error"] = num(s.median_relative_error);
    j["median_aic_weight"] = num(s.median_aic_weight);
    doc["summaries"].push_back(std::move(j));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// SVG plots (self-contained, no dependencies).

namespace svg_detail {

inline std::string header(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " +
         std::to_string(w) + " " + std::to_string(h) + "\">\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke,
                        double width = 1.0) {
  using outputs_detail::fmt;
  return "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
         fmt(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size = 12) {
  using outputs_detail::fmt;
  return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" +
         std::to_string(size) + "\" font-family=\"sans-serif\">" + s + "</text>\n";
}

// Gaussian kernel density on a fixed grid, Silverman bandwidth.
inline std::vector<double> kde(const std::vector<double>& v, const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  double m = 0.0, s2 = 0.0;
  for (double x : v) m += x;
  m /= n;
  for (double x : v) s2 += (x - m) * (x - m);
  const double sd = std::sqrt(s2 / std::max(1.0, n - 1.0));
  const double h = std::max(1e-6, 1.06 * sd * std::pow(n, -0.2));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double x : v) {
      const double z = (grid[g] - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc / (n * h * std::sqrt(2.0 * M_PI));
  }
  return out;
}

}  // namespace svg_detail

// QQ plot of randomized quantile residuals against the 1:1 line.
inline std::string svg_qq_plot(const std::vector<QQPair>& qq, const std::string& title = "") {
  using outputs_detail::fmt;
  const int w = 480, h = 480, pad = 50;
  double lo = -1.0, hi = 1.0;
  for (const auto& p : qq) {
    lo = std::min({lo, p.theoretical, p.empirical});
    hi = std::max({hi, p.theoretical, p.empirical});
  }
  lo -= 0.3;
  hi += 0.3;
  auto sx = [&](double v) { return pad + (v - lo) / (hi - lo) * (w - 2 * pad); };
  auto sy = [&](double v) { return h - pad - (v - lo) / (hi - lo) * (h - 2 * pad); };
  std::string s = svg_detail::header(w, h);
  s += svg_detail::line(pad, h - pad, w - pad, h - pad, "black");
  s += svg_detail::line(pad, pad, pad, h - pad, "black");
  s += svg_detail::line(sx(lo + 0.3), sy(lo + 0.3), sx(hi - 0.3), sy(hi - 0.3), "#888");
  for (const auto& p : qq)
    s += "<circle cx=\"" + fmt(sx(p.theoretical)) + "\" cy=\"" + fmt(sy(p.empirical)) +
         "\" r=\"2\" fill=\"#1f4e8c\" fill-opacity=\"0.6\"/>\n";
  s += svg_detail::text(pad, 24, title.empty() ? "quantile residuals" : title, 14);
  s += svg_detail::text(w / 2 - 60, h - 12, "theoretical quantile");
  s += "<text x=\"16\" y=\"" + std::to_string(h / 2) +
       "\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 " +
       std::to_string(h / 2) + ")\">empirical quantile</text>\n";
  s += "</svg>\n";
  return s;
}

// Violin panel of a per-replicate metric grouped by fitted family within
// each simulation cell, median marked.
inline std::string svg_violin_panel(const std::vector<ReplicateResult>& results,
                                    bool use_aic_weight, const std::string& title) {
  using outputs_detail::fmt;
  struct Group {
    std::string label;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  for (const auto& r : results) {
    if (!r.converged) continue;
    const double v = use_aic_weight ? r.aic_weight : r.relative_error;
    if (!std::isfinite(v)) continue;
    std::string label = r.sim_family;
    if (std::isfinite(r.sim_q)) label += "(q=" + fmt(r.sim_q) + ")";
    label += " / " + r.fit_family;
    Group* g = nullptr;
    for (auto& gg : groups)
      if (gg.label == label) g = &gg;
    if (!g) {
      groups.push_back({label, {}});
      g = &groups.back();
    }
    g->values.push_back(v);
  }

  const int per = 90, pad = 60, h = 420;
  const int w = pad * 2 + per * std::max<int>(1, static_cast<int>(groups.size()));
  double lo = use_aic_weight ? 0.0 : -0.5, hi = use_aic_weight ? 1.0 : 0.5;
  for (const auto& g : groups)
    for (double v : g.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  auto sy = [&](double v) { return h - pad - (v - lo) / (hi - lo) * (h - 2 * pad); };
  std::string s = svg_detail::header(w, h);
  s += svg_detail::text(pad, 24, title, 14);
  s += svg_detail::line(pad, sy(0.0), w - pad, sy(0.0), "#bbb");
  std::vector<double> grid(60);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (grid.size() - 1);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double cx = pad + per * (static_cast<double>(gi) + 0.5);
    const auto dens = svg_detail::kde(groups[gi].values, grid);
    double dmax = 1e-12;
    for (double d : dens) dmax = std::max(dmax, d);
    std::string pts;
    for (std::size_t i = 0; i < grid.size(); ++i)
      pts += fmt(cx + dens[i] / dmax * per * 0.4) + "," + fmt(sy(grid[i])) + " ";
    for (std::size_t i = grid.size(); i-- > 0;)
      pts += fmt(cx - dens[i] / dmax * per * 0.4) + "," + fmt(sy(grid[i])) + " ";
    s += "<polygon points=\"" + pts + "\" fill=\"#7aa6d9\" fill-opacity=\"0.5\" "
         "stroke=\"#1f4e8c\"/>\n";
    const double med = experiment_detail::median_of(groups[gi].values);
    s += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(sy(med)) + "\" r=\"3\" fill=\"black\"/>\n";
    s += "<text x=\"" + fmt(cx) + "\" y=\"" + std::to_string(h - pad + 16) +
         "\" font-size=\"9\" font-family=\"sans-serif\" text-anchor=\"middle\">" +
         groups[gi].label + "</text>\n";
  }
  // axis ticks
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s += svg_detail::line(pad - 4, sy(v), pad, sy(v), "black");
    s += svg_detail::text(6, sy(v) + 4, fmt(std::round(v * 100.0) / 100.0), 10);
  }
  s += "</svg>\n";
  return s;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw domain_error("cannot write '" + path + "'");
  os << content;
  if (!os) throw domain_error("write failed for '" + path + "'");
}

// Survey fit report.
inline nlohmann::ordered_json survey_json(const SurveyResult& res) {
  using nlohmann::ordered_json;
  auto num = [](double v) {
    return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
  };
  ordered_json doc;
  doc["years"] = res.year_labels;
  doc["fits"] = ordered_json::array();
  for (std::size_t i = 0; i < res.fits.size(); ++i) {
    const auto& f = res.fits[i];
    ordered_json j;
    j["family"] = f.family;
    j["status"] = f.status;
    j["converged"] = f.converged;
    j["refit_rung"] = f.refit_rung;
    j["aic"] = num(f.fit.aic);
    j["aic_weight"] = num(res.aic_weights[i]);
    j["nll"] = num(f.fit.nll);
    j["k_params"] = f.fit.k_params;
    j["max_gradient"] = num(f.fit.max_gradient);
    j["hessian_pd"] = f.fit.hessian_pd;
    j["refit_actions"] = f.fit.refit_actions;
    ordered_json params = ordered_json::array();
    for (std::size_t p = 0; p < f.fit.param_names.size(); ++p) {
      ordered_json pj;
      pj["name"] = f.fit.param_names[p];
      pj["value"] = num(f.fit.theta[static_cast<Eigen::Index>(p)]);
      params.push_back(std::move(pj));
    }
    j["parameters"] = std::move(params);
    ordered_json idx = ordered_json::array();
    for (std::size_t t = 0; t < f.index_by_year.size(); ++t) {
      ordered_json tj;
      tj["year"] = t < res.year_labels.size() ? res.year_labels[t] : std::to_string(t);
      tj["index"] = num(f.index_by_year[t].bias_corrected_value);
      tj["naive_index"] = num(f.index_by_year[t].naive_value);
      tj["se"] = num(f.index_by_year[t].standard_error);
      tj["cv"] = num(f.index_by_year[t].cv);
      idx.push_back(std::move(tj));
    }
    j["index_by_year"] = std::move(idx);
    doc["fits"].push_back(std::move(j));
  }
  return doc;
}

}  // namespace ggdfit
