// Command-line surface: simulate survey-like datasets, run the factorial
// simulation-estimation experiment, fit survey CSVs, and emit residual and
// summary reports. Exit codes: 0 success, 1 validation error, 2 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ggdfit/diagnostics.hpp"
#include "ggdfit/experiment.hpp"
#include "ggdfit/outputs.hpp"
#include "ggdfit/survey.hpp"

namespace fs = std::filesystem;
using namespace ggdfit;

namespace {

struct CommonOpts {
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--out-dir", c.out_dir, "Output directory (created if missing)");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--threads", c.threads, "Worker threads for replicates")
      ->check(CLI::PositiveNumber);
}

void add_sim_options(CLI::App* cmd, SimConfig& cfg, std::string& family) {
  cmd->add_option("--family", family, "Simulation family: gengamma|lognormal|gamma|tweedie");
  cmd->add_option("--q", cfg.q, "Generalized-gamma shape Q (gengamma family)");
  cmd->add_option("--grid", cfg.grid_nx, "Prediction grid resolution (NxN)");
  cmd->add_option("--n-obs", cfg.n_observations, "Sampling locations per replicate");
  cmd->add_option("--replicates", cfg.n_replicates, "Replicates per cell");
  cmd->add_option("--cv", cfg.target_cv, "Observation-error CV target");
  cmd->add_option("--encounter-prob", cfg.encounter_prob, "Mean encounter probability");
  cmd->add_option("--catch-rate", cfg.mean_catch_rate, "Mean positive catch rate");
  cmd->add_option("--tweedie-power", cfg.tweedie_power, "Tweedie power p in (1,2)");
  cmd->add_option("--range", cfg.matern_range, "Matern correlation range");
  cmd->add_option("--sd", cfg.matern_sd, "Matern marginal SD");
  cmd->add_flag("--shared-encounter-field", cfg.shared_field_on_encounter,
                "Sensitivity override: field also shifts the encounter logit");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw domain_error("cannot create output directory '" + dir + "'");
}

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

// simulate: one dataset as survey CSV plus the generating truth.
int cmd_simulate(const CommonOpts& common, SimConfig cfg) {
  cfg.seed = common.seed;
  cfg.validate();
  ensure_dir(common.out_dir);
  Rng rng(cfg.seed);
  auto [data, truth] = simulate_dataset(rng, cfg);
  std::ostringstream csv;
  csv << "year,catch_kg,effort,x,y\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    csv << "2000," << outputs_detail::fmt(data.y[i]) << ",1,"
        << outputs_detail::fmt(data.coords(static_cast<Eigen::Index>(i), 0)) << ","
        << outputs_detail::fmt(data.coords(static_cast<Eigen::Index>(i), 1)) << "\n";
  write_text_file(join(common.out_dir, "dataset.csv"), csv.str());
  nlohmann::ordered_json j;
  j["config"] = config_json(cfg);
  j["true_index"] = truth.value;
  write_text_file(join(common.out_dir, "truth.json"), j.dump(2) + "\n");
  std::cout << "wrote dataset.csv and truth.json to " << common.out_dir << "\n";
  return 0;
}

// experiment: factorial run from a JSON config (single object or list of
// cells), falling back to the flag-configured single cell.
int cmd_experiment(const CommonOpts& common, SimConfig flag_cfg, const std::string& config_path,
                   bool no_spatial) {
  std::vector<SimConfig> cells;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw domain_error("cannot open config '" + config_path + "'");
    nlohmann::json doc = nlohmann::json::parse(in);
    const auto& arr = doc.is_array() ? doc : (doc.contains("cells") ? doc["cells"] : doc);
    if (arr.is_array())
      for (const auto& c : arr) cells.push_back(config_from_json(c));
    else
      cells.push_back(config_from_json(arr));
  } else {
    cells.push_back(flag_cfg);
  }
  for (auto& c : cells) {
    if (c.seed == 1) c.seed = common.seed;  // file cells may carry their own
    c.validate();
  }
  ensure_dir(common.out_dir);

  auto results = run_factorial(cells, common.threads, !no_spatial);

  std::ostringstream csv;
  write_replicates_csv(csv, results);
  write_text_file(join(common.out_dir, "replicates.csv"), csv.str());
  write_text_file(join(common.out_dir, "summary.json"),
                  summary_json(cells, results).dump(2) + "\n");
  write_text_file(join(common.out_dir, "relative_error_violin.svg"),
                  svg_violin_panel(results, false, "relative error of the biomass index"));
  write_text_file(join(common.out_dir, "aic_weight_violin.svg"),
                  svg_violin_panel(results, true, "AIC weight"));
  std::cout << "wrote replicates.csv, summary.json, and violin SVGs to " << common.out_dir
            << "\n";
  return 0;
}

// fit: all four families on a survey CSV.
int cmd_fit(const CommonOpts& common, const std::string& csv_path, bool no_spatial) {
  ensure_dir(common.out_dir);
  SurveyOptions opt;
  opt.spatial = !no_spatial;
  auto res = fit_survey_csv(csv_path, opt);
  auto doc = survey_json(res);
  doc["csv"] = csv_path;
  doc["spatial"] = opt.spatial;
  write_text_file(join(common.out_dir, "fit.json"), doc.dump(2) + "\n");
  std::cout << "wrote fit.json to " << common.out_dir << "\n";
  for (std::size_t i = 0; i < res.fits.size(); ++i) {
    const auto& f = res.fits[i];
    std::cout << f.family << ": " << (f.converged ? "converged" : "NOT converged")
              << " aic=" << f.fit.aic << " rung=" << f.refit_rung << "\n";
  }
  return 0;
}

// residuals: refit the recorded family on the recorded CSV and emit
// randomized-quantile-residual QQ data and plot.
int cmd_residuals(const CommonOpts& common, const std::string& fit_path,
                  const std::string& family) {
  std::ifstream in(fit_path);
  if (!in) throw domain_error("cannot open fit file '" + fit_path + "'");
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.contains("csv")) throw domain_error("fit file lacks the source csv path");
  auto data = load_survey_csv(doc["csv"].get<std::string>());
  SurveyOptions opt;
  opt.spatial = doc.value("spatial", true);

  // Pick the requested family, or the best-AIC converged fit.
  std::string chosen = family;
  if (chosen.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : doc["fits"]) {
      if (!f.value("converged", false) || f["aic"].is_null()) continue;
      if (f["aic"].get<double>() < best) {
        best = f["aic"].get<double>();
        chosen = f["family"].get<std::string>();
      }
    }
    if (chosen.empty()) throw domain_error("no converged fit recorded; pass --family");
  }
  auto sf = fit_survey_family(family_from_name(chosen), data, opt);
  if (sf.status != "ok") throw numerical_error("refit failed: " + sf.status);

  ensure_dir(common.out_dir);
  Rng rng(common.seed);
  auto rs = rqr(rng, sf.fit, data);
  auto qq = qq_data(rs);
  std::ostringstream csv;
  csv << "theoretical,empirical\n";
  for (const auto& p : qq)
    csv << outputs_detail::fmt(p.theoretical) << "," << outputs_detail::fmt(p.empirical)
        << "\n";
  write_text_file(join(common.out_dir, "qq.csv"), csv.str());
  write_text_file(join(common.out_dir, "qq.svg"),
                  svg_qq_plot(qq, chosen + " quantile residuals"));
  std::cout << "wrote qq.csv and qq.svg (" << rs.residuals.size() << " residuals, family "
            << chosen << ", seed " << rs.seed << ") to " << common.out_dir << "\n";
  return 0;
}

// report: summaries and plots from a saved replicate table.
int cmd_report(const CommonOpts& common, const std::string& replicates_path) {
  std::ifstream in(replicates_path);
  if (!in) throw domain_error("cannot open '" + replicates_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw domain_error("empty replicate table");
  auto header = survey_detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* req : {"replicate", "sim_family", "fit_family", "converged",
                          "relative_error", "aic_weight"})
    if (!col.count(req))
      throw domain_error("replicate table missing column '" + std::string(req) + "'");
  auto get_num = [](const std::string& s) {
    return s == "NA" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
  };
  std::vector<ReplicateResult> results;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = survey_detail::split_csv_line(line);
    if (f.size() < header.size())
      throw domain_error("replicate table line " + std::to_string(line_no) + ": short row");
    ReplicateResult r;
    r.replicate = static_cast<int>(std::stol(f[col["replicate"]]));
    r.sim_family = f[col["sim_family"]];
    if (col.count("sim_q")) r.sim_q = get_num(f[col["sim_q"]]);
    r.fit_family = f[col["fit_family"]];
    r.converged = f[col["converged"]] == "1";
    r.relative_error = get_num(f[col["relative_error"]]);
    r.aic_weight = get_num(f[col["aic_weight"]]);
    results.push_back(std::move(r));
  }
  if (results.empty()) throw domain_error("replicate table has no rows");
  ensure_dir(common.out_dir);
  write_text_file(join(common.out_dir, "summary.json"),
                  summary_json({}, results).dump(2) + "\n");
  write_text_file(join(common.out_dir, "relative_error_violin.svg"),
                  svg_violin_panel(results, false, "relative error of the biomass index"));
  write_text_file(join(common.out_dir, "aic_weight_violin.svg"),
                  svg_violin_panel(results, true, "AIC weight"));
  std::cout << "wrote summary.json and violin SVGs to " << common.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Delta-GLM catch-rate models with a mean-CV generalized gamma family,\n"
      "optional Matern spatial random fields (Laplace approximation), area-\n"
      "weighted biomass indices with bias correction, and a simulation-\n"
      "estimation experiment harness.\n\n"
      "Units: catch_kg in kilograms, effort in area-swept units (log effort\n"
      "enters as an offset), coordinates x/y in arbitrary planar units."};
  app.require_subcommand(1);

  CommonOpts common;
  SimConfig cfg;
  std::string family = "gengamma";
  std::string config_path, csv_path, fit_path, resid_family, replicates_path;
  bool no_spatial = false;

  auto* sim = app.add_subcommand("simulate", "Simulate one survey dataset to CSV");
  add_common(sim, common);
  add_sim_options(sim, cfg, family);

  auto* exp = app.add_subcommand("experiment", "Run the factorial simulation experiment");
  add_common(exp, common);
  add_sim_options(exp, cfg, family);
  exp->add_option("--config", config_path, "JSON config: one cell object or a list of cells");
  exp->add_flag("--no-spatial", no_spatial, "Fit without spatial random fields");

  auto* fitc = app.add_subcommand("fit", "Fit all four families to a survey CSV");
  add_common(fitc, common);
  fitc->add_option("--csv", csv_path, "Survey CSV (year,catch_kg,effort[,x,y])")->required();
  fitc->add_flag("--no-spatial", no_spatial, "Ignore coordinates even when present");

  auto* res = app.add_subcommand("residuals", "Quantile-residual QQ data/plot for a saved fit");
  add_common(res, common);
  res->add_option("--fit", fit_path, "fit.json produced by the fit subcommand")->required();
  res->add_option("--family", resid_family, "Family to diagnose (default: best AIC)");

  auto* rep = app.add_subcommand("report", "Summaries and plots from a replicate table");
  add_common(rep, common);
  rep->add_option("--input", replicates_path, "replicates.csv from an experiment run")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.family = family_from_name(family);
    cfg.seed = common.seed;
    if (sim->parsed()) return cmd_simulate(common, cfg);
    if (exp->parsed()) return cmd_experiment(common, cfg, config_path, no_spatial);
    if (fitc->parsed()) return cmd_fit(common, csv_path, no_spatial);
    if (res->parsed()) return cmd_residuals(common, fit_path, resid_family);
    if (rep->parsed()) return cmd_report(common, replicates_path);
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
