#include "sdid_event/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sdid_event/dgp.hpp"
#include "sdid_event/errors.hpp"
#include "sdid_event/estimators.hpp"
#include "sdid_event/inference.hpp"
#include "sdid_event/panel.hpp"

namespace sdid::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct EstimateArgs {
  std::string input;
  CsvColumns columns;
  bool disag = false;
  std::string placebo;  // empty, "all", or a positive integer
  std::string vce = "bootstrap";
  int brep = 50;
  std::uint64_t seed = 0;
  double level = 0.95;
  double tol = 1e-10;
  int max_iter = 10'000;
  bool uniform_weights = false;
  std::string dump_weights;
  std::string format = "text";
  std::string output;
  int threads = 1;
};

struct GenerateArgs {
  std::string spec_path;
  std::string output;
  std::string effects;
  std::optional<std::uint64_t> seed;
};

// One display row of the main table.
struct TableRow {
  std::string name;
  double estimate;
  std::optional<double> se;
  std::optional<std::pair<double, double>> ci;
  std::optional<int> n_tr;
};

std::optional<double> se_for(const VarianceResult& variance, int ell) {
  if (variance.method == VarianceMethod::none) return std::nullopt;
  const auto it = variance.se_by_ell.find(ell);
  if (it == variance.se_by_ell.end() || std::isnan(it->second)) return std::nullopt;
  return it->second;
}

std::vector<TableRow> build_rows(const EstimationResult& result,
                                 const VarianceResult& variance,
                                 int placebo_rows, double level) {
  std::vector<TableRow> rows;
  auto push = [&](std::string name, double estimate, std::optional<double> se,
                  std::optional<int> n_tr) {
    TableRow row{std::move(name), estimate, se, std::nullopt, n_tr};
    if (se) row.ci = confidence_interval(estimate, *se, level);
    rows.push_back(std::move(row));
  };

  std::optional<double> se_att;
  if (variance.method != VarianceMethod::none && !std::isnan(variance.se_att))
    se_att = variance.se_att;
  push("ATT", result.att, se_att, std::nullopt);

  for (const EventEstimate& e : result.event)
    push("Effect_" + std::to_string(e.ell), e.tau, se_for(variance, e.ell), e.n_tr);

  for (const EventEstimate& e : result.placebo) {
    if (-e.ell >= placebo_rows) continue;
    push("Placebo_" + std::to_string(e.ell), e.tau, se_for(variance, e.ell), e.n_tr);
  }
  return rows;
}

void write_text(const EstimationResult& result, const VarianceResult& variance,
                const std::vector<TableRow>& rows, const EstimateArgs& args,
                bool disag, std::ostream& out) {
  const CohortStructure& s = result.structure;

  out << "synthetic difference-in-differences event study\n";
  out << "  cohorts: " << s.cohorts.size() << "   T_post: " << s.t_post
      << "   T_tr: " << s.t_tr;
  if (variance.method == VarianceMethod::none) {
    out << "   vce: none\n";
  } else {
    out << "   vce: "
        << (variance.method == VarianceMethod::bootstrap ? "bootstrap" : "placebo")
        << " (B=" << variance.reps << ", seed=" << variance.seed
        << ", level=" << fmt6(args.level) << ")\n";
  }
  out << '\n';

  auto cell = [](const std::string& text, int width) {
    std::string pad;
    if (static_cast<int>(text.size()) < width)
      pad.assign(width - text.size(), ' ');
    return pad + text;
  };

  out << "  row          " << cell("estimate", 13) << cell("se", 13)
      << cell("ci_lower", 13) << cell("ci_upper", 13) << cell("N_tr", 8) << '\n';
  for (const TableRow& row : rows) {
    std::string name = row.name;
    name.resize(13, ' ');
    out << "  " << name << cell(fmt6(row.estimate), 13)
        << cell(row.se ? fmt6(*row.se) : "", 13)
        << cell(row.ci ? fmt6(row.ci->first) : "", 13)
        << cell(row.ci ? fmt6(row.ci->second) : "", 13)
        << cell(row.n_tr ? std::to_string(*row.n_tr) : "", 8) << '\n';
  }

  if (disag) {
    out << "\n  cohort-level estimates (disag)\n";
    out << "  " << "cohort     " << cell("N_tr", 6) << "   row          "
        << cell("estimate", 13) << '\n';
    for (std::size_t k = 0; k < result.cohorts.size(); ++k) {
      const CohortEstimate& c = result.cohorts[k];
      const Cohort& info = s.cohorts[k];
      auto line = [&](const std::string& label, double value) {
        std::string cohort = std::to_string(c.cohort);
        cohort.resize(11, ' ');
        std::string name = label;
        name.resize(13, ' ');
        out << "  " << cohort << cell(std::to_string(info.n_tr), 6) << "   " << name
            << cell(fmt6(value), 13) << '\n';
      };
      line("tau", c.tau);
      for (std::size_t l = 0; l < c.dynamic.size(); ++l)
        line("Effect_" + std::to_string(l + 1), c.dynamic[l]);
    }
  }
}

void write_csv(const EstimationResult& result, const std::vector<TableRow>& rows,
               bool disag, std::ostream& out) {
  out << "row,estimate,se,ci_lower,ci_upper,n_tr\n";
  for (const TableRow& row : rows) {
    out << row.name << ',' << fmt17(row.estimate) << ','
        << (row.se ? fmt17(*row.se) : "") << ','
        << (row.ci ? fmt17(row.ci->first) : "") << ','
        << (row.ci ? fmt17(row.ci->second) : "") << ','
        << (row.n_tr ? std::to_string(*row.n_tr) : "") << '\n';
  }
  if (disag) {
    out << "\ncohort,n_tr,row,estimate\n";
    for (std::size_t k = 0; k < result.cohorts.size(); ++k) {
      const CohortEstimate& c = result.cohorts[k];
      const int n_tr = result.structure.cohorts[k].n_tr;
      out << c.cohort << ',' << n_tr << ",tau," << fmt17(c.tau) << '\n';
      for (std::size_t l = 0; l < c.dynamic.size(); ++l)
        out << c.cohort << ',' << n_tr << ",Effect_" << (l + 1) << ','
            << fmt17(c.dynamic[l]) << '\n';
    }
  }
}

ordered_json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

ordered_json solver_json(const SolverDiagnostics& d) {
  return {{"objective", d.objective},
          {"duality_gap", d.duality_gap},
          {"iterations", d.iterations},
          {"converged", d.converged}};
}

void write_json(const PanelDataset& panel, const EstimationResult& result,
                const VarianceResult& variance, const EstimateArgs& args,
                std::ostream& out) {
  const CohortStructure& s = result.structure;
  ordered_json j;
  j["command"] = "estimate";
  j["panel"] = {{"n_units", panel.n_units()},
                {"n_controls", panel.n_controls()},
                {"n_treated", panel.n_treated()},
                {"n_periods", panel.n_periods()},
                {"first_period", panel.time_labels().front()},
                {"last_period", panel.time_labels().back()}};
  j["structure"] = {{"t_post", s.t_post}, {"t_tr", s.t_tr}};
  j["structure"]["cohorts"] = ordered_json::array();
  for (const Cohort& c : s.cohorts)
    j["structure"]["cohorts"].push_back({{"adoption", c.label},
                                         {"n_tr", c.n_tr},
                                         {"horizon", c.horizon},
                                         {"t_post", c.t_post}});
  // threads is deliberately not echoed: results do not depend on it
  j["options"] = {{"vce", args.vce},
                  {"brep", args.brep},
                  {"seed", args.seed},
                  {"level", args.level},
                  {"tol", args.tol},
                  {"max_iter", args.max_iter},
                  {"uniform_weights", args.uniform_weights}};
  j["conventions"] = {
      {"event_time", "ell = 1 is the adoption period"},
      {"placebo_centering",
       "pre-treatment contrasts subtract the lambda-weighted pre-gap"}};

  auto event_json = [&](const EventEstimate& e) {
    ordered_json row{{"ell", e.ell}, {"estimate", e.tau}, {"n_tr", e.n_tr}};
    if (variance.method != VarianceMethod::none) {
      const auto it = variance.se_by_ell.find(e.ell);
      const double se = it == variance.se_by_ell.end()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : it->second;
      row["se"] = json_number(se);
      if (!std::isnan(se)) {
        const auto [lo, hi] = confidence_interval(e.tau, se, args.level);
        row["ci_lower"] = lo;
        row["ci_upper"] = hi;
      } else {
        row["ci_lower"] = nullptr;
        row["ci_upper"] = nullptr;
      }
    }
    return row;
  };

  j["att"] = ordered_json{{"estimate", result.att}};
  if (variance.method != VarianceMethod::none) {
    j["att"]["se"] = json_number(variance.se_att);
    if (!std::isnan(variance.se_att)) {
      const auto [lo, hi] = confidence_interval(result.att, variance.se_att, args.level);
      j["att"]["ci_lower"] = lo;
      j["att"]["ci_upper"] = hi;
    }
  }
  j["event"] = ordered_json::array();
  for (const EventEstimate& e : result.event) j["event"].push_back(event_json(e));
  j["placebo"] = ordered_json::array();
  for (const EventEstimate& e : result.placebo) j["placebo"].push_back(event_json(e));

  j["cohorts"] = ordered_json::array();
  for (std::size_t k = 0; k < result.cohorts.size(); ++k) {
    const CohortEstimate& c = result.cohorts[k];
    const Cohort& info = s.cohorts[k];
    ordered_json jc{{"adoption", c.cohort},
                    {"n_tr", info.n_tr},
                    {"horizon", info.horizon},
                    {"tau", c.tau}};
    jc["dynamic"] = ordered_json::array();
    for (std::size_t l = 0; l < c.dynamic.size(); ++l)
      jc["dynamic"].push_back(
          {{"ell", static_cast<int>(l + 1)}, {"estimate", c.dynamic[l]}});
    jc["placebo"] = ordered_json::array();
    for (std::size_t p = 0; p < c.placebo.size(); ++p)
      jc["placebo"].push_back(
          {{"ell", -static_cast<int>(p)}, {"estimate", c.placebo[p]}});

    const WeightSet& w = c.weights;
    ordered_json jw;
    jw["omega"] = ordered_json::array();
    // Subpanel controls are the panel controls in panel order.
    for (int i = 0; i < w.omega.size(); ++i)
      jw["omega"].push_back({{"unit", panel.unit_labels()[i]}, {"value", w.omega[i]}});
    jw["omega_intercept"] = w.omega_intercept;
    jw["lambda"] = ordered_json::array();
    for (int t = 0; t < w.lambda.size(); ++t)
      jw["lambda"].push_back({{"time", panel.time_labels()[t]}, {"value", w.lambda[t]}});
    jw["lambda_intercept"] = w.lambda_intercept;
    jw["zeta"] = w.zeta;
    jw["zeta_time"] = w.zeta_time;
    jw["zeta_degenerate"] = w.zeta_degenerate;
    jw["omega_solver"] = solver_json(w.omega_diagnostics);
    jw["lambda_solver"] = solver_json(w.lambda_diagnostics);
    jc["weights"] = std::move(jw);
    j["cohorts"].push_back(std::move(jc));
  }

  ordered_json ji;
  switch (variance.method) {
    case VarianceMethod::none:
      ji = {{"method", "none"}};
      break;
    case VarianceMethod::bootstrap:
    case VarianceMethod::placebo:
      ji = {{"method",
             variance.method == VarianceMethod::bootstrap ? "bootstrap" : "placebo"},
            {"reps", variance.reps},
            {"seed", variance.seed},
            {"level", args.level},
            {"failed_reps", variance.failed_reps}};
      break;
  }
  j["inference"] = std::move(ji);

  out << j.dump(2) << '\n';
}

void dump_weights_csv(const PanelDataset& panel, const EstimationResult& result,
                      std::ostream& out) {
  out << "cohort,component,key,value\n";
  for (const CohortEstimate& c : result.cohorts) {
    const WeightSet& w = c.weights;
    for (int i = 0; i < w.omega.size(); ++i)
      out << c.cohort << ",omega," << panel.unit_labels()[i] << ','
          << fmt17(w.omega[i]) << '\n';
    out << c.cohort << ",omega_intercept,," << fmt17(w.omega_intercept) << '\n';
    for (int t = 0; t < w.lambda.size(); ++t)
      out << c.cohort << ",lambda," << panel.time_labels()[t] << ','
          << fmt17(w.lambda[t]) << '\n';
    out << c.cohort << ",lambda_intercept,," << fmt17(w.lambda_intercept) << '\n';
    out << c.cohort << ",zeta,," << fmt17(w.zeta) << '\n';
    out << c.cohort << ",zeta_time,," << fmt17(w.zeta_time) << '\n';
  }
}

int run_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
  // Resolve the placebo row request up front; it is a usage error.
  int placebo_rows = 0;  // resolved against the panel below
  bool placebo_all = false;
  if (!args.placebo.empty()) {
    if (args.placebo == "all") {
      placebo_all = true;
    } else {
      try {
        std::size_t used = 0;
        placebo_rows = std::stoi(args.placebo, &used);
        if (used != args.placebo.size()) placebo_rows = -1;
      } catch (const std::exception&) {
        placebo_rows = -1;
      }
      if (placebo_rows < 1) {
        err << "error: --placebo expects 'all' or a positive integer\n";
        return kExitUsage;
      }
    }
  }

  std::ifstream in(args.input);
  if (!in) {
    err << "error: cannot open input file '" << args.input << "'\n";
    return kExitValidation;
  }

  try {
    const PanelDataset panel = load_panel(in, args.columns);

    EstimationOptions options;
    options.solver.tolerance = args.tol;
    options.solver.max_iter = args.max_iter;
    options.uniform_weights = args.uniform_weights;

    const EstimationResult result = estimate(panel, options);

    VarianceResult variance;
    if (args.vce == "bootstrap")
      variance = bootstrap_se(panel, options, args.brep, args.seed, args.threads);
    else if (args.vce == "placebo")
      variance = placebo_se(panel, options, args.brep, args.seed, args.threads);
    variance.ci_level = args.level;

    if (placebo_all) placebo_rows = static_cast<int>(result.placebo.size());
    placebo_rows = std::min<int>(placebo_rows, result.placebo.size());

    const std::vector<TableRow> rows =
        build_rows(result, variance, placebo_rows, args.level);

    std::ostringstream body;
    if (args.format == "json")
      write_json(panel, result, variance, args, body);
    else if (args.format == "csv")
      write_csv(result, rows, args.disag, body);
    else
      write_text(result, variance, rows, args, args.disag, body);

    if (args.output.empty()) {
      out << body.str();
    } else {
      std::ofstream file(args.output, std::ios::binary);
      if (!file) {
        err << "error: cannot write output file '" << args.output << "'\n";
        return kExitValidation;
      }
      file << body.str();
    }

    if (!args.dump_weights.empty()) {
      std::ofstream file(args.dump_weights, std::ios::binary);
      if (!file) {
        err << "error: cannot write weights file '" << args.dump_weights << "'\n";
        return kExitValidation;
      }
      dump_weights_csv(panel, result, file);
    }

    for (const CohortEstimate& c : result.cohorts) {
      if (!c.weights.omega_diagnostics.converged ||
          !c.weights.lambda_diagnostics.converged) {
        err << "error: weight solver did not converge for cohort " << c.cohort
            << " (increase --max-iter or loosen --tol)\n";
        return kExitSolver;
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

int run_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
  (void)out;
  try {
    std::ifstream in(args.spec_path);
    if (!in) {
      err << "error: cannot open spec file '" << args.spec_path << "'\n";
      return kExitValidation;
    }
    std::ostringstream text;
    text << in.rdbuf();
    DGPSpec spec = dgp_spec_from_json(text.str());
    if (args.seed) spec.seed = *args.seed;

    const GeneratedPanel generated = generate(spec);

    std::ofstream csv(args.output, std::ios::binary);
    if (!csv) {
      err << "error: cannot write output file '" << args.output << "'\n";
      return kExitValidation;
    }
    write_panel_csv(generated.panel, csv);

    const std::string effects_path =
        args.effects.empty() ? args.output + ".effects.json" : args.effects;
    std::ofstream effects(effects_path, std::ios::binary);
    if (!effects) {
      err << "error: cannot write effects file '" << effects_path << "'\n";
      return kExitValidation;
    }
    effects << true_effects_to_json(generated.effects);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"synthetic difference-in-differences event-study estimator"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate_cmd =
      app.add_subcommand("estimate", "estimate effects from a long-format CSV panel");
  estimate_cmd->add_option("--input", est.input, "panel CSV file")->required();
  estimate_cmd->add_option("--unit", est.columns.unit, "unit id column name");
  estimate_cmd->add_option("--time", est.columns.time, "time column name");
  estimate_cmd->add_option("--outcome", est.columns.outcome, "outcome column name");
  estimate_cmd->add_option("--treatment", est.columns.treatment,
                           "treatment dummy column name");
  estimate_cmd->add_flag("--disag", est.disag, "also print cohort-level estimates");
  estimate_cmd->add_option("--placebo", est.placebo,
                           "pre-treatment rows: 'all' or a count");
  estimate_cmd->add_option("--vce", est.vce, "variance estimator")
      ->check(CLI::IsMember({"bootstrap", "placebo", "none"}));
  estimate_cmd->add_option("--brep", est.brep, "bootstrap replications")
      ->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--seed", est.seed, "resampling seed");
  estimate_cmd->add_option("--level", est.level, "confidence level")
      ->check(CLI::Range(1e-6, 1.0 - 1e-6));
  estimate_cmd->add_option("--tol", est.tol, "solver relative duality-gap tolerance");
  estimate_cmd->add_option("--max-iter", est.max_iter, "solver iteration cap")
      ->check(CLI::PositiveNumber);
  estimate_cmd->add_flag("--uniform-weights", est.uniform_weights,
                         "flat omega/lambda (plain DiD, diagnostic)");
  estimate_cmd->add_option("--dump-weights", est.dump_weights,
                           "write fitted weights to this CSV for audit");
  estimate_cmd->add_option("--format", est.format, "output format")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  estimate_cmd->add_option("--output", est.output, "write output here instead of stdout");
  estimate_cmd->add_option("--threads", est.threads, "parallel resampling workers")
      ->check(CLI::PositiveNumber);

  GenerateArgs gen;
  CLI::App* generate_cmd =
      app.add_subcommand("generate", "write a synthetic panel from a JSON spec");
  generate_cmd->add_option("--spec", gen.spec_path, "generator spec JSON")->required();
  generate_cmd->add_option("--output", gen.output, "panel CSV to write")->required();
  generate_cmd->add_option("--effects", gen.effects,
                           "true-effects sidecar path (default: <output>.effects.json)");
  std::uint64_t seed_override = 0;
  CLI::Option* seed_opt =
      generate_cmd->add_option("--seed", seed_override, "override the spec seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (estimate_cmd->parsed()) return run_estimate(est, out, err);
  if (seed_opt->count() > 0) gen.seed = seed_override;
  return run_generate(gen, out, err);
}

}  // namespace sdid::cli
