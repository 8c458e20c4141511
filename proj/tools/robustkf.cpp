// robustkf command-line front-end.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "robustkf/cli.hpp"

namespace {

using robustkf::cli::RunManifest;

void add_problem_options(CLI::App* app, RunManifest& m, std::string& wq,
                         std::string& wr, bool multi) {
  if (multi)
    app->add_option("--case", m.cases, "Paper case name (repeatable)");
  else
    app->add_option("--case", m.cases, "Paper case name")->expected(1);
  app->add_option("--model", m.model_path, "Model file (.json or .toml)");
  app->add_option("--spec", m.spec_path, "Design spec file (.json or .toml)");
  if (multi) {
    app->add_option("--theta", m.thetas, "Trace bound(s)");
    app->add_option("--gamma", m.gammas, "Weight(s) on the process term");
  } else {
    app->add_option("--theta", m.thetas, "Trace bound")->expected(1);
    app->add_option("--gamma", m.gammas, "Weight on the process term")->expected(1);
  }
  app->add_option("--lambda", m.lambda, "Sensor norm exponent: 1 or 2");
  app->add_option("--wq", wq, "Process weights, comma separated");
  app->add_option("--wr", wr, "Sensor weights, comma separated");
  app->add_option("--bounds", m.bounds,
                  "Variance bounds as JSON text or a file path");
}

void add_output_options(CLI::App* app, RunManifest& m,
                        std::vector<std::string>& formats) {
  app->add_option("--out", m.out_dir, "Output directory")->envname("ROBUSTKF_OUT");
  app->add_option("--format", formats, "Artifact formats: json, csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust Kalman filter synthesis"};
  app.require_subcommand(1);
  RunManifest m;
  std::string wq, wr;
  std::vector<std::string> formats;

  auto* design = app.add_subcommand("design", "Solve the design program and verify it");
  auto* verify = app.add_subcommand("verify", "Verify a stored or fresh solution");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of the designed filter");
  auto* sweep = app.add_subcommand("sweep", "Design over a grid of cases and parameters");
  auto* list = app.add_subcommand("list-cases", "List the built-in paper cases");

  for (auto* sub : {design, verify, simulate}) {
    add_problem_options(sub, m, wq, wr, false);
    add_output_options(sub, m, formats);
  }
  add_problem_options(sweep, m, wq, wr, true);
  add_output_options(sweep, m, formats);
  sweep->add_option("--jobs", m.jobs, "Parallel design jobs")->check(CLI::PositiveNumber);
  for (auto* sub : {verify, simulate})
    sub->add_option("--solution", m.solution_path, "solution.json from design");
  simulate->add_option("--runs", m.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", m.seed, "Random seed");
  simulate->add_option("--horizon", m.horizon,
                       "Horizon in seconds (steps for discrete models)");
  simulate->add_option("--dt", m.dt, "Integration step for continuous models");
  list->add_flag("--export", m.export_models, "Write each case's model and spec");
  list->add_option("--out", m.out_dir, "Output directory")->envname("ROBUSTKF_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    robustkf::cli::report_error(std::cerr, robustkf::cli::kInputError, "usage",
                                e.what());
    return robustkf::cli::kInputError;
  }

  m.command = app.get_subcommands().front()->get_name();
  if (!formats.empty()) {
    m.write_json = std::find(formats.begin(), formats.end(), "json") != formats.end();
    m.write_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
  }
  try {
    if (!wq.empty()) m.wq = robustkf::cli::parse_weight_list(wq, "--wq");
    if (!wr.empty()) m.wr = robustkf::cli::parse_weight_list(wr, "--wr");
  } catch (const robustkf::Error& e) {
    robustkf::cli::report_error(std::cerr, robustkf::cli::kInputError, "parse",
                                e.what());
    return robustkf::cli::kInputError;
  }
  return robustkf::cli::run(m, std::cout, std::cerr);
}
