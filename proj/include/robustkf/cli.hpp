#pragma once

// Batch front-end: manifest, command runners and artifact writers. The
// executable in tools/ only parses flags into a RunManifest.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "robustkf/cases.hpp"
#include "robustkf/design.hpp"
#include "robustkf/model_io.hpp"
#include "robustkf/serialize.hpp"
#include "robustkf/sim.hpp"
#include "robustkf/sparse.hpp"
#include "robustkf/verify.hpp"

namespace robustkf::cli {

enum ExitCode : int {
  kOk = 0,
  kCriteriaFailed = 1,
  kInfeasible = 2,
  kNumericalFailure = 3,
  kInputError = 4,
  kDiverged = 5
};

struct RunManifest {
  std::string command;
  /// Paper cases; design/verify/simulate take one, sweep takes any number.
  std::vector<std::string> cases;
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> spec_path;
  std::optional<std::filesystem::path> solution_path;
  /// Trace bounds; sweep treats these as a grid.
  std::vector<double> thetas;
  std::vector<double> gammas;
  std::optional<double> lambda;
  std::optional<Vector> wq;
  std::optional<Vector> wr;
  /// JSON text or path of a file with {"eta_max": [...], "zeta_max": [...]}.
  std::optional<std::string> bounds;
  std::filesystem::path out_dir = ".";
  bool write_json = true;
  bool write_csv = true;
  int runs = 100;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::optional<double> horizon;
  std::optional<double> dt;
  bool export_models = false;
};

/// Error document written to stderr.
inline void report_error(std::ostream& err, int code, const std::string& type,
                         const std::string& message) {
  io::json j{{"error", type}, {"message", message}, {"exit_code", code}};
  err << j.dump() << std::endl;
}

struct Problem {
  std::string name;
  LtiModel model;
  DesignSpec spec;
};

inline Vector parse_weight_list(const std::string& text, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t pos = 0;
      v.push_back(std::stod(item, &pos));
      if (item.find_first_not_of(" \t", pos) != std::string::npos)
        throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (v.empty()) throw ParseError(std::string(what) + " is empty");
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline io::json parse_bounds(const std::string& text) {
  const std::string trimmed = text.substr(text.find_first_not_of(" \t\n"));
  if (!trimmed.empty() && trimmed[0] == '{')
    return io::parse_document(trimmed, io::FileFormat::Json, "--bounds");
  return io::read_document(trimmed);
}

/// Applies the CLI overrides (except theta/gamma grids) on top of `spec`.
inline void apply_overrides(const RunManifest& m, DesignSpec& spec) {
  if (m.lambda) spec.lambda = *m.lambda;
  if (m.wq) spec.process_weights = *m.wq;
  if (m.wr) spec.sensor_weights = *m.wr;
  if (m.bounds) io::apply_bounds(parse_bounds(*m.bounds), spec);
}

/// Resolves the model and spec: case defaults < spec file < flags.
inline Problem resolve_problem(const RunManifest& m,
                               const std::optional<std::string>& case_name) {
  if (case_name && m.model_path)
    throw PreconditionError("give either --case or --model, not both");
  std::optional<Problem> p;
  if (case_name) {
    PaperCase c = paper_case(*case_name);
    p.emplace(Problem{c.name, std::move(c.model), std::move(c.spec)});
  } else if (m.model_path) {
    p.emplace(Problem{m.model_path->stem().string(),
                      io::load_model(*m.model_path), DesignSpec{}});
  } else {
    throw PreconditionError("one of --case or --model is required");
  }
  if (m.spec_path) p->spec = io::load_spec(*m.spec_path, p->spec);
  apply_overrides(m, p->spec);
  if (m.thetas.size() == 1) p->spec.target = TraceBound{m.thetas[0]};
  if (m.gammas.size() == 1) p->spec.gamma = m.gammas[0];
  return std::move(*p);
}

inline std::optional<std::string> single_case(const RunManifest& m) {
  if (m.cases.size() > 1)
    throw PreconditionError(m.command + " takes a single --case");
  if (m.cases.empty()) return std::nullopt;
  return m.cases[0];
}

inline void ensure_out_dir(const RunManifest& m) {
  std::error_code ec;
  std::filesystem::create_directories(m.out_dir, ec);
  if (ec || !std::filesystem::is_directory(m.out_dir))
    throw IoError("cannot create output directory '" + m.out_dir.string() +
                  "'");
}

inline int status_exit_code(DesignStatus s) {
  switch (s) {
    case DesignStatus::Optimal:
    case DesignStatus::NearOptimal: return kOk;
    case DesignStatus::Infeasible: return kInfeasible;
    case DesignStatus::NumericalFailure: return kNumericalFailure;
  }
  return kNumericalFailure;
}

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream ss;
  ss << std::setprecision(12) << v;
  return ss.str();
}

struct PipelineResult {
  DesignSolution solution;
  std::optional<VerificationReport> report;
  std::optional<SparsityResult> sparsity;
  std::string failure;
};

/// design + verify (+ pruning for lambda = 1) on one problem.
inline PipelineResult run_pipeline(const Problem& p) {
  PipelineResult r;
  r.solution = design_robust_filter(p.model, p.spec);
  if (!has_solution(r.solution.status)) return r;
  r.report = verify_solution(p.model, r.solution, p.spec);
  if (p.spec.lambda == 1.0) {
    const double threshold =
        kInactiveFraction * std::max(0.0, r.solution.zeta.maxCoeff());
    try {
      r.sparsity = prune_sensors(p.model, r.solution, p.spec, threshold);
    } catch (const PruningRejected& e) {
      r.failure = e.what();
    }
  }
  return r;
}

inline bool pipeline_passed(const PipelineResult& r) {
  return has_solution(r.solution.status) && r.report && r.report->passed &&
         r.failure.empty();
}

inline const char* kSummaryHeader =
    "case,status,objective,trace,margin,active_sensors,passed\n";

inline std::string summary_row(const std::string& name, const PipelineResult& r) {
  std::ostringstream ss;
  const auto& s = r.solution;
  ss << name << ',' << to_string(s.status) << ',' << csv_number(s.objective)
     << ',' << csv_number(r.report ? r.report->oracle_trace : NAN) << ','
     << csv_number(r.report ? r.report->trace_margin : NAN) << ','
     << (has_solution(s.status) ? static_cast<int>(s.active_sensors().size()) : 0)
     << ',' << (pipeline_passed(r) ? "true" : "false") << '\n';
  return ss.str();
}

inline int run_design(const RunManifest& m, std::ostream& out) {
  const Problem p = resolve_problem(m, single_case(m));
  ensure_out_dir(m);
  const PipelineResult r = run_pipeline(p);
  if (m.write_json) {
    io::json sol = io::solution_to_json(p.model, r.solution);
    sol["case"] = p.name;
    sol["spec"] = io::spec_to_json(p.spec);
    if (r.sparsity) sol["sparsity"] = io::sparsity_to_json(*r.sparsity);
    if (!r.failure.empty()) sol["pruning_error"] = r.failure;
    io::write_text(m.out_dir / "solution.json", sol.dump(2) + "\n");
    if (r.report)
      io::write_text(m.out_dir / "verification.json",
                     io::report_to_json(*r.report).dump(2) + "\n");
  }
  if (m.write_csv)
    io::write_text(m.out_dir / "summary.csv",
                   std::string(kSummaryHeader) + summary_row(p.name, r));
  out << summary_row(p.name, r);
  const int code = status_exit_code(r.solution.status);
  if (code != kOk) return code;
  return pipeline_passed(r) ? kOk : kCriteriaFailed;
}

/// Solution for verify/simulate: --solution file or a fresh design.
inline DesignSolution obtain_solution(const RunManifest& m, const Problem& p) {
  if (m.solution_path)
    return io::solution_from_json(io::read_document(*m.solution_path));
  return design_robust_filter(p.model, p.spec);
}

inline void check_solution_shape(const Problem& p, const DesignSolution& s) {
  if (s.K.rows() != p.model.n() || s.K.cols() != p.model.p() ||
      s.eta.size() != p.model.m() || s.zeta.size() != p.model.p())
    throw ValidationError("solution",
                          "solution dimensions do not match the model");
  if (s.assignment.size() != 0 &&
      s.assignment.size() != build_program(p.model, p.spec).num_scalars())
    throw ValidationError("solution",
                          "solution assignment does not match the program");
}

inline int run_verify(const RunManifest& m, std::ostream& out) {
  const Problem p = resolve_problem(m, single_case(m));
  ensure_out_dir(m);
  const DesignSolution s = obtain_solution(m, p);
  if (!has_solution(s.status)) return status_exit_code(s.status);
  check_solution_shape(p, s);
  const VerificationReport rep = verify_solution(p.model, s, p.spec);
  if (m.write_json)
    io::write_text(m.out_dir / "verification.json",
                   io::report_to_json(rep).dump(2) + "\n");
  out << std::left << std::setw(22) << "check" << "result\n"
      << std::setw(22) << "stable" << (rep.stable ? "pass" : "FAIL") << '\n'
      << std::setw(22) << "trace budget"
      << (rep.budget_met ? "pass" : "FAIL") << "  (" << rep.oracle_trace
      << " vs " << rep.trace_budget << ")\n"
      << std::setw(22) << "lmi residuals"
      << (rep.lmi_certified ? "pass" : "FAIL") << "  (" << rep.lmi_worst_relative
      << ")\n"
      << std::setw(22) << "riccati sandwich"
      << (rep.riccati_consistent ? "pass" : "FAIL") << "  (" << rep.riccati_trace
      << ")\n";
  return rep.passed ? kOk : kCriteriaFailed;
}

inline int run_simulate(const RunManifest& m, std::ostream& out) {
  const Problem p = resolve_problem(m, single_case(m));
  ensure_out_dir(m);
  const DesignSolution s = obtain_solution(m, p);
  if (!has_solution(s.status)) return status_exit_code(s.status);
  check_solution_shape(p, s);
  SimConfig cfg;
  cfg.n_runs = m.runs;
  cfg.seed = m.seed;
  if (m.dt) cfg.dt = *m.dt;
  if (m.horizon)
    cfg.horizon = *m.horizon;
  else if (p.model.is_discrete())
    cfg.horizon = std::round(200.0 / *p.model.sample_time());
  const SimResult r =
      simulate_filter(p.model, s.K, s.finite_Q(), s.finite_R(), cfg);
  {
    std::ofstream csv(m.out_dir / "sim.csv");
    if (!csv) throw IoError("cannot write sim.csv");
    write_sim_csv(csv, r);
  }
  const Vector ratio = steady_state_std_ratio(r);
  const double mean_norm = final_quarter_mean_norm(r);
  const double trace = r.predicted_cov_diag.bottomRows(1).sum();
  const double mean_bound = 3.0 * std::sqrt(trace / m.runs);
  bool ok = mean_norm <= mean_bound;
  if (m.runs >= 100) ok = ok && ((ratio.array() - 1.0).abs() <= 0.15).all();
  if (m.write_json) {
    io::json j{{"runs", m.runs},
               {"seed", m.seed},
               {"horizon", cfg.horizon},
               {"dt", p.model.is_discrete() ? *p.model.sample_time() : cfg.dt},
               {"steady_state_std_ratio", io::vector_to_json(ratio)},
               {"final_quarter_mean_norm", mean_norm},
               {"mean_norm_bound", mean_bound},
               {"converged", ok}};
    io::write_text(m.out_dir / "sim_summary.json", j.dump(2) + "\n");
  }
  out << "final-quarter mean error " << mean_norm << " (bound " << mean_bound
      << "), std ratio " << ratio.transpose() << '\n';
  return ok ? kOk : kCriteriaFailed;
}

struct SweepPoint {
  std::optional<std::string> case_name;
  std::optional<double> theta;
  std::optional<double> gamma;
};

inline int run_sweep(const RunManifest& m, std::ostream& out) {
  std::vector<std::optional<std::string>> sources;
  for (const auto& c : m.cases) sources.emplace_back(c);
  if (m.model_path) sources.emplace_back(std::nullopt);
  if (sources.empty())
    throw PreconditionError("sweep needs at least one --case or a --model");
  std::vector<std::optional<double>> thetas(m.thetas.begin(), m.thetas.end());
  std::vector<std::optional<double>> gammas(m.gammas.begin(), m.gammas.end());
  if (thetas.empty()) thetas.emplace_back(std::nullopt);
  if (gammas.empty()) gammas.emplace_back(std::nullopt);
  std::vector<SweepPoint> grid;
  for (const auto& s : sources)
    for (const auto& t : thetas)
      for (const auto& g : gammas) grid.push_back({s, t, g});
  ensure_out_dir(m);

  struct Row {
    Problem* problem = nullptr;
    std::optional<Problem> owned;
    PipelineResult result;
    std::string error;
  };
  std::vector<Row> rows(grid.size());
  RunManifest base = m;
  base.thetas.clear();
  base.gammas.clear();
  for (size_t i = 0; i < grid.size(); ++i) {
    RunManifest mi = base;
    if (grid[i].case_name) mi.model_path.reset();
    rows[i].owned = resolve_problem(mi, grid[i].case_name);
    if (grid[i].theta) rows[i].owned->spec.target = TraceBound{*grid[i].theta};
    if (grid[i].gamma) rows[i].owned->spec.gamma = *grid[i].gamma;
  }

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < rows.size(); i = next++) {
      try {
        rows[i].result = run_pipeline(*rows[i].owned);
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(m.jobs, static_cast<int>(rows.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Variance columns keyed by noise/sensor label, in first-seen order.
  std::vector<std::string> q_labels, r_labels;
  auto add = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    const LtiModel& mod = r.owned->model;
    for (int i = 0; i < mod.m(); ++i) add(q_labels, mod.noise_label(i));
    for (int j = 0; j < mod.p(); ++j) add(r_labels, mod.sensor_label(j));
  }
  std::ostringstream csv;
  csv << "index,case,theta,gamma,lambda,status,objective,trace,margin,"
         "active_sensors,passed";
  for (const auto& l : q_labels) csv << ",Q[" << l << ']';
  for (const auto& l : r_labels) csv << ",R[" << l << ']';
  csv << ",error\n";
  bool any_failed = false;
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const Problem& p = *r.owned;
    const DesignSolution& s = r.result.solution;
    const bool solved = r.error.empty() && has_solution(s.status);
    csv << i << ',' << p.name << ',' << csv_number(p.spec.trace_budget()) << ','
        << csv_number(p.spec.gamma) << ',' << csv_number(p.spec.lambda) << ','
        << (r.error.empty() ? to_string(s.status) : "Error") << ','
        << csv_number(solved ? s.objective : NAN) << ','
        << csv_number(solved && r.result.report ? r.result.report->oracle_trace : NAN)
        << ','
        << csv_number(solved && r.result.report ? r.result.report->trace_margin : NAN)
        << ',' << (solved ? static_cast<int>(s.active_sensors().size()) : 0) << ','
        << (solved && pipeline_passed(r.result) ? "true" : "false");
    any_failed = any_failed || !(solved && pipeline_passed(r.result));
    for (const auto& l : q_labels) {
      csv << ',';
      for (int k = 0; solved && k < p.model.m(); ++k)
        if (p.model.noise_label(k) == l) csv << csv_number(s.Q(k, k));
    }
    for (const auto& l : r_labels) {
      csv << ',';
      for (int k = 0; solved && k < p.model.p(); ++k)
        if (p.model.sensor_label(k) == l) csv << csv_number(s.R(k, k));
    }
    std::string err = r.error.empty() ? r.result.failure : r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv << ',' << err << '\n';
  }
  io::write_text(m.out_dir / "sweep.csv", csv.str());
  out << csv.str();
  return any_failed ? kCriteriaFailed : kOk;
}

inline int run_list_cases(const RunManifest& m, std::ostream& out) {
  for (const auto& name : case_names()) {
    const PaperCase c = paper_case(name);
    out << std::left << std::setw(13) << name << ' '
        << (c.model.is_discrete() ? "discrete  " : "continuous") << " n=" << c.model.n()
        << " m=" << c.model.m() << " p=" << c.model.p()
        << " theta=" << c.spec.trace_budget() << " gamma=" << c.spec.gamma
        << " lambda=" << c.spec.lambda << '\n';
  }
  if (m.export_models) {
    ensure_out_dir(m);
    for (const auto& name : case_names()) {
      const PaperCase c = paper_case(name);
      io::save_model(m.out_dir / (name + ".json"), c.model);
      io::json spec = io::spec_to_json(c.spec);
      io::write_text(m.out_dir / (name + ".spec.json"), spec.dump(2) + "\n");
    }
  }
  return kOk;
}

/// Runs one manifest and maps every outcome to an exit code; errors are
/// reported as JSON on `err`.
inline int run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    if (m.command == "design") return run_design(m, out);
    if (m.command == "verify") return run_verify(m, out);
    if (m.command == "simulate") return run_simulate(m, out);
    if (m.command == "sweep") return run_sweep(m, out);
    if (m.command == "list-cases") return run_list_cases(m, out);
    report_error(err, kInputError, "usage", "unknown command '" + m.command + "'");
    return kInputError;
  } catch (const DivergenceError& e) {
    io::json j{{"error", "divergence"},
               {"message", e.what()},
               {"time", e.time()},
               {"exit_code", static_cast<int>(kDiverged)}};
    err << j.dump() << std::endl;
    return kDiverged;
  } catch (const StabilityError& e) {
    report_error(err, kDiverged, "unstable", e.what());
    return kDiverged;
  } catch (const ConvergenceError& e) {
    report_error(err, kNumericalFailure, "convergence", e.what());
    return kNumericalFailure;
  } catch (const IoError& e) {
    report_error(err, kInputError, "io", e.what());
    return kInputError;
  } catch (const ParseError& e) {
    report_error(err, kInputError, "parse", e.what());
    return kInputError;
  } catch (const ValidationError& e) {
    report_error(err, kInputError, "validation", e.what());
    return kInputError;
  } catch (const UnknownCaseError& e) {
    report_error(err, kInputError, "unknown-case", e.what());
    return kInputError;
  } catch (const Error& e) {
    report_error(err, kInputError, "invalid-input", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    report_error(err, kNumericalFailure, "internal", e.what());
    return kNumericalFailure;
  }
}

}  // namespace robustkf::cli
