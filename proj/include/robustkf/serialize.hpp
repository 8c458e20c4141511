#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robustkf/conic_program.hpp"
#include "robustkf/design.hpp"
#include "robustkf/model.hpp"
#include "robustkf/sparse.hpp"
#include "robustkf/verify.hpp"

namespace robustkf::io {

using json = nlohmann::json;

/// Non-finite values are written as null.
inline json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline double number_from(const json& j, const std::string& what) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ParseError(what + " must be a number");
  return j.get<double>();
}

/// Row-major nested arrays.
inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(number(M(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

/// Parses nested row arrays; ragged or non-numeric input throws ParseError
/// naming `what`. null entries read as +inf.
inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw ParseError(what + " must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(what + " is ragged: row " + std::to_string(i) +
                       " does not have " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c)
      M(i, c) = number_from(row[static_cast<size_t>(c)],
                            what + "[" + std::to_string(i) + "][" +
                                std::to_string(c) + "]");
  }
  return M;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) =
        number_from(j[i], what + "[" + std::to_string(i) + "]");
  return v;
}

/// Accepts either a vector of diagonal entries or a square matrix (whose
/// diagonal is taken; off-diagonal entries must be zero).
inline Vector diagonal_from_json(const json& j, const std::string& what) {
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    const Matrix M = matrix_from_json(j, what);
    if (M.rows() != M.cols()) throw ParseError(what + " must be square");
    if ((M - Matrix(M.diagonal().asDiagonal())).norm() != 0.0)
      throw ParseError(what + " must be diagonal");
    return M.diagonal();
  }
  return vector_from_json(j, what);
}

inline json strings_to_json(const std::vector<std::string>& s) {
  return json(s);
}

// ---------------------------------------------------------------- model

inline json model_to_json(const LtiModel& m) {
  json j;
  j["domain"] = to_string(m.domain());
  j["A"] = matrix_to_json(m.A());
  j["B"] = matrix_to_json(m.B());
  j["C"] = matrix_to_json(m.C());
  if (m.sample_time()) j["sample_time"] = *m.sample_time();
  if (!m.labels().states.empty()) j["state_labels"] = m.labels().states;
  if (!m.labels().noises.empty()) j["noise_labels"] = m.labels().noises;
  if (!m.labels().sensors.empty()) j["sensor_labels"] = m.labels().sensors;
  return j;
}

inline std::vector<std::string> labels_from(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const json& a = j.at(key);
  if (!a.is_array()) throw ParseError(std::string(key) + " must be an array");
  std::vector<std::string> out;
  for (const auto& s : a) {
    if (!s.is_string())
      throw ParseError(std::string(key) + " must contain strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

inline LtiModel model_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model must be an object");
  for (const char* key : {"domain", "A", "B", "C"})
    if (!j.contains(key)) throw ParseError(std::string("model is missing '") + key + "'");
  if (!j.at("domain").is_string()) throw ParseError("domain must be a string");
  const std::string domain = j.at("domain").get<std::string>();
  TimeDomain d;
  if (domain == "continuous")
    d = TimeDomain::Continuous;
  else if (domain == "discrete")
    d = TimeDomain::Discrete;
  else
    throw ParseError("domain must be 'continuous' or 'discrete', got '" +
                     domain + "'");
  std::optional<double> ts;
  if (j.contains("sample_time")) {
    if (!j.at("sample_time").is_number())
      throw ParseError("sample_time must be a number");
    ts = j.at("sample_time").get<double>();
  }
  ModelLabels labels{labels_from(j, "state_labels"),
                     labels_from(j, "noise_labels"),
                     labels_from(j, "sensor_labels")};
  return LtiModel(matrix_from_json(j.at("A"), "A"),
                  matrix_from_json(j.at("B"), "B"),
                  matrix_from_json(j.at("C"), "C"), d, ts, std::move(labels));
}

// ---------------------------------------------------------------- spec

inline json solver_options_to_json(const SolverOptions& o) {
  return {{"abstol", o.abstol},
          {"reltol", o.reltol},
          {"feastol", o.feastol},
          {"max_iterations", o.max_iterations}};
}

inline json spec_to_json(const DesignSpec& s) {
  json j;
  if (const auto* t = std::get_if<TraceBound>(&s.target))
    j["target"] = {{"trace_bound", t->theta}};
  else
    j["target"] = {
        {"exact_covariance",
         matrix_to_json(std::get<ExactCovariance>(s.target).sigma)}};
  j["gamma"] = s.gamma;
  j["lambda"] = s.lambda;
  if (s.process_weights.size()) j["wq"] = vector_to_json(s.process_weights);
  if (s.sensor_weights.size()) j["wr"] = vector_to_json(s.sensor_weights);
  if (s.eta_max || s.zeta_max) {
    json b = json::object();
    if (s.eta_max) b["eta_max"] = vector_to_json(*s.eta_max);
    if (s.zeta_max) b["zeta_max"] = vector_to_json(*s.zeta_max);
    j["bounds"] = b;
  }
  j["solver"] = solver_options_to_json(s.solver);
  return j;
}

inline void apply_bounds(const json& b, DesignSpec& s) {
  if (!b.is_object()) throw ParseError("bounds must be an object");
  for (const auto& [key, value] : b.items())
    if (key != "eta_max" && key != "zeta_max")
      throw ParseError("unknown bounds key '" + key + "'");
  if (b.contains("eta_max")) s.eta_max = vector_from_json(b.at("eta_max"), "eta_max");
  if (b.contains("zeta_max"))
    s.zeta_max = vector_from_json(b.at("zeta_max"), "zeta_max");
}

/// Overlays the keys present in `j` onto `s`. Accepted keys: target
/// ({trace_bound} or {exact_covariance}), theta, sigma_inf, gamma, lambda,
/// wq, wr, bounds, solver.
inline void apply_spec_json(const json& j, DesignSpec& s) {
  if (!j.is_object()) throw ParseError("spec must be an object");
  static const std::vector<std::string> known = {
      "target", "theta", "sigma_inf", "gamma", "lambda",
      "wq",     "wr",    "bounds",    "solver"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("unknown spec key '" + key + "'");
  auto num = [&](const json& v, const std::string& what) {
    if (!v.is_number()) throw ParseError(what + " must be a number");
    return v.get<double>();
  };
  if (j.contains("target")) {
    const json& t = j.at("target");
    if (t.contains("trace_bound"))
      s.target = TraceBound{num(t.at("trace_bound"), "trace_bound")};
    else if (t.contains("exact_covariance"))
      s.target = ExactCovariance{
          matrix_from_json(t.at("exact_covariance"), "exact_covariance")};
    else
      throw ParseError("target needs 'trace_bound' or 'exact_covariance'");
  }
  if (j.contains("theta")) s.target = TraceBound{num(j.at("theta"), "theta")};
  if (j.contains("sigma_inf"))
    s.target = ExactCovariance{matrix_from_json(j.at("sigma_inf"), "sigma_inf")};
  if (j.contains("gamma")) s.gamma = num(j.at("gamma"), "gamma");
  if (j.contains("lambda")) s.lambda = num(j.at("lambda"), "lambda");
  if (j.contains("wq")) s.process_weights = diagonal_from_json(j.at("wq"), "wq");
  if (j.contains("wr")) s.sensor_weights = diagonal_from_json(j.at("wr"), "wr");
  if (j.contains("bounds")) apply_bounds(j.at("bounds"), s);
  if (j.contains("solver")) {
    const json& o = j.at("solver");
    if (o.contains("abstol")) s.solver.abstol = num(o.at("abstol"), "abstol");
    if (o.contains("reltol")) s.solver.reltol = num(o.at("reltol"), "reltol");
    if (o.contains("feastol")) s.solver.feastol = num(o.at("feastol"), "feastol");
    if (o.contains("max_iterations"))
      s.solver.max_iterations =
          static_cast<int>(num(o.at("max_iterations"), "max_iterations"));
  }
}

inline DesignSpec spec_from_json(const json& j) {
  DesignSpec s;
  apply_spec_json(j, s);
  return s;
}

// ---------------------------------------------------------------- solution

inline json index_labels(const std::vector<int>& idx,
                         const std::vector<std::string>& labels) {
  json a = json::array();
  for (int i : idx) a.push_back(labels.at(static_cast<size_t>(i)));
  return a;
}

inline json solution_to_json(const LtiModel& model, const DesignSolution& s) {
  json j;
  j["status"] = to_string(s.status);
  j["solver_status"] = to_string(s.solver_status);
  j["program"] = to_string(s.program);
  j["message"] = s.message;
  j["iterations"] = s.iterations;
  j["solve_time"] = s.solve_time;
  j["warnings"] = s.warnings;
  if (!has_solution(s.status)) {
    j["certificate_norm"] = number(s.certificate_norm);
    return j;
  }
  std::vector<std::string> states, noises, sensors;
  for (int i = 0; i < model.n(); ++i) states.push_back(model.state_label(i));
  for (int i = 0; i < model.m(); ++i) noises.push_back(model.noise_label(i));
  for (int i = 0; i < model.p(); ++i) sensors.push_back(model.sensor_label(i));
  j["objective"] = number(s.objective);
  j["K"] = matrix_to_json(s.K);
  j["eta"] = vector_to_json(s.eta);
  j["zeta"] = vector_to_json(s.zeta);
  j["Q"] = matrix_to_json(s.Q);
  j["R"] = matrix_to_json(s.R);
  j["sigma_inf"] = matrix_to_json(s.sigma_inf);
  j["trace_sigma_inf"] = number(s.sigma_inf.trace());
  j["inactive_sensors"] = s.inactive_sensors;
  j["inactive_sensor_labels"] = index_labels(s.inactive_sensors, sensors);
  j["inactive_process"] = s.inactive_process;
  j["inactive_process_labels"] = index_labels(s.inactive_process, noises);
  j["state_labels"] = states;
  j["noise_labels"] = noises;
  j["sensor_labels"] = sensors;
  if (s.Z) j["Z"] = matrix_to_json(*s.Z);
  if (s.W) j["W"] = matrix_to_json(*s.W);
  if (s.X) j["X"] = matrix_to_json(*s.X);
  j["z_condition"] = number(s.z_condition);
  j["assignment"] = vector_to_json(s.assignment);
  return j;
}

inline DesignStatus design_status_from(const std::string& s) {
  for (DesignStatus d : {DesignStatus::Optimal, DesignStatus::NearOptimal,
                         DesignStatus::Infeasible, DesignStatus::NumericalFailure})
    if (s == to_string(d)) return d;
  throw ParseError("unknown status '" + s + "'");
}

inline ProgramKind program_kind_from(const std::string& s) {
  for (ProgramKind k : {ProgramKind::Theorem1, ProgramKind::Corollary1,
                        ProgramKind::Theorem2, ProgramKind::Corollary2,
                        ProgramKind::Generic})
    if (s == to_string(k)) return k;
  throw ParseError("unknown program '" + s + "'");
}

/// Reads a solution written by solution_to_json.
inline DesignSolution solution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("status"))
    throw ParseError("solution must be an object with a status");
  DesignSolution s;
  s.status = design_status_from(j.at("status").get<std::string>());
  if (j.contains("program"))
    s.program = program_kind_from(j.at("program").get<std::string>());
  if (j.contains("message")) s.message = j.at("message").get<std::string>();
  if (j.contains("iterations")) s.iterations = j.at("iterations").get<int>();
  if (!has_solution(s.status)) return s;
  for (const char* key : {"K", "eta", "zeta", "sigma_inf"})
    if (!j.contains(key))
      throw ParseError(std::string("solution is missing '") + key + "'");
  s.objective = number_from(j.value("objective", json(nullptr)), "objective");
  s.K = matrix_from_json(j.at("K"), "K");
  s.eta = vector_from_json(j.at("eta"), "eta");
  s.zeta = vector_from_json(j.at("zeta"), "zeta");
  s.sigma_inf = matrix_from_json(j.at("sigma_inf"), "sigma_inf");
  s.inactive_process = detail::inactive_entries(s.eta);
  s.inactive_sensors = detail::inactive_entries(s.zeta);
  s.Q = detail::covariance_from(s.eta, s.inactive_process);
  s.R = detail::covariance_from(s.zeta, s.inactive_sensors);
  if (j.contains("Z")) s.Z = matrix_from_json(j.at("Z"), "Z");
  if (j.contains("W")) s.W = matrix_from_json(j.at("W"), "W");
  if (j.contains("X")) s.X = matrix_from_json(j.at("X"), "X");
  if (j.contains("assignment"))
    s.assignment = vector_from_json(j.at("assignment"), "assignment");
  if (j.contains("z_condition"))
    s.z_condition = number_from(j.at("z_condition"), "z_condition");
  return s;
}

// ---------------------------------------------------------------- reports

inline json blocks_to_json(const std::vector<BlockResidual>& blocks) {
  json a = json::array();
  for (const auto& b : blocks)
    a.push_back({{"name", b.name},
                 {"min_eig", number(b.min_eig)},
                 {"norm", number(b.norm)},
                 {"relative", number(b.relative())}});
  return a;
}

inline json report_to_json(const VerificationReport& r) {
  json j;
  j["program"] = to_string(r.program);
  j["covariance_form"] = "posterior";
  j["oracle_sigma"] = matrix_to_json(r.oracle_sigma);
  j["oracle_trace"] = number(r.oracle_trace);
  j["trace_budget"] = number(r.trace_budget);
  j["trace_margin"] = number(r.trace_margin);
  j["oracle_residual"] = number(r.oracle_residual);
  j["stable"] = r.stable;
  j["stability_measure"] = number(r.stability_measure);
  j["lmi_min_eig"] = blocks_to_json(r.lmi);
  j["lmi_worst_relative"] = number(r.lmi_worst_relative);
  j["riccati_trace"] = number(r.riccati_trace);
  j["riccati_sigma"] = matrix_to_json(r.riccati_sigma);
  j["budget_met"] = r.budget_met;
  j["lmi_certified"] = r.lmi_certified;
  j["riccati_consistent"] = r.riccati_consistent;
  j["passed"] = r.passed;
  j["warnings"] = r.warnings;
  return j;
}

inline json sparsity_to_json(const SparsityResult& s) {
  json j;
  j["active_sensors"] = s.active_sensors;
  j["inactive_sensors"] = s.inactive_sensors;
  j["sparsity_level"] = s.sparsity_level;
  j["iterations"] = s.iterations;
  j["pruned_gain"] = matrix_to_json(s.pruned_gain);
  j["column_norms"] = vector_to_json(s.column_norms);
  json hist = json::array();
  for (const auto& z : s.zeta_history) hist.push_back(vector_to_json(z));
  j["zeta_history"] = hist;
  j["active_history"] = s.active_history;
  j["pruned_trace"] = number(s.pruned_trace);
  j["pruned_margin"] = number(s.pruned_margin);
  j["warnings"] = s.warnings;
  return j;
}

// ---------------------------------------------------------------- program

inline json expr_to_json(const LinExpr& e) {
  json terms = json::array();
  for (const auto& [i, a] : e.terms()) terms.push_back({i, a});
  return {{"constant", e.constant()}, {"terms", terms}};
}

/// Debug dump: variables, PSD block sparsity ('0' zero, 'c' constant,
/// 'v' depends on variables), cone and linear constraints, objective.
inline json program_to_json(const ConicProgram& p) {
  json j;
  j["kind"] = to_string(p.recovery().kind);
  j["num_scalars"] = p.num_scalars();
  json vars = json::array();
  for (const auto& v : p.variables())
    vars.push_back({{"name", v.name},
                    {"rows", v.rows},
                    {"cols", v.cols},
                    {"structure", to_string(v.structure)},
                    {"offset", v.offset},
                    {"size", v.size}});
  j["variables"] = vars;
  json blocks = json::array();
  for (const auto& b : p.psd_blocks()) {
    json pattern = json::array();
    for (Eigen::Index r = 0; r < b.expr.rows(); ++r) {
      std::string row;
      for (Eigen::Index c = 0; c < b.expr.cols(); ++c) {
        const LinExpr& e = b.expr(r, c);
        row += !e.is_constant() ? 'v' : (e.constant() != 0.0 ? 'c' : '0');
      }
      pattern.push_back(row);
    }
    blocks.push_back({{"name", b.name},
                      {"size", b.expr.rows()},
                      {"margin", b.margin},
                      {"pattern", pattern}});
  }
  j["psd_blocks"] = blocks;
  json socs = json::array();
  for (const auto& s : p.soc_constraints())
    socs.push_back({{"name", s.name}, {"dimension", s.vec.size() + 1}});
  j["soc_constraints"] = socs;
  json lin = json::array();
  for (const auto& l : p.linear_constraints())
    lin.push_back({{"name", l.name},
                   {"kind", l.kind == LinearKind::Zero ? "zero" : "nonnegative"},
                   {"expr", expr_to_json(l.expr)}});
  j["linear_constraints"] = lin;
  j["objective"] = expr_to_json(p.objective());
  return j;
}

}  // namespace robustkf::io
