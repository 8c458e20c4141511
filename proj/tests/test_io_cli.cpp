#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "robustkf/cli.hpp"

namespace robustkf {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("robustkf_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(JsonTest, RaggedMatrixIsRejected) {
  EXPECT_THROW(io::matrix_from_json(io::json::parse("[[1, 2], [3]]"), "A"),
               ParseError);
  EXPECT_THROW(io::matrix_from_json(io::json::parse("[[1, \"x\"]]"), "A"),
               ParseError);
}

TEST(JsonTest, ModelRoundTripIsExact) {
  const LtiModel m = paper_case("cwh-disc-c2").model;
  const LtiModel back = io::model_from_json(io::json::parse(io::model_to_json(m).dump()));
  EXPECT_EQ(back.A(), m.A());
  EXPECT_EQ(back.B(), m.B());
  EXPECT_EQ(back.C(), m.C());
  EXPECT_EQ(back.sample_time(), m.sample_time());
  EXPECT_EQ(back.labels().sensors, m.labels().sensors);
}

TEST(JsonTest, ModelValidationErrorsSurface) {
  io::json j = io::model_to_json(f16_model());
  j["B"] = io::json::parse("[[1], [2]]");
  EXPECT_THROW(io::model_from_json(j), ValidationError);
  j = io::model_to_json(f16_model());
  j["domain"] = "hybrid";
  EXPECT_THROW(io::model_from_json(j), ParseError);
}

TEST(JsonTest, SpecKeysApplyAndUnknownKeysFail) {
  DesignSpec s;
  io::apply_spec_json(io::json::parse(R"({"theta": 0.3, "gamma": 2, "lambda": 1,
      "wr": [1, 2], "bounds": {"zeta_max": [5, 6]}})"),
                      s);
  EXPECT_DOUBLE_EQ(s.trace_budget(), 0.3);
  EXPECT_DOUBLE_EQ(s.gamma, 2.0);
  EXPECT_DOUBLE_EQ(s.lambda, 1.0);
  EXPECT_EQ(s.sensor_weights, Eigen::Vector2d(1, 2));
  ASSERT_TRUE(s.zeta_max);
  EXPECT_DOUBLE_EQ((*s.zeta_max)(1), 6.0);
  EXPECT_THROW(io::apply_spec_json(io::json::parse(R"({"thet": 1})"), s), ParseError);
}

TEST(JsonTest, SolutionMarksInactiveSensorsAsNull) {
  const PaperCase c = paper_case("f16-sparse");
  const DesignSolution s = design_robust_filter(c.model, c.spec);
  const io::json j = io::solution_to_json(c.model, s);
  EXPECT_EQ(j.at("inactive_sensors"), io::json::parse("[2, 3]"));
  EXPECT_TRUE(j.at("R")[2][2].is_null());
  EXPECT_FALSE(j.at("R")[0][0].is_null());
  const DesignSolution back = io::solution_from_json(io::json::parse(j.dump()));
  EXPECT_EQ(back.K, s.K);
  EXPECT_EQ(back.zeta, s.zeta);
  EXPECT_EQ(back.inactive_sensors, s.inactive_sensors);
  EXPECT_TRUE(std::isinf(back.R(3, 3)));
  EXPECT_EQ(back.assignment, s.assignment);
}

TEST(FileTest, TomlRoundTripIsBitExact) {
  const fs::path dir = scratch_dir("toml");
  const LtiModel m = tustin_discretize(f16_model(), 0.01);
  io::save_model(dir / "f16.toml", m);
  const LtiModel back = io::load_model(dir / "f16.toml");
  EXPECT_EQ(back.A(), m.A());
  EXPECT_EQ(back.B(), m.B());
  EXPECT_EQ(back.sample_time(), m.sample_time());
  EXPECT_EQ(back.labels().states, m.labels().states);
  io::save_model(dir / "f16.json", m);
  EXPECT_EQ(io::load_model(dir / "f16.json").A(), m.A());
}

TEST(FileTest, HandWrittenTomlModel) {
  const fs::path dir = scratch_dir("toml_hand");
  io::write_text(dir / "m.toml",
                 "domain = \"continuous\"\n"
                 "A = [[0, 1], [0, 0]]\nB = [[0], [1]]\nC = [[1, 0]]\n");
  const LtiModel m = io::load_model(dir / "m.toml");
  EXPECT_EQ(m.n(), 2);
  EXPECT_FALSE(m.is_discrete());
  io::write_text(dir / "bad.toml", "A = [[0, 1], [0]]\nB = \n");
  EXPECT_THROW(io::load_model(dir / "bad.toml"), ParseError);
}

TEST(FileTest, MissingFileIsIoError) {
  EXPECT_THROW(io::load_model("/nonexistent/model.json"), IoError);
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(const cli::RunManifest& m) {
  std::ostringstream out, err;
  const int code = cli::run(m, out, err);
  return {code, out.str(), err.str()};
}

cli::RunManifest manifest(const std::string& command, const std::string& dir) {
  cli::RunManifest m;
  m.command = command;
  m.out_dir = scratch_dir(dir);
  return m;
}

TEST(CliTest, SparseDesignReportsTwoInactiveSensors) {
  cli::RunManifest m = manifest("design", "cli_sparse");
  m.cases = {"f16-sparse"};
  const CliRun r = run_cli(m);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const io::json sol = io::read_document(m.out_dir / "solution.json");
  EXPECT_EQ(sol.at("inactive_sensors").size(), 2u);
  EXPECT_EQ(sol.at("inactive_sensor_labels"),
            io::json::parse(R"(["n_alpha", "n_q"])"));
  EXPECT_TRUE(fs::exists(m.out_dir / "verification.json"));
  const auto csv = read_csv(m.out_dir / "summary.csv");
  ASSERT_EQ(csv.size(), 2u);
  EXPECT_EQ(csv[0][5], "active_sensors");
  EXPECT_EQ(csv[1][5], "3");
}

TEST(CliTest, MissingModelExitsWithInputError) {
  cli::RunManifest m = manifest("design", "cli_missing");
  m.model_path = "missing.json";
  const CliRun r = run_cli(m);
  EXPECT_EQ(r.code, cli::kInputError);
  const io::json err = io::json::parse(r.err);
  EXPECT_EQ(err.at("error"), "io");
  EXPECT_EQ(err.at("exit_code"), 4);
}

TEST(CliTest, UnknownCaseListsValidNames) {
  cli::RunManifest m = manifest("design", "cli_unknown");
  m.cases = {"cwh-cont-c3"};
  const CliRun r = run_cli(m);
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_NE(r.err.find("f16-sparse"), std::string::npos);
}

TEST(CliTest, InfeasibleDesignExitsTwo) {
  cli::RunManifest m = manifest("design", "cli_infeasible");
  m.cases = {"f16-c1"};
  m.bounds = R"({"eta_max": [0.01, 0.01, 0.01], "zeta_max": [0.01, 0.01, 0.01, 0.01, 0.01]})";
  EXPECT_EQ(run_cli(m).code, cli::kInfeasible);
}

TEST(CliTest, OverridesFollowCaseThenSpecThenFlags) {
  const fs::path dir = scratch_dir("cli_spec");
  io::write_text(dir / "spec.json", R"({"theta": 0.2, "gamma": 3})");
  cli::RunManifest m;
  m.command = "design";
  m.cases = {"cwh-cont-c2"};
  m.spec_path = dir / "spec.json";
  m.gammas = {0.5};
  const cli::Problem p = cli::resolve_problem(m, m.cases[0]);
  EXPECT_DOUBLE_EQ(p.spec.trace_budget(), 0.2);
  EXPECT_DOUBLE_EQ(p.spec.gamma, 0.5);
  EXPECT_EQ(p.spec.process_weights, Eigen::Vector3d(1, 100, 10));
}

TEST(CliTest, VerifyReadsStoredSolution) {
  cli::RunManifest d = manifest("design", "cli_verify");
  d.cases = {"cwh-disc-c1"};
  ASSERT_EQ(run_cli(d).code, cli::kOk);
  cli::RunManifest v = d;
  v.command = "verify";
  v.solution_path = d.out_dir / "solution.json";
  fs::remove(d.out_dir / "verification.json");
  const CliRun r = run_cli(v);
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("trace budget"), std::string::npos);
  const io::json rep = io::read_document(v.out_dir / "verification.json");
  EXPECT_TRUE(rep.at("passed").get<bool>());
  v.cases = {"f16-c1"};
  EXPECT_EQ(run_cli(v).code, cli::kInputError);
}

TEST(CliTest, SweepRowsFollowGridOrder) {
  cli::RunManifest m = manifest("sweep", "cli_sweep");
  m.cases = {"cwh-cont-c1"};
  m.thetas = {0.05, 0.1, 0.2};
  m.jobs = 2;
  ASSERT_EQ(run_cli(m).code, cli::kOk);
  const auto csv = read_csv(m.out_dir / "sweep.csv");
  ASSERT_EQ(csv.size(), 4u);
  EXPECT_EQ(csv[0][6], "objective");
  EXPECT_EQ(csv[0][11], "Q[w_Fx]");
  double previous = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 3; ++i) {
    EXPECT_EQ(csv[i][0], std::to_string(i - 1));
    EXPECT_DOUBLE_EQ(std::stod(csv[i][2]), m.thetas[i - 1]);
    const double objective = std::stod(csv[i][6]);
    EXPECT_LE(objective, previous);
    previous = objective;
  }
}

TEST(CliTest, SweepComparesWeightedCases) {
  cli::RunManifest m = manifest("sweep", "cli_sweep_cases");
  m.cases = {"cwh-cont-c1", "cwh-cont-c2"};
  ASSERT_EQ(run_cli(m).code, cli::kOk);
  const auto csv = read_csv(m.out_dir / "sweep.csv");
  ASSERT_EQ(csv.size(), 3u);
  const auto col = std::find(csv[0].begin(), csv[0].end(), "Q[w_Fy]") - csv[0].begin();
  ASSERT_LT(col, static_cast<long>(csv[0].size()));
  EXPECT_GT(std::stod(csv[2][col]), std::stod(csv[1][col]));
}

TEST(CliTest, SweepRecordsPerRowErrors) {
  cli::RunManifest m = manifest("sweep", "cli_sweep_err");
  m.cases = {"f16-c1", "cwh-cont-c1"};
  m.wq = Eigen::Vector3d(1, 1, 1);
  m.wr = Eigen::VectorXd::Ones(5);
  EXPECT_EQ(run_cli(m).code, cli::kCriteriaFailed);
  const auto csv = read_csv(m.out_dir / "sweep.csv");
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[1][5], "Optimal");
  EXPECT_EQ(csv[2][5], "Error");
  EXPECT_NE(csv[2].back().find("sensor weights"), std::string::npos);
}

TEST(CliTest, EmptySweepGridIsUsageError) {
  cli::RunManifest m = manifest("sweep", "cli_sweep_empty");
  EXPECT_EQ(run_cli(m).code, cli::kInputError);
}

TEST(CliTest, SimulationCsvKeepsGridAcrossRunCounts) {
  cli::RunManifest m = manifest("simulate", "cli_sim");
  m.cases = {"cwh-disc-c1"};
  m.horizon = 200;
  m.runs = 1;
  m.seed = 3;
  ASSERT_NE(run_cli(m).code, cli::kInputError);
  const auto one = read_csv(m.out_dir / "sim.csv");
  m.runs = 50;
  run_cli(m);
  const auto many = read_csv(m.out_dir / "sim.csv");
  ASSERT_EQ(one.size(), many.size());
  EXPECT_EQ(one[0].size(), 1u + 3 * 6);
  for (size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i][0], many[i][0]);
  EXPECT_NE(one.back()[7], many.back()[7]);
  EXPECT_TRUE(fs::exists(m.out_dir / "sim_summary.json"));
}

TEST(CliTest, ListCasesExportsModels) {
  cli::RunManifest m = manifest("list-cases", "cli_list");
  m.export_models = true;
  const CliRun r = run_cli(m);
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("cwh-disc-c2"), std::string::npos);
  const LtiModel f16 = io::load_model(m.out_dir / "f16-c1.json");
  EXPECT_EQ(f16.A(), f16_model().A());
}

}  // namespace
}  // namespace robustkf
