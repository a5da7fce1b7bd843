#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dsm/cli.hpp"

using namespace dsm;
using namespace dsm::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() / (std::string("dsm_cli_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_file(path)); }

RunConfig builtin_config(const std::string& command, const std::string& builtin, const fs::path& out) {
  RunConfig cfg;
  cfg.command = command;
  cfg.builtins = {builtin};
  cfg.out = out.string();
  return cfg;
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

} // namespace

TEST(CmdSolve, WellposedCubicSucceeds) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(builtin_config("solve", "wellposed_cubic", dir), log), exit_code::ok) << log.str();
  const auto report = read_json(dir / "report.json");
  EXPECT_LE(report.at("decay_deviation").get<double>(), 1e-6);
  EXPECT_TRUE(report.at("converged").get<bool>());
  EXPECT_EQ(report.at("v").size(), 10u);
  EXPECT_TRUE(fs::exists(dir / "certificates.json"));
  EXPECT_EQ(read_file(dir / "trajectory.csv").substr(0, 26), "t,p,residual_F,u_norm,step");
}

TEST(CmdSolve, StartAtSolutionGivesOneRow) {
  const auto dir = scratch_dir();
  write_file(dir / "p.json", R"({"dim": 2, "L": {"builtin": "identity"},
    "g": {"builtin": "constant", "params": {"c": [-1, 0]}}, "u0": [1, 0], "R": 1})");
  RunConfig cfg;
  cfg.command = "solve";
  cfg.problems = {(dir / "p.json").string()};
  cfg.out = (dir / "out").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(cfg, log), exit_code::ok) << log.str();
  EXPECT_EQ(line_count(read_file(dir / "out" / "trajectory.csv")), 2u);
}

TEST(CmdSolve, SingularOperatorExitsOne) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(builtin_config("solve", "diag_singular", dir), log), exit_code::error);
  EXPECT_NE(log.str().find("SingularOperator"), std::string::npos) << log.str();
}

TEST(CmdSolve, FailedTagIsExploratoryExitTwo) {
  const auto dir = scratch_dir();
  // trust condition tagged but R far too small
  write_file(dir / "p.json", R"({"dim": 2, "L": {"builtin": "identity"},
    "g": {"builtin": "constant", "params": {"c": [-1, 0]}}, "R": 1e-3, "tags": ["trust_condition"]})");
  RunConfig cfg;
  cfg.command = "solve";
  cfg.problems = {(dir / "p.json").string()};
  cfg.out = (dir / "out").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(cfg, log), exit_code::certificate) << log.str();
  EXPECT_TRUE(read_json(dir / "out" / "report.json").at("exploratory").get<bool>());
}

TEST(CmdContinue, DiagonalFamily) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  EXPECT_EQ(cmd_continue(builtin_config("continue", "diag_singular", dir), log), exit_code::ok) << log.str();
  const auto report = read_json(dir / "report.json").at("continuation");
  const auto v = report.at("v_limit").get<std::vector<double>>();
  EXPECT_NEAR(v[0], 1.0, 1e-5);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_TRUE(report.at("norms_monotone_ok").get<bool>());
  EXPECT_TRUE(report.at("minimal_norm").at("norm_bound_ok").get<bool>());
  const auto csv = read_file(dir / "continuation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "eps,norm_v,residual_full,increment,inner_steps");
  EXPECT_EQ(line_count(csv), 21u);
}

TEST(CmdContinue, NonMonotoneExitsThree) {
  const auto dir = scratch_dir();
  write_file(dir / "p.json", R"({"dim": 2, "L": {"builtin": "identity"},
    "g": {"builtin": "affine", "params": {"B": [[-1, 0], [0, -1]]}}})");
  RunConfig cfg;
  cfg.command = "continue";
  cfg.problems = {(dir / "p.json").string()};
  cfg.out = (dir / "out").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_continue(cfg, log), exit_code::not_monotone);
  EXPECT_NE(log.str().find("NotMonotone"), std::string::npos);
}

TEST(CmdContinue, FloorTruncationNoted) {
  const auto dir = scratch_dir();
  auto cfg = builtin_config("continue", "diag_singular", dir);
  cfg.schedule.floor = 1e-4;
  std::ostringstream log;
  EXPECT_EQ(cmd_continue(cfg, log), exit_code::ok);
  const auto report = read_json(dir / "report.json");
  EXPECT_TRUE(report.at("continuation").at("schedule_truncated").get<bool>());
  EXPECT_NE(report.at("schedule_note").get<std::string>().find("floor"), std::string::npos);
}

TEST(CmdDecayAudit, CubicPasses) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  EXPECT_EQ(cmd_decay_audit(builtin_config("decay-audit", "wellposed_cubic", dir), log), exit_code::ok) << log.str();
  const auto levels = read_json(dir / "report.json").at("levels");
  ASSERT_EQ(levels.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k)
    EXPECT_LT(levels[k].at("decay_deviation").get<double>(), levels[k - 1].at("decay_deviation").get<double>());
}

TEST(CmdDecayAudit, LooseToleranceFails) {
  const auto dir = scratch_dir();
  auto cfg = builtin_config("decay-audit", "wellposed_cubic", dir);
  cfg.flow.rel_tol = 1e-2;
  cfg.rel_tol_given = true;
  std::ostringstream log;
  EXPECT_EQ(cmd_decay_audit(cfg, log), exit_code::error);
  EXPECT_FALSE(read_json(dir / "report.json").at("passed").get<bool>());
}

TEST(CmdCertify, SectorProblem) {
  const auto dir = scratch_dir();
  auto cfg = builtin_config("certify", "sector_nonsymmetric", dir);
  cfg.dim = 6;
  std::ostringstream log;
  EXPECT_EQ(cmd_certify(cfg, log), exit_code::ok) << log.str();
  EXPECT_TRUE(read_json(dir / "certificates.json").is_array());
}

TEST(CmdOracleCheck, WellposedAgrees) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  EXPECT_EQ(cmd_oracle_check(builtin_config("oracle-check", "wellposed_cubic", dir), log), exit_code::ok)
      << log.str();
}

TEST(Batch, SubdirectoriesAndFirstFailureCode) {
  const auto dir = scratch_dir();
  RunConfig cfg;
  cfg.command = "solve";
  cfg.builtins = {"wellposed_cubic", "diag_singular"};
  cfg.out = dir.string();
  cfg.jobs = 2;
  std::ostringstream log;
  EXPECT_EQ(run(cfg, log), exit_code::error);
  EXPECT_TRUE(fs::exists(dir / "0_wellposed_cubic" / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir / "1_diag_singular"));
}

TEST(Reproducibility, SameSeedByteIdenticalCsv) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  auto a = builtin_config("solve", "wellposed_cubic", dir / "a");
  auto b = builtin_config("solve", "wellposed_cubic", dir / "b");
  a.seed = b.seed = 7;
  ASSERT_EQ(cmd_solve(a, log), exit_code::ok);
  ASSERT_EQ(cmd_solve(b, log), exit_code::ok);
  EXPECT_EQ(read_file(dir / "a" / "trajectory.csv"), read_file(dir / "b" / "trajectory.csv"));
  auto c = builtin_config("continue", "singular_monotone", dir / "c");
  auto d = builtin_config("continue", "singular_monotone", dir / "d");
  c.dim = d.dim = 5;
  ASSERT_EQ(cmd_continue(c, log), exit_code::ok);
  ASSERT_EQ(cmd_continue(d, log), exit_code::ok);
  EXPECT_EQ(read_file(dir / "c" / "continuation.csv"), read_file(dir / "d" / "continuation.csv"));
}

TEST(Config, AppliesKnownKeysAndRejectsUnknown) {
  RunConfig cfg;
  apply_config(cfg, nlohmann::json::parse(R"({"builtin": ["diag_singular"], "dim": 4, "eps-floor": 1e-4,
                                               "rel-tol": 1e-9, "jobs": 3})"));
  EXPECT_EQ(cfg.builtins, std::vector<std::string>{"diag_singular"});
  EXPECT_EQ(cfg.dim, 4u);
  EXPECT_EQ(cfg.schedule.floor, 1e-4);
  EXPECT_EQ(cfg.flow.rel_tol, 1e-9);
  EXPECT_TRUE(cfg.rel_tol_given);
  EXPECT_EQ(cfg.jobs, 3u);
  EXPECT_THROW(apply_config(cfg, nlohmann::json::parse(R"({"colour": 1})")), ParseError);
  EXPECT_THROW(apply_config(cfg, nlohmann::json::parse(R"({"dim": "ten"})")), ParseError);
}

TEST(Run, InvalidConfigExitsOne) {
  RunConfig cfg;
  cfg.command = "solve";
  std::ostringstream log;
  EXPECT_EQ(run(cfg, log), exit_code::error);
  cfg.command = "fly";
  cfg.builtins = {"wellposed_cubic"};
  EXPECT_EQ(run(cfg, log), exit_code::error);
}

TEST(Binary, ConfigFileAndFlagPrecedence) {
  const auto dir = scratch_dir();
  write_file(dir / "cfg.json", R"({"builtin": "diag_singular", "eps-floor": 1e-4, "out": "ignored"})");
  const std::string cmd = std::string(DSM_TOOL_PATH) + " continue --config " + (dir / "cfg.json").string() +
                          " --out " + (dir / "out").string() + " > " + (dir / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0) << read_file(dir / "log.txt");
  const auto report = read_json(dir / "out" / "report.json");
  EXPECT_TRUE(report.at("schedule").at("truncated").get<bool>());
  EXPECT_FALSE(fs::exists(dir / "ignored"));
}

TEST(Binary, ExitCodesPropagate) {
  const auto dir = scratch_dir();
  const std::string base = std::string(DSM_TOOL_PATH) + " solve --builtin diag_singular --out " + dir.string();
  const int status = std::system((base + " > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), exit_code::error);
  const int bad = std::system((std::string(DSM_TOOL_PATH) + " solve --dim nope > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_NE(WEXITSTATUS(bad), 0);
}
