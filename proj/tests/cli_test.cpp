#include "tinysocp/benchmarks.hpp"
#include "tinysocp/oracle.hpp"
#include "tinysocp/problem_io.hpp"
#include "tinysocp/riccati.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "codegen_harness.hpp"
#include "test_util.hpp"

namespace tinysocp {
namespace {

namespace fs = std::filesystem;
using testing::run_command;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  testing::TempDir dir{"cli"};

  fs::path write_problem(const std::string& name, const ProblemDefinition& p) {
    const fs::path path = dir.path() / name;
    write_file_atomic(path, dump_problem(p));
    return path;
  }

  testing::CommandResult cli(const std::string& args, const std::string& env = "") {
    return run_command(env + " " TINYSOCP_CLI " " + args);
  }
};

TEST_F(Cli, SolveUnconstrainedMatchesKkt) {
  ProblemDefinition p = testing::double_integrator(15, 0.1);
  p.cost.Q *= 10.0;
  p.settings.rho = 0.1;
  p.settings.abs_pri_tol = 1e-8;
  p.settings.abs_dua_tol = 1e-8;
  p.settings.max_iter = 20000;
  const fs::path problem = write_problem("di.json", p);
  const fs::path out = dir.path() / "traj.csv";
  const auto r = cli("solve --problem " + problem.string() + " --x0 1,-0.5 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output.rfind("Solved,", 0), 0u) << r.output;

  const auto rows = lines_of(read_file(out));
  ASSERT_EQ(rows.size(), 16u);
  EXPECT_EQ(rows[0], "k,x0,x1,u0");
  EXPECT_EQ(rows.back().back(), ',');

  const ValidatedProblem v = validate(p);
  const SolverCache cache = make_cache(v);
  const Matrix terminal = cache.Pinf - cache.rho * Matrix::Identity(2, 2);
  const oracle::Trajectory ref = oracle::kkt_solve(
      {&v.dynamics(), v.cost().Q, v.cost().R, terminal, Matrix::Zero(2, 15), Matrix::Zero(1, 14),
       Vector(Vector::Map(std::vector<double>{1.0, -0.5}.data(), 2))});
  for (int k = 0; k + 1 < 15; ++k) {
    const std::string& row = rows[static_cast<std::size_t>(k + 1)];
    const double u = std::stod(row.substr(row.rfind(',') + 1));
    EXPECT_NEAR(u, ref.u(0, k), 1e-5) << "k " << k;
  }
}

TEST_F(Cli, SolveWithoutOutPrintsTableThenSummary) {
  const fs::path problem = write_problem("di.json", testing::double_integrator(5, 0.1));
  const auto r = cli("solve --problem " + problem.string() + " --x0 0,0");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = lines_of(r.output);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows.front(), "k,x0,x1,u0");
  EXPECT_EQ(rows.back().substr(0, 7), "Solved,");
}

TEST_F(Cli, MaxItersExitsTwoAndStillWrites) {
  ProblemDefinition p = testing::double_integrator(30, 0.1);
  p.constraints.input_bounds = Bounds{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)};
  p.settings.max_iter = 1;
  p.settings.check_termination = 1;
  const fs::path problem = write_problem("hard.json", p);
  const fs::path out = dir.path() / "partial.csv";
  const auto r = cli("solve --problem " + problem.string() + " --x0 2,0 --out " + out.string());
  EXPECT_EQ(r.exit_code, 2) << r.output;
  EXPECT_EQ(r.output.rfind("MaxIters,1,", 0), 0u) << r.output;
  EXPECT_EQ(lines_of(read_file(out)).size(), 31u);
}

TEST_F(Cli, MalformedFileNamesTheKey) {
  std::string text = dump_problem(testing::double_integrator(5, 0.1));
  const auto at = text.find("\"A\"");
  ASSERT_NE(at, std::string::npos);
  text.insert(at + 4, " \"not a matrix\", \"A_old\":");
  const fs::path problem = dir.path() / "bad.json";
  write_file_atomic(problem, text);
  const auto r = cli("solve --problem " + problem.string() + " --x0 0,0");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("dynamics.A"), std::string::npos) << r.output;
}

TEST_F(Cli, BadInitialStateIsInputError) {
  const fs::path problem = write_problem("di.json", testing::double_integrator(5, 0.1));
  auto r = cli("solve --problem " + problem.string() + " --x0 1,abc");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("--x0"), std::string::npos) << r.output;
  r = cli("solve --problem " + problem.string() + " --x0 1,2,3");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("--x0"), std::string::npos) << r.output;
  r = cli("solve --problem " + (dir.path() / "missing.json").string() + " --x0 0,0");
  EXPECT_EQ(r.exit_code, 1);
  r = cli("frobnicate");
  EXPECT_EQ(r.exit_code, 1);
}

TEST_F(Cli, SolveFollowsStateReference) {
  ProblemDefinition p = testing::double_integrator(4, 0.1);
  p.settings.abs_pri_tol = 1e-9;
  p.settings.abs_dua_tol = 1e-9;
  p.settings.max_iter = 20000;
  const fs::path problem = write_problem("di.json", p);
  const fs::path xref = dir.path() / "xref.csv";
  write_file_atomic(xref, "# position,velocity\n1,0\n1,0\n1,0\n1,0\n");
  const fs::path out = dir.path() / "traj.csv";
  const auto r = cli("solve --problem " + problem.string() + " --x0 0,0 --xref " +
                     xref.string() + " --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = lines_of(read_file(out));
  // Pushed toward position 1, so the first input is positive.
  EXPECT_GT(std::stod(rows[1].substr(rows[1].rfind(',') + 1)), 0.0);

  write_file_atomic(xref, "1,0\n1,0\n");
  EXPECT_EQ(cli("solve --problem " + problem.string() + " --x0 0,0 --xref " + xref.string())
                .exit_code,
            1);
}

TEST_F(Cli, SimulateWritesTrajectoryAndMetrics) {
  const fs::path out = dir.path() / "rocket.csv";
  const auto r = cli("simulate --scenario rocket --steps 5 --budget 10 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = lines_of(read_file(out));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "step,t,x0,x1,x2,x3,x4,x5,u0,u1,u2,pri_res,dua_res,iters");
  const std::string metrics = read_file(dir.path() / "rocket.metrics.json");
  EXPECT_NE(metrics.find("\"landing_error\""), std::string::npos);
  EXPECT_EQ(metrics, r.output);

  EXPECT_EQ(cli("simulate --scenario moon --out " + out.string()).exit_code, 1);
}

TEST_F(Cli, SimulateIsDeterministicGivenSeed) {
  const std::string base = "simulate --scenario rocket --steps 8 --budget 20 --perturb 0.5 --out ";
  const auto a = cli("--seed 11 " + base + (dir.path() / "a.csv").string());
  const auto b = cli(base + (dir.path() / "b.csv").string(), "TINYSOCP_SEED=11");
  const auto c = cli("--seed 12 " + base + (dir.path() / "c.csv").string());
  ASSERT_EQ(a.exit_code, 0) << a.output;
  EXPECT_EQ(read_file(dir.path() / "a.csv"), read_file(dir.path() / "b.csv"));
  EXPECT_NE(read_file(dir.path() / "a.csv"), read_file(dir.path() / "c.csv"));
}

TEST_F(Cli, BenchSweepsDoublingRange) {
  const fs::path out = dir.path() / "sweep.csv";
  const auto r = cli("bench --suite rocket --sweep horizon --range 8..24 --iterations 5 "
                     "--repeats 2 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = lines_of(read_file(out));
  ASSERT_EQ(rows.size(), 4u);  // 8, 16, 24
  EXPECT_NE(r.output.find("exponent"), std::string::npos);
  EXPECT_EQ(cli("bench --suite rocket --sweep horizon --range 8-24 --out " + out.string())
                .exit_code,
            1);
  EXPECT_EQ(cli("bench --suite rocket --sweep state --range 2..4 --out " + out.string())
                .exit_code,
            1);
}

TEST_F(Cli, CodegenEmitsTree) {
  std::mt19937_64 rng(3);
  const fs::path problem =
      write_problem("p.json", testing::random_constrained_problem(rng, 4, 3, 6));
  const fs::path out = dir.path() / "gen";
  const auto r = cli("codegen --problem " + problem.string() + " --out " + out.string() +
                     " --precision f64");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("precision: f64"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(out / "solver" / "tiny_solver.cpp"));
  EXPECT_TRUE(fs::exists(out / "src" / "data_workspace.hpp"));
  EXPECT_EQ(cli("codegen --problem " + problem.string() + " --out " + out.string() +
                " --precision f16")
                .exit_code,
            1);
  EXPECT_EQ(cli("codegen --problem " + problem.string() + " --out " + out.string() +
                " --flash-budget 10")
                .exit_code,
            1);
}

TEST_F(Cli, VerifyPassesOnBoxProblem) {
  ProblemDefinition p = testing::double_integrator(20, 0.1);
  p.constraints.input_bounds = Bounds{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)};
  const fs::path problem = write_problem("box.json", p);
  const auto r = cli("--seed 1 verify --problem " + problem.string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  const auto rows = lines_of(r.output);
  ASSERT_EQ(rows.size(), 4u) << r.output;
  for (const auto& row : rows) EXPECT_EQ(row.substr(0, 5), "PASS ") << row;
}

TEST_F(Cli, VerifyPassesOnThrustCone) {
  const fs::path problem = write_problem("rocket.json", bench::make_rocket_landing().problem);
  const auto r = cli("verify --problem " + problem.string() + " --x0 2,-1,4,0.5,0,-1");
  EXPECT_EQ(r.exit_code, 0) << r.output;
}

TEST_F(Cli, VerifyFailsOnInfeasibleStart) {
  ProblemDefinition p = testing::double_integrator(10, 0.1);
  p.constraints.input_bounds = Bounds{Vector::Constant(1, -0.01), Vector::Constant(1, 0.01)};
  p.constraints.state_bounds = Bounds{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  const fs::path problem = write_problem("tight.json", p);
  // Velocity 1 cannot be stopped before position leaves the box.
  const auto r = cli("verify --problem " + problem.string() + " --x0 0.9,1");
  EXPECT_EQ(r.exit_code, 1) << r.output;
  EXPECT_NE(r.output.find("FAIL reference-admm"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("PASS kkt"), std::string::npos) << r.output;
}

}  // namespace
}  // namespace tinysocp
