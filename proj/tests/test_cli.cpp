#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "stdpzo/commands.hpp"

namespace cli = stdpzo::cli;
namespace fs = std::filesystem;

namespace {

const std::string kSource = STDPZO_SOURCE_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::string& command, const std::string& config,
           std::optional<std::string> out = std::nullopt,
           std::optional<std::uint64_t> seed = std::nullopt) {
  cli::CommandOptions o;
  o.config_text = config;
  o.out = std::move(out);
  o.seed = seed;
  std::ostringstream log, err;
  const int code = cli::run_command(command, o, log, err);
  return {code, log.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "stdpzo_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string with_topology(const std::string& body) {
  return R"({"topology_file": ")" + kSource + R"(/data/demo_topology.json", )" + body + "}";
}

}  // namespace

TEST(CliVerify, NonpositiveHalfIntervalIsConfigError) {
  const auto r = run("verify", R"({"half_interval": 0})", scratch("bad.json").string());
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("half_interval must be positive"), std::string::npos);
}

TEST(CliVerify, UnknownFieldNamed) {
  const auto r = run("verify", R"({"samples": 10})");
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("samples"), std::string::npos);
}

TEST(CliVerify, SelectedChecksWriteReport) {
  const auto path = scratch("verify_small.json");
  const auto r = run("verify", R"({"checks": ["normalizer", "density", "stein_symmetric"], "n": 20000})",
                     path.string(), 42);
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(slurp(path));
  ASSERT_EQ(doc.size(), 3u);
  EXPECT_EQ(doc[2]["seed"], 42);
}

TEST(CliOptimize, ZeroIterationsHeaderOnly) {
  const auto path = scratch("empty.csv");
  const auto r = run("optimize", R"({"iterations": 0})", path.string());
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(slurp(path), "method,replicate,iter,loss,theta_norm\n");
}

TEST(CliOptimize, ThreeMethodBlocksOfEqualSize) {
  const auto path = scratch("compare.csv");
  const auto r = run("optimize", slurp(kSource + "/configs/optimize_compare.json"), path.string());
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rows = csv_rows(path);
  std::map<std::string, int> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) counts[rows[i][0]]++;
  ASSERT_EQ(counts.size(), 3u);
  EXPECT_EQ(counts["gd"], counts["bnn"]);
  EXPECT_EQ(counts["gd"], counts["one_point"]);
}

TEST(CliOptimize, PinnedBnnConfigReducesAveragedLoss) {
  const auto path = scratch("bnn.csv");
  const auto r = run("optimize", slurp(kSource + "/configs/optimize_bnn_pinned.json"), path.string());
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  double first = 0, last = 0;
  int reps = 0;
  for (const auto& row : csv_rows(path)) {
    if (row[0] != "bnn") continue;
    if (row[2] == "0") first += std::stod(row[3]), ++reps;
    if (row[2] == "500") last += std::stod(row[3]);
  }
  EXPECT_EQ(reps, 64);
  EXPECT_LT(last / first, 0.2);
}

TEST(CliOptimize, StepErrorFlushesPartialTrace) {
  const auto path = scratch("diverge.csv");
  const auto r = run("optimize", slurp(kSource + "/configs/optimize_divergence.json"), path.string());
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("iteration"), std::string::npos);
  const auto rows = csv_rows(path);
  ASSERT_GT(rows.size(), 2u);
  // Iterations ascend from 0 without gaps.
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][2], std::to_string(i - 1));
  EXPECT_NE(r.err.find("iteration " + std::to_string(rows.size() - 1)), std::string::npos);
}

TEST(CliOptimize, InvalidFieldsRejected) {
  EXPECT_EQ(run("optimize", R"({"methods": ["adam"]})").code, cli::kExitConfig);
  EXPECT_EQ(run("optimize", R"({"schedule": {"kind": "constant", "alpha0": -1}})").code, cli::kExitConfig);
  EXPECT_EQ(run("optimize", R"({"problem": {"kind": "least_squares", "bogus": 1}})").code, cli::kExitConfig);
  EXPECT_EQ(run("optimize", R"({"half_interval": -2})").code, cli::kExitConfig);
  EXPECT_EQ(run("optimize", "{not json").code, cli::kExitConfig);
}

TEST(CliSweep, SingleDimensionInsufficientPoints) {
  const auto path = scratch("single.csv");
  const auto r = run("sweep", R"({"dims": [10], "n": 2000})", path.string());
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  const auto side = nlohmann::json::parse(slurp(path.string() + ".json"));
  EXPECT_EQ(side["status"], "insufficient points");
  EXPECT_TRUE(side["slope"].is_null());
  EXPECT_EQ(csv_rows(path)[0], (std::vector<std::string>{"d", "quantity", "value", "se"}));
}

TEST(CliSweep, VarianceSlopeAndRerun) {
  const auto a = scratch("sweep_a.csv"), b = scratch("sweep_b.csv");
  const std::string config = slurp(kSource + "/configs/sweep_variance.json");
  ASSERT_EQ(run("sweep", config, a.string()).code, cli::kExitOk);
  ASSERT_EQ(run("sweep", config, b.string()).code, cli::kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));
  const double slope = nlohmann::json::parse(slurp(a.string() + ".json"))["slope"];
  EXPECT_GE(slope, 1.7);
  EXPECT_LE(slope, 2.3);
}

TEST(CliSweep, ConvergenceKind) {
  const auto path = scratch("conv.csv");
  const auto r = run("sweep",
                     R"({"kind": "convergence", "dims": [2, 8], "methods": ["gd", "bnn"],
                         "iterations": 50, "replicates": 2, "schedule": {"alpha0": 0.01}})",
                     path.string());
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(csv_rows(path).size(), 5u);
}

TEST(CliSpikeDemo, CyclicTopologyIsConfigError) {
  const auto r = run("spike-demo",
                     R"({"topology": {"neurons": 3, "edges": [[0,1],[1,2],[2,1]], "inputs": [0], "outputs": [2]}})");
  EXPECT_EQ(r.code, cli::kExitConfig);
}

TEST(CliSpikeDemo, ZeroOffsetsMatchClosedForm) {
  const auto path = scratch("spike_zero.csv");
  const auto r = run("spike-demo",
                     with_topology(R"("weight": 0.8, "inputs": [[0, 0, 0]], "zero_offsets": true,
                                      "plasticity": false)"),
                     path.string());
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::map<std::string, double> fire;
  double readout = NAN;
  for (const auto& row : csv_rows(path)) {
    if (row.size() == 4 && row[2] == "fire") fire[row[1]] = std::stod(row[3]);
    if (row.size() == 4 && row[2] == "readout") readout = std::stod(row[3]);
  }
  const double hidden = 1.0 + std::log(3 * 0.8);
  EXPECT_NEAR(fire["n3"], hidden, 1e-12);
  EXPECT_NEAR(fire["n4"], hidden, 1e-12);
  EXPECT_NEAR(fire["n5"], hidden + 1.0 + std::log(2 * 0.8), 1e-12);
  EXPECT_NEAR(readout, 2 * std::log(1.6), 1e-12);
}

TEST(CliSpikeDemo, RescaledRunKeepsReadoutColumn) {
  const auto a = scratch("spike_base.csv"), b = scratch("spike_rescaled.csv");
  const std::string common = R"("weight": 0.9, "inputs": [[0, 0.5, 1], [1, 0, 0.3]], "trials": 8,
                                 "plasticity": false, "seed": 5)";
  ASSERT_EQ(run("spike-demo", with_topology(common), a.string()).code, cli::kExitOk);
  ASSERT_EQ(run("spike-demo",
                with_topology(common + R"(, "rescale": [0.5, 2, 3, 0.25, 1.5, 0.8, 4, 0.1])"),
                b.string())
                .code,
            cli::kExitOk);
  std::vector<double> ra, rb;
  for (const auto& row : csv_rows(a))
    if (row.size() == 4 && row[2] == "readout") ra.push_back(std::stod(row[3]));
  for (const auto& row : csv_rows(b))
    if (row.size() == 4 && row[2] == "readout") rb.push_back(std::stod(row[3]));
  ASSERT_EQ(ra.size(), 8u);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_NEAR(ra[i], rb[i], 1e-12);
}

TEST(CliSpikeDemo, ZeroRewardLeavesOnlyHebbianChange) {
  const auto a = scratch("spike_hebb.csv"), b = scratch("spike_reward0.csv"),
             c = scratch("spike_reward.csv");
  const std::string common = R"("weight": 0.9, "inputs": [[0, 0.5, 1]], "trials": 5, "seed": 9)";
  ASSERT_EQ(run("spike-demo", with_topology(common), a.string()).code, cli::kExitOk);
  ASSERT_EQ(run("spike-demo", with_topology(common + R"(, "reward_delta": 0)"), b.string()).code,
            cli::kExitOk);
  ASSERT_EQ(run("spike-demo", with_topology(common + R"(, "reward_delta": 0.5)"), c.string()).code,
            cli::kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
}

TEST(CliSpikeDemo, MissingTopologyIsConfigError) {
  EXPECT_EQ(run("spike-demo", "{}").code, cli::kExitConfig);
  EXPECT_EQ(run("spike-demo", with_topology(R"("weights": [1, 2])")).code, cli::kExitConfig);
}

TEST(Cli, UnknownCommand) { EXPECT_EQ(run("plot", "{}").code, cli::kExitConfig); }
