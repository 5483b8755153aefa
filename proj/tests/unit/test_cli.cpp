#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dse_oracle.hpp"
#include "lutdla/cli/cli.hpp"
#include "lutdla/cli/config.hpp"
#include "lutdla/nn.hpp"
#include "lutdla/rng.hpp"
#include "lutdla/serialize.hpp"

namespace lutdla {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lutdla_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  std::string config(const std::string& name, const std::string& yaml) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << yaml;
    return p.string();
  }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }
  static json load_json(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path dir_;
};

constexpr const char* kQuickConvert = R"(convert:
  pretrain_iterations: 300
  centroid_iterations: 60
  joint_iterations: 60
  data:
    train_size: 200
    val_size: 200
)";

TEST_F(Cli, ConvertDemoIsDeterministic) {
  const std::string cfg = config("c.yaml", kQuickConvert);
  const Outcome first = run({"--config", cfg, "--seed", "3", "--out", out("a"), "convert"});
  ASSERT_EQ(first.code, 0) << first.err;
  const Outcome second = run({"--config", cfg, "--seed", "3", "--out", out("a"), "convert"});
  ASSERT_EQ(second.code, 0) << second.err;
  const std::string summary = slurp(dir_ / "a" / "convert_summary.json");
  const Outcome third = run({"--config", cfg, "--seed", "3", "--out", out("b"), "convert"});
  ASSERT_EQ(third.code, 0);
  EXPECT_EQ(summary, slurp(dir_ / "b" / "convert_summary.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "model.ckpt"), slurp(dir_ / "b" / "model.ckpt"));

  const json j = json::parse(summary);
  EXPECT_GT(j["accuracy"]["dense"].get<double>(), 0.8);
  EXPECT_GT(j["accuracy"]["final"].get<double>(), 0.7);
  EXPECT_EQ(j["provenance"]["seed"], 3);
  for (const auto& f : j["outputs"]) EXPECT_TRUE(fs::exists(dir_ / "a" / f.get<std::string>())) << f;
}

TEST_F(Cli, ConvertLambdaZeroKeepsCentroidsThroughCentroidStage) {
  const std::string cfg = config("c.yaml", std::string(kQuickConvert) + "  lambda_re: 0\n");
  const Outcome r = run({"--config", cfg, "--out", out("o"), "convert"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "convert_summary.json");
  EXPECT_EQ(j["centroid_shift"]["centroid_stage"].get<double>(), 0.0);
  EXPECT_EQ(j["stages"]["centroid_stage"]["iterations"], 60);
}

TEST_F(Cli, ConvertFromCheckpoint) {
  const std::string cfg = config("c.yaml", kQuickConvert);
  ASSERT_EQ(run({"--config", cfg, "--out", out("first"), "convert"}).code, 0);
  const std::string dense = (dir_ / "first" / "dense.ckpt").string();
  const Outcome r = run({"--config", cfg, "--out", out("second"), "convert", "--model", dense});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "second" / "convert_summary.json");
  EXPECT_FALSE(j["stages"].contains("pretrain"));
  EXPECT_EQ(load_json(dir_ / "first" / "convert_summary.json")["accuracy"]["dense"], j["accuracy"]["dense"]);

  // a two-input net cannot take 64-pixel glyphs
  const std::string glyphs = config("g.yaml", "convert:\n  data:\n    name: glyphs\n");
  const Outcome bad = run({"--config", glyphs, "--out", out("third"), "convert", "--model", dense});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("inputs"), std::string::npos);
}

TEST_F(Cli, AmmCodewordInputsAreExact) {
  // every length-4 slice of A is one of 16 patterns, so k-means with c=16 recovers them
  Rng rng(5);
  Matrix patterns(16, 8);
  for (double& x : patterns.data()) x = rng.normal();
  Matrix a(64, 8);
  for (std::size_t m = 0; m < 64; ++m)
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t p = m < 16 ? m : rng.below(16);
      for (std::size_t i = 0; i < 4; ++i) a(m, 4 * k + i) = patterns(p, 4 * k + i);
    }
  Matrix b(8, 12);
  for (double& x : b.data()) x = rng.normal();
  save_matrix_csv(dir_ / "a.csv", a);
  save_matrix_bin(dir_ / "b.bin", b);
  const std::string cfg = config("amm.yaml", "amm:\n  vq: {v: 4, c: 16, lut_precision: FP32}\n  output: C.bin\n");
  const Outcome r = run({"--config", cfg, "--out", out("o"), "amm", (dir_ / "a.csv").string(), (dir_ / "b.bin").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "amm_report.json");
  EXPECT_LE(j["error"]["frobenius_rel"].get<double>(), 1e-5);
  const Matrix c = load_matrix(dir_ / "o" / "C.bin");
  EXPECT_EQ(c.rows(), 64u);
  EXPECT_EQ(c.cols(), 12u);
}

TEST_F(Cli, AmmGaussianReportHasErrorsAndCosts) {
  const Outcome r = run({"--out", out("o"), "amm"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "amm_report.json");
  EXPECT_EQ(j["shape"], (json{{"M", 64}, {"K", 64}, {"N", 64}}));
  EXPECT_EQ(j["vq"]["v"], 4);
  EXPECT_EQ(j["vq"]["c"], 16);
  for (const char* k : {"frobenius_rel", "max_abs"}) EXPECT_TRUE(j["error"][k].is_number()) << k;
  for (const char* k : {"op_sim", "op_add", "total"}) EXPECT_GT(j["tau"][k].get<double>(), 0) << k;
  for (const char* k : {"mem_lut", "mem_out", "mem_in", "total"}) EXPECT_GT(j["phi_bits"][k].get<double>(), 0) << k;
  const Matrix c = load_matrix(dir_ / "o" / "C.csv");
  EXPECT_EQ(c.rows(), 64u);
}

TEST_F(Cli, AmmCentroidSweepErrorsFallOnAverage) {
  const std::string cfg = config("s.yaml", "amm:\n  sweep_c: [2, 4, 8]\n");
  std::vector<double> mean(3, 0.0);
  for (int seed = 0; seed < 3; ++seed) {
    ASSERT_EQ(run({"--config", cfg, "--seed", std::to_string(seed), "--out", out("o"), "amm"}).code, 0);
    const json j = load_json(dir_ / "o" / "amm_report.json");
    ASSERT_EQ(j["sweep"].size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) mean[i] += j["sweep"][i]["frobenius_rel"].get<double>() / 3.0;
  }
  EXPECT_GE(mean[0], mean[1]);
  EXPECT_GE(mean[1], mean[2]);
}

TEST_F(Cli, AmmShapeMismatchExitsTwo) {
  save_matrix_csv(dir_ / "a.csv", Matrix(3, 5, 1.0));
  save_matrix_csv(dir_ / "b.csv", Matrix(4, 2, 1.0));
  const Outcome r = run({"--out", out("o"), "amm", (dir_ / "a.csv").string(), (dir_ / "b.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("shape mismatch"), std::string::npos);
  EXPECT_EQ(run({"--out", out("o"), "amm", (dir_ / "a.csv").string()}).code, 2);
  EXPECT_EQ(run({"--out", out("o"), "amm", (dir_ / "missing.csv").string(), (dir_ / "b.csv").string()}).code, 2);
}

TEST_F(Cli, EncodeWritesIndicesAndReusesCodebook) {
  Rng rng(9);
  Matrix a(20, 10);
  for (double& x : a.data()) x = rng.normal();
  save_matrix_csv(dir_ / "a.csv", a);
  const std::string cfg = config("e.yaml", "encode:\n  vq: {v: 4, c: 8}\n");
  ASSERT_EQ(run({"--config", cfg, "--out", out("o"), "encode", (dir_ / "a.csv").string()}).code, 0);
  const Matrix idx = load_matrix_csv(dir_ / "o" / "indices.csv");
  EXPECT_EQ(idx.rows(), 20u);
  EXPECT_EQ(idx.cols(), 3u);  // ceil(10 / 4)
  for (double x : idx.data()) EXPECT_TRUE(x >= 0 && x < 8 && x == std::floor(x));
  const json j = load_json(dir_ / "o" / "encode_report.json");
  EXPECT_EQ(j["subspaces"], 3);
  EXPECT_DOUBLE_EQ(j["bits_per_element"].get<double>(), 0.75);

  const std::string cb = (dir_ / "o" / "codebook.bin").string();
  ASSERT_EQ(run({"--config", cfg, "--out", out("p"), "encode", (dir_ / "a.csv").string(), "--codebook", cb}).code, 0);
  EXPECT_EQ(load_matrix_csv(dir_ / "p" / "indices.csv"), idx);

  save_matrix_csv(dir_ / "wide.csv", Matrix(2, 12, 0.5));
  EXPECT_EQ(run({"--config", cfg, "--out", out("q"), "encode", (dir_ / "wide.csv").string(), "--codebook", cb}).code, 2);
}

TEST_F(Cli, SimulateReferenceConfiguration) {
  const Outcome r = run({"--out", out("o"), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "sim.json");
  const double cycles = j["trace"]["total_cycles"].get<double>();
  EXPECT_NEAR(cycles, 4'743'000.0, 0.02 * 4'743'000.0);
  EXPECT_EQ(j["lane_lower_bound"].get<double>(), 4'718'592.0);
  EXPECT_GE(cycles, j["lane_lower_bound"].get<double>());
  EXPECT_EQ(j["trace"]["dominant"], "lut");
}

TEST_F(Cli, SimulateTraceAndFunctionalMode) {
  const std::string cfg = config("s.yaml", R"(simulate:
  shape: {M: 12, K: 10, N: 9}
  vq: {v: 3, c: 4}
  tile: {T_n: 4, M_tile: 5}
  hw: {n_IMM: 2, lut_banks: 2, beta: 40}
  trace: true
  functional: true
)");
  const Outcome r = run({"--config", cfg, "--out", out("o"), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "sim.json");
  EXPECT_TRUE(j["functional_match"].get<bool>());
  EXPECT_EQ(j["hw"]["beta"], 40.0);
  std::ifstream trace(dir_ / "o" / "sim_trace.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(trace, line)) {
    const json e = json::parse(line);
    if (lines++ == 0) EXPECT_EQ(e["provenance"]["command"], "simulate");
  }
  EXPECT_GT(lines, 10u);
}

TEST_F(Cli, DataflowLsFootprint) {
  const Outcome r = run({"--out", out("o"), "dataflow"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json ls = load_json(dir_ / "o" / "dataflow.json")["footprints_kib"]["LS"];
  EXPECT_NEAR(ls["indices"].get<double>(), 0.31, 0.05);
  EXPECT_NEAR(ls["psumlut"].get<double>(), 1.0, 0.05);
  EXPECT_NEAR(ls["scratchpad"].get<double>(), 16.0, 0.05);
  EXPECT_NEAR(ls["total"].get<double>(), 17.3, 0.05);
  std::ifstream csv(dir_ / "o" / "footprint.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) rows += !line.empty() && line[0] != '#';
  EXPECT_EQ(rows, 7u);  // header + six dataflows
}

TEST_F(Cli, DseTinySpaceMatchesBruteForce) {
  const std::string cfg = config("d.yaml", R"(dse:
  shape: {M: 128, K: 64, N: 128}
  space:
    v: [2, 4]
    c: [8, 16]
    metric: [L2, L1]
    n_IMM: [1, 2]
    max_n_IMM: 8
  constraints:
    max_phi_ratio: 1.5
    max_area: 150
)");
  const Outcome r = run({"--config", cfg, "--out", out("o"), "dse"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = load_json(dir_ / "o" / "dse_ranked.json");

  ProblemShape shape{128, 64, 128};
  SearchSpace space;
  space.v = {2, 4};
  space.c = {8, 16};
  space.metric = {Metric::L2, Metric::L1};
  space.n_IMM = {1, 2};
  space.max_n_IMM = 8;
  Constraints k;
  k.max_phi_ratio = 1.5;
  k.max_area = 150;
  const auto oracle = testing::brute_force_search(shape, space, k, CostTables::defaults(), nullptr);
  ASSERT_EQ(j["ranked"].size(), oracle.ranked.size());
  ASSERT_FALSE(oracle.ranked.empty());
  for (std::size_t i = 0; i < oracle.ranked.size(); ++i) {
    const DesignPoint& p = oracle.ranked[i];
    const json& e = j["ranked"][i];
    EXPECT_EQ(e["v"], p.v) << i;
    EXPECT_EQ(e["c"], p.c) << i;
    EXPECT_EQ(e["metric"], std::string(to_string(p.metric))) << i;
    EXPECT_EQ(e["n_IMM"], p.n_IMM) << i;
  }
  EXPECT_EQ(j["steps"][0]["survivors"], oracle.step1.size());
  EXPECT_EQ(j["steps"][1]["survivors"], oracle.step2.size());
  EXPECT_EQ(j["steps"][2]["survivors"], oracle.step3.size());
}

TEST_F(Cli, DseInfeasibleExitsThree) {
  const std::string cfg = config("d.yaml", "dse:\n  constraints: {max_area: 1}\n");
  const Outcome r = run({"--config", cfg, "--out", out("o"), "dse"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("binding area"), std::string::npos) << r.err;
  EXPECT_FALSE(load_json(dir_ / "o" / "dse_ranked.json")["feasible"].get<bool>());
}

TEST_F(Cli, ConfigIsValidatedStrictly) {
  EXPECT_EQ(run({"--config", config("a.yaml", "simulate:\n  hw: {n_imm: 2}\n"), "--out", out("o"), "dataflow"}).code, 2);
  EXPECT_EQ(run({"--config", config("b.yaml", "colour: blue\n"), "--out", out("o"), "dataflow"}).code, 2);
  EXPECT_EQ(run({"--config", config("c.yaml", "dataflow:\n  vq: {v: four}\n"), "--out", out("o"), "dataflow"}).code, 2);
  EXPECT_EQ(run({"--config", config("d.yaml", "dataflow: [1, 2]\n"), "--out", out("o"), "dataflow"}).code, 2);
  EXPECT_EQ(run({"--config", config("e.yaml", "amm:\n  vq: {metric: L3}\n"), "--out", out("o"), "amm"}).code, 2);
  EXPECT_EQ(run({"--config", config("f.yaml", "simulate:\n  hw: {beta: -1}\n"), "--out", out("o"), "simulate"}).code, 2);
  // a loader with no bandwidth is a legal config that can never finish
  const Outcome stuck = run({"--config", config("h.yaml", "simulate:\n  hw: {beta: 0}\n"), "--out", out("o"), "simulate"});
  EXPECT_EQ(stuck.code, 1);
  EXPECT_NE(stuck.err.find("deadlock"), std::string::npos) << stuck.err;
  EXPECT_EQ(run({"--config", (dir_ / "nope.yaml").string(), "dataflow"}).code, 2);
  EXPECT_EQ(run({"--out", out("o")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  const Outcome ok = run({"--config", config("g.yaml", "seed: 4\ndataflow:\n  kinds: [LS]\n"), "--out", out("o"), "dataflow"});
  EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(Cli, ProvenanceHeaderTracksConfigAndSeed) {
  auto header = [&](const std::vector<std::string>& args) {
    EXPECT_EQ(run(args).code, 0);
    std::ifstream f(dir_ / "o" / "footprint.csv");
    std::string line;
    std::getline(f, line);
    return line;
  };
  const std::string base = header({"--out", out("o"), "dataflow"});
  EXPECT_EQ(base.rfind("# lutdla ", 0), 0u) << base;
  EXPECT_NE(base.find("seed=0"), std::string::npos);
  EXPECT_EQ(header({"--out", out("o"), "dataflow"}), base);
  EXPECT_NE(header({"--out", out("o"), "--seed", "1", "dataflow"}), base);
  const std::string cfg = config("t.yaml", "dataflow:\n  tile: {T_n: 32}\n");
  EXPECT_NE(header({"--config", cfg, "--out", out("o"), "dataflow"}), base);
  // spelling out a default does not change the hash
  const std::string same = config("u.yaml", "dataflow:\n  tile: {T_n: 16}\n");
  EXPECT_EQ(header({"--config", same, "--out", out("o"), "dataflow"}), base);

  const json j = load_json(dir_ / "o" / "dataflow.json");
  EXPECT_EQ(j["provenance"]["tool"], "lutdla");
  EXPECT_EQ(j["provenance"]["version"], std::string(cli::version()));
  EXPECT_EQ(j["provenance"]["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST(CliConfig, Fnv1aKnownValues) {
  EXPECT_EQ(cli::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(cli::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(cli::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(CliConfig, ScalarsListsAndInfinity) {
  cli::Config c = cli::Config::parse("x: 3\ny: [1, 2]\nz: inf\nw: .inf\nq: 7\nf: false\n");
  cli::Section& r = c.root();
  EXPECT_EQ(r.size("x", 0), 3u);
  EXPECT_EQ(r.sizes("y", {}), (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(std::isinf(r.real("z", 0)));
  EXPECT_TRUE(std::isinf(r.real("w", 0)));
  EXPECT_EQ(r.sizes("q", {}), (std::vector<std::size_t>{7}));
  EXPECT_FALSE(r.flag("f", true));
  EXPECT_EQ(r.text("absent", "d"), "d");
  EXPECT_NO_THROW(c.check_unknown());
  EXPECT_EQ(c.effective()["z"], "inf");
  EXPECT_EQ(c.effective()["absent"], "d");

  cli::Config d = cli::Config::parse("x: -1\n");
  EXPECT_THROW(d.root().size("x", 0), Error);
  cli::Config e = cli::Config::parse("x: 1\nextra: 2\n");
  e.root().size("x", 0);
  EXPECT_THROW(e.check_unknown(), Error);
}

}  // namespace
}  // namespace lutdla
