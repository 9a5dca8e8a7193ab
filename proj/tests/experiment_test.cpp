#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vtn/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vtn::exp;

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("vtn_experiment_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig random_policy_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.mode = Mode::kEvaluate;
  cfg.evaluation.policy = "random";
  cfg.evaluation.episodes = 2;
  cfg.network.episode_length = 10;
  cfg.out_dir = out.string();
  return cfg;
}

ExperimentConfig tiny_training_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.sweep.n = {3};
  cfg.sweep.ibc_mode = {vtn::latency::IbcMode::kWithIbc, vtn::latency::IbcMode::kWithoutIbc};
  cfg.seeds = {1, 2};
  cfg.train.iterations = 2;
  cfg.train.episodes_per_iteration = 1;
  cfg.train.steps_per_episode = 5;
  cfg.train.hidden = {8};
  cfg.evaluation.episodes = 1;
  cfg.network.episode_length = 5;
  cfg.out_dir = out.string();
  return cfg;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(cells);
  }
  return rows;
}

TEST(Grid, BothModesDoubleTheRows) {
  ExperimentConfig cfg = random_policy_config(scratch_dir("grid"));
  cfg.sweep.ibc_mode = {vtn::latency::IbcMode::kWithIbc, vtn::latency::IbcMode::kWithoutIbc};
  auto rows = run_sweep(cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].ibc_mode, vtn::latency::IbcMode::kWithIbc);
  EXPECT_EQ(rows[1].ibc_mode, vtn::latency::IbcMode::kWithoutIbc);
  EXPECT_GT(rows[0].avg_latency_ms, rows[1].avg_latency_ms);

  cfg.sweep.n = {4, 6};
  cfg.seeds = {3, 4, 5};
  EXPECT_EQ(run_sweep(cfg).size(), 2u * 2u * 3u);
}

TEST(Grid, RowsAreRecomputableFromLibraryCalls) {
  ExperimentConfig cfg = random_policy_config(scratch_dir("recompute"));
  cfg.seeds = {7};
  auto rows = run_sweep(cfg);
  vtn::env::NetworkConfig net = network_for(cfg, expand_grid(cfg)[0]);
  net.seed = 7 + cfg.evaluation.seed_offset;
  vtn::env::RandomPolicy policy(net.cloud_capacity_ghz);
  auto m = vtn::env::evaluate_policy(policy, net, cfg.evaluation.episodes);
  EXPECT_EQ(rows[0].avg_latency_ms, m.avg_latency_ms);
  EXPECT_EQ(rows[0].offload_pct, m.offload_percentage);
  EXPECT_EQ(rows[0].mean_reward, m.mean_reward);
}

TEST(Emit, CsvLayout) {
  ResultRow r;
  r.n = 10;
  r.task_size_bytes = 50;
  r.rate_mbps = 100;
  r.seed = 3;
  r.avg_latency_ms = 12.345678;
  r.offload_pct = 50;
  r.mean_reward = -0.1234567;
  std::string csv = to_csv({r});
  EXPECT_EQ(csv, std::string(kCsvHeader) + "\n10,50.0000,100.0000,with-ibc,3,12.3457,50.0000,-0.1235,\n");
  r.oracle_gap = 0.25;
  EXPECT_NE(to_csv({r}).find(",0.2500\n"), std::string::npos);
}

TEST(Emit, EmptyRowsAndUnwritablePath) {
  auto dir = scratch_dir("emit");
  EXPECT_THROW(emit_results({}, Format::kCsv, dir / "x.csv"), ConfigError);
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_results({ResultRow{}}, Format::kCsv, dir / "file" / "x.csv"), IoError);
}

TEST(Emit, JsonAndCsvAgree) {
  auto dir = scratch_dir("roundtrip");
  ExperimentConfig cfg = random_policy_config(dir);
  cfg.mode = Mode::kOracle;
  cfg.sweep.n = {3, 30};
  cfg.sweep.rate_mbps = {100, 1000};
  ASSERT_EQ(run_experiment(cfg), kExitOk);
  auto csv = parse_csv(slurp(dir / "results.csv"));
  auto json_rows = json::parse(slurp(dir / "results.json"));
  ASSERT_EQ(csv.size(), json_rows.size() + 1);
  const auto& header = csv[0];
  for (std::size_t i = 0; i < json_rows.size(); ++i) {
    const auto& obj = json_rows[i];
    ASSERT_EQ(obj.size(), header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
      const json& v = obj.at(header[c]);
      const std::string& cell = csv[i + 1][c];
      if (v.is_null()) EXPECT_TRUE(cell.empty()) << header[c];
      else if (v.is_string()) EXPECT_EQ(v.get<std::string>(), cell);
      else EXPECT_EQ(v.get<double>(), std::stod(cell)) << header[c];
    }
  }
  // The oracle gap is present for n = 3 and absent above the exhaustive limit.
  EXPECT_FALSE(json_rows[0]["oracle_gap"].is_null());
  EXPECT_TRUE(json_rows.back()["oracle_gap"].is_null());
  auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["version"], VTN_VERSION);
  EXPECT_EQ(manifest["config"], config_to_json(cfg));
}

TEST(Oracle, GapMatchesIndependentComputation) {
  ExperimentConfig cfg = random_policy_config(scratch_dir("gap"));
  cfg.mode = Mode::kOracle;
  cfg.evaluation.policy = "offload";
  cfg.sweep.n = {6};
  auto rows = run_sweep(cfg);
  ASSERT_TRUE(rows[0].oracle_gap.has_value());

  // Always-offload requests F each; projection gives F/n each.
  vtn::env::NetworkConfig net = network_for(cfg, expand_grid(cfg)[0]);
  net.size_jitter = net.rate_jitter = 0;
  auto vehicles = vtn::env::nominal_vehicles(net);
  std::vector<int> all(6, 1);
  vtn::latency::CloudProfile cloud{net.cloud_capacity_ghz, std::vector<double>(6, net.cloud_capacity_ghz / 6)};
  double agent = vtn::latency::total_latency(all, vehicles, cloud, net.costs);
  double best = vtn::oracle::exhaustive_best({vehicles, net.cloud_capacity_ghz, net.costs}).total_latency_s;
  EXPECT_NEAR(*rows[0].oracle_gap, (agent - best) / best, 1e-12);
  EXPECT_GE(*rows[0].oracle_gap, 0.0);
}

TEST(Sweep, TrainedRunsAreByteIdenticalAcrossReruns) {
  auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  ASSERT_EQ(run_experiment(tiny_training_config(a)), kExitOk);
  ASSERT_EQ(run_experiment(tiny_training_config(b)), kExitOk);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(parse_csv(slurp(a / "results.csv")).size(), 1u + 2u * 2u);
  EXPECT_TRUE(fs::exists(a / "runs" / "n3_s50_r100_with-ibc_seed1" / "checkpoint.bin"));
}

TEST(Sweep, EvaluatesACheckpoint) {
  auto dir = scratch_dir("ckpt");
  ExperimentConfig train = tiny_training_config(dir);
  train.mode = Mode::kTrain;
  auto trained = run_sweep(train);
  ASSERT_EQ(trained.size(), 1u);

  ExperimentConfig eval = train;
  eval.mode = Mode::kEvaluate;
  eval.sweep.ibc_mode = {vtn::latency::IbcMode::kWithIbc};
  eval.seeds = {1};
  eval.evaluation.checkpoint = (dir / "runs" / "n3_s50_r100_with-ibc_seed1" / "checkpoint.bin").string();
  auto rows = run_sweep(eval);
  EXPECT_EQ(rows[0].avg_latency_ms, trained[0].avg_latency_ms);

  eval.sweep.n = {5};
  EXPECT_THROW(run_sweep(eval), IoError);
}

TEST(Sweep, DivergenceFlagsTheRow) {
  ExperimentConfig cfg = tiny_training_config(scratch_dir("diverge"));
  cfg.seeds = {1};
  cfg.sweep.ibc_mode = {vtn::latency::IbcMode::kWithIbc};
  cfg.train.learning_rate = 1e300;
  cfg.train.iterations = 5;
  ASSERT_EQ(run_experiment(cfg), kExitDivergence);
  EXPECT_NE(slurp(fs::path(cfg.out_dir) / "results.csv").find("with-ibc,1,,,,\n"), std::string::npos);
}

TEST(Config, PrecedenceAndValidation) {
  auto dir = scratch_dir("config");
  fs::create_directories(dir);
  auto path = dir / "cfg.json";
  std::ofstream(path) << R"({"mode": "evaluate", "seeds": [5, 6], "train": {"iterations": 9},
                             "sweep": {"ibc_mode": "both"}, "evaluation": {"policy": "random"}})";
  CliFlags flags;
  flags.config_path = path.string();
  auto cfg = resolve_config(flags);
  EXPECT_EQ(cfg.mode, Mode::kEvaluate);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{5, 6}));
  EXPECT_EQ(cfg.train.iterations, 9u);
  EXPECT_EQ(cfg.sweep.ibc_mode.size(), 2u);
  EXPECT_EQ(cfg.train.learning_rate, 0.003);

  flags.overrides = {"train.iterations=11", "sweep.n=[4,8]", "curve=toy17"};
  flags.seed = 42;
  cfg = resolve_config(flags);
  EXPECT_EQ(cfg.train.iterations, 11u);
  EXPECT_EQ(cfg.sweep.n, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(cfg.curve, "toy17");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{42}));

  flags.overrides = {"train.iterations=11", "mode=sweep"};
  flags.mode = "oracle";
  EXPECT_EQ(resolve_config(flags).mode, Mode::kOracle);

  auto rejects = [&](std::vector<std::string> overrides) {
    CliFlags f;
    f.overrides = std::move(overrides);
    EXPECT_THROW(resolve_config(f), ConfigError);
  };
  rejects({"train.iteratons=3"});
  rejects({"seeds=[1,1]"});
  rejects({"sweep.n=[]"});
  rejects({"mode=bogus"});
  rejects({"train.clip_epsilon=2"});
  rejects({"curve=/nonexistent/curve.json"});
  rejects({"mode=evaluate"});
  rejects({"network=3"});
  rejects({"noequals"});
}

int run_cli(const std::string& args) {
  int status = std::system((std::string(VTN_SIM_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  auto dir = scratch_dir("cli");
  std::string base = "--mode evaluate --override evaluation.policy=random --override evaluation.episodes=1 "
                     "--override network.episode_length=5 ";
  EXPECT_EQ(run_cli(base + "--out " + (dir / "ok").string()), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "ok" / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "ok" / "manifest.json"));
  EXPECT_EQ(run_cli(base + "--override seeds=[1,1] --out " + dir.string()), kExitConfig);
  EXPECT_EQ(run_cli("--config " + (dir / "missing.json").string()), kExitConfig);
  EXPECT_EQ(run_cli("--bogus-flag"), kExitConfig);
  EXPECT_EQ(run_cli(base + "--out " + (dir / "ok" / "results.csv" / "sub").string()), kExitIo);
  EXPECT_EQ(run_cli("--mode train --override sweep.n=[2] --override train.iterations=3 "
                    "--override train.episodes_per_iteration=1 --override train.steps_per_episode=3 "
                    "--override train.learning_rate=1e300 --out " + (dir / "div").string()),
            kExitDivergence);
}

}  // namespace
