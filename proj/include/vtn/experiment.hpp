#pragma once

// Experiment orchestration: config resolution (defaults < file < overrides <
// flags), the sweep grid, a worker pool over runs, and CSV/JSON emission.
// Every metric is produced by library calls; the CLI only parses arguments.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtn/curve_presets.hpp"
#include "vtn/ibc_auth.hpp"
#include "vtn/offload_env.hpp"
#include "vtn/oracle.hpp"
#include "vtn/ppo_agent.hpp"

#ifndef VTN_VERSION
#define VTN_VERSION "0.0.0"
#endif

namespace vtn::exp {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { kTrain, kEvaluate, kOracle, kSweep };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::kTrain: return "train";
    case Mode::kEvaluate: return "evaluate";
    case Mode::kOracle: return "oracle";
    case Mode::kSweep: return "sweep";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "train") return Mode::kTrain;
  if (s == "evaluate") return Mode::kEvaluate;
  if (s == "oracle") return Mode::kOracle;
  if (s == "sweep") return Mode::kSweep;
  throw ConfigError("unknown mode '" + s + "' (expected train, evaluate, oracle or sweep)");
}

struct SweepGrid {
  std::vector<std::size_t> n{10};
  std::vector<double> task_size_bytes{50.0};
  std::vector<double> rate_mbps{100.0};
  std::vector<latency::IbcMode> ibc_mode{latency::IbcMode::kWithIbc};
};

// Policy evaluated for each run. "trained" trains per run unless a checkpoint is given.
inline const std::set<std::string> kPolicies{"trained", "random", "local", "offload"};

struct EvaluationConfig {
  std::size_t episodes = 10;
  std::string policy = "trained";
  std::string checkpoint;
  // Evaluation episodes use seed + offset so they do not replay training episodes.
  std::uint64_t seed_offset = 1000;
};

struct ExperimentConfig {
  Mode mode = Mode::kSweep;
  SweepGrid sweep;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = "results";
  std::string curve = "p256";
  env::NetworkConfig network;  // swept fields and seed are overwritten per run
  ppo::TrainConfig train;
  EvaluationConfig evaluation;

  void validate() const {
    if (sweep.n.empty() || sweep.task_size_bytes.empty() || sweep.rate_mbps.empty() || sweep.ibc_mode.empty())
      throw ConfigError("sweep lists must be non-empty");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ConfigError("seeds must be distinct");
    if (!kPolicies.contains(evaluation.policy))
      throw ConfigError("evaluation.policy must be trained, random, local or offload");
    if (evaluation.episodes < 1) throw ConfigError("evaluation.episodes must be at least 1");
    if (mode == Mode::kTrain && evaluation.policy != "trained")
      throw ConfigError("train mode needs evaluation.policy = trained");
    if (mode == Mode::kEvaluate && evaluation.policy == "trained" && evaluation.checkpoint.empty())
      throw ConfigError("evaluate mode needs evaluation.checkpoint or a fixed evaluation.policy");
    try {
      train.validate();
      for (std::size_t n : sweep.n) {
        env::NetworkConfig probe = network;
        probe.vehicles = n;
        for (double s : sweep.task_size_bytes)
          for (double r : sweep.rate_mbps) {
            probe.task_size_bytes = s;
            probe.rate_mbps = r;
            probe.validate();
          }
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    try {
      (void)ec::resolve_curve(curve);
    } catch (const std::exception& e) {
      throw ConfigError("curve '" + curve + "': " + e.what());
    }
  }
};

// ---- JSON form -------------------------------------------------------------

inline json network_to_json(const env::NetworkConfig& n) {
  return {{"cloud_capacity_ghz", n.cloud_capacity_ghz},
          {"vehicle_compute_ghz", n.vehicle_compute_ghz},
          {"speed_mps", n.speed_mps},
          {"episode_length", n.episode_length},
          {"size_jitter", n.size_jitter},
          {"rate_jitter", n.rate_jitter},
          {"initial_alloc_min_ghz", n.initial_alloc_min_ghz},
          {"initial_alloc_max_ghz", n.initial_alloc_max_ghz},
          {"costs",
           {{"sign_cycles_per_byte", n.costs.sign_cycles_per_byte},
            {"verify_cycles_per_byte", n.costs.verify_cycles_per_byte},
            {"base_cycles_per_byte", n.costs.base_cycles_per_byte},
            {"speed_of_light_mps", n.costs.speed_of_light_mps},
            {"cloud_distance_km", n.costs.cloud_distance_km}}}};
}

inline env::NetworkConfig network_from_json(const json& j) {
  env::NetworkConfig n;
  n.cloud_capacity_ghz = j.at("cloud_capacity_ghz").get<double>();
  n.vehicle_compute_ghz = j.at("vehicle_compute_ghz").get<double>();
  n.speed_mps = j.at("speed_mps").get<double>();
  n.episode_length = j.at("episode_length").get<std::size_t>();
  n.size_jitter = j.at("size_jitter").get<double>();
  n.rate_jitter = j.at("rate_jitter").get<double>();
  n.initial_alloc_min_ghz = j.at("initial_alloc_min_ghz").get<double>();
  n.initial_alloc_max_ghz = j.at("initial_alloc_max_ghz").get<double>();
  const json& c = j.at("costs");
  n.costs.sign_cycles_per_byte = c.at("sign_cycles_per_byte").get<double>();
  n.costs.verify_cycles_per_byte = c.at("verify_cycles_per_byte").get<double>();
  n.costs.base_cycles_per_byte = c.at("base_cycles_per_byte").get<double>();
  n.costs.speed_of_light_mps = c.at("speed_of_light_mps").get<double>();
  n.costs.cloud_distance_km = c.at("cloud_distance_km").get<double>();
  return n;
}

inline json config_to_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (auto m : c.sweep.ibc_mode) modes.push_back(latency::to_string(m));
  return {{"mode", to_string(c.mode)},
          {"sweep",
           {{"n", c.sweep.n},
            {"task_size_bytes", c.sweep.task_size_bytes},
            {"rate_mbps", c.sweep.rate_mbps},
            {"ibc_mode", modes}}},
          {"seeds", c.seeds},
          {"out", c.out_dir},
          {"curve", c.curve},
          {"network", network_to_json(c.network)},
          {"train", c.train},
          {"evaluation",
           {{"episodes", c.evaluation.episodes},
            {"policy", c.evaluation.policy},
            {"checkpoint", c.evaluation.checkpoint},
            {"seed_offset", c.evaluation.seed_offset}}}};
}

inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.mode = parse_mode(j.at("mode").get<std::string>());
    const json& s = j.at("sweep");
    c.sweep.n = s.at("n").get<std::vector<std::size_t>>();
    c.sweep.task_size_bytes = s.at("task_size_bytes").get<std::vector<double>>();
    c.sweep.rate_mbps = s.at("rate_mbps").get<std::vector<double>>();
    c.sweep.ibc_mode.clear();
    const json& modes = s.at("ibc_mode");
    auto add_mode = [&](const std::string& m) {
      if (m == "both") {
        c.sweep.ibc_mode.push_back(latency::IbcMode::kWithIbc);
        c.sweep.ibc_mode.push_back(latency::IbcMode::kWithoutIbc);
      } else {
        c.sweep.ibc_mode.push_back(latency::parse_ibc_mode(m));
      }
    };
    if (modes.is_string()) {
      add_mode(modes.get<std::string>());
    } else {
      for (const auto& m : modes) add_mode(m.get<std::string>());
    }
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.out_dir = j.at("out").get<std::string>();
    c.curve = j.at("curve").get<std::string>();
    c.network = network_from_json(j.at("network"));
    c.train = j.at("train").get<ppo::TrainConfig>();
    const json& e = j.at("evaluation");
    c.evaluation.episodes = e.at("episodes").get<std::size_t>();
    c.evaluation.policy = e.at("policy").get<std::string>();
    c.evaluation.checkpoint = e.at("checkpoint").get<std::string>();
    c.evaluation.seed_offset = e.at("seed_offset").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const latency::DomainError& e) {
    throw ConfigError(e.what());
  }
}

namespace detail {

// Rejects keys that the defaults do not have, so typos fail loudly.
inline void check_known_keys(const json& patch, const json& schema, const std::string& where) {
  if (!patch.is_object()) return;
  for (const auto& [key, value] : patch.items()) {
    std::string path = where.empty() ? key : where + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (schema.at(key).is_object()) {
      if (!value.is_object()) throw ConfigError("config key '" + path + "' must be a table");
      check_known_keys(value, schema.at(key), path);
    }
  }
}

inline json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

}  // namespace detail

/// Applies `key=value` with a dotted key path. Values are read as JSON when
/// they parse, otherwise as bare strings.
inline void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("cannot override the table '" + key + "' with a value");
  *node = detail::parse_override_value(assignment.substr(eq + 1));
}

struct CliFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
};

/// Precedence: explicit flags > --override > config file > built-in defaults.
inline ExperimentConfig resolve_config(const CliFlags& flags) {
  json doc = config_to_json(ExperimentConfig{});
  if (flags.config_path) {
    std::ifstream in(*flags.config_path);
    if (!in) throw ConfigError("cannot read config file: " + *flags.config_path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw ConfigError("config file is not a JSON object: " + *flags.config_path);
    detail::check_known_keys(file, doc, "");
    doc.merge_patch(file);
  }
  for (const auto& o : flags.overrides) apply_override(doc, o);
  if (flags.mode) doc["mode"] = *flags.mode;
  if (flags.seed) doc["seeds"] = json::array({*flags.seed});
  if (flags.out_dir) doc["out"] = *flags.out_dir;
  ExperimentConfig cfg = config_from_json(doc);
  cfg.validate();
  return cfg;
}

// ---- runs ------------------------------------------------------------------

struct RunSpec {
  std::size_t n = 0;
  double task_size_bytes = 0.0;
  double rate_mbps = 0.0;
  latency::IbcMode ibc_mode = latency::IbcMode::kWithIbc;
  std::uint64_t seed = 0;

  std::string id() const {
    std::ostringstream id;
    id << 'n' << n << "_s" << task_size_bytes << "_r" << rate_mbps << '_' << latency::to_string(ibc_mode) << "_seed" << seed;
    return id.str();
  }
};

struct ResultRow {
  std::size_t n = 0;
  double task_size_bytes = 0.0;
  double rate_mbps = 0.0;
  latency::IbcMode ibc_mode = latency::IbcMode::kWithIbc;
  std::uint64_t seed = 0;
  double avg_latency_ms = 0.0;
  double offload_pct = 0.0;
  double mean_reward = 0.0;
  std::optional<double> oracle_gap;
  // Training diverged; metric cells are left empty.
  bool diverged = false;
};

/// Grid points in a fixed order: n, size, rate, IBC mode, then seed.
inline std::vector<RunSpec> expand_grid(const ExperimentConfig& cfg) {
  std::vector<RunSpec> runs;
  for (std::size_t n : cfg.sweep.n)
    for (double s : cfg.sweep.task_size_bytes)
      for (double r : cfg.sweep.rate_mbps)
        for (auto m : cfg.sweep.ibc_mode)
          for (std::uint64_t seed : cfg.seeds) runs.push_back({n, s, r, m, seed});
  if (cfg.mode == Mode::kTrain) runs.resize(1);
  return runs;
}

inline env::NetworkConfig network_for(const ExperimentConfig& cfg, const RunSpec& run) {
  env::NetworkConfig net = cfg.network;
  net.vehicles = run.n;
  net.task_size_bytes = run.task_size_bytes;
  net.rate_mbps = run.rate_mbps;
  net.ibc_mode = run.ibc_mode;
  net.auth_overhead_bytes = ibc::auth_overhead_bytes(ec::resolve_curve(cfg.curve));
  net.seed = run.seed;
  return net;
}

inline std::filesystem::path run_dir(const ExperimentConfig& cfg, const RunSpec& run) {
  return std::filesystem::path(cfg.out_dir) / "runs" / run.id();
}

/// Relative excess of the policy's total latency over the exhaustive optimum on
/// the frozen (jitter-free) instance of `net`.
inline double oracle_gap(env::Policy& policy, env::NetworkConfig net) {
  net.size_jitter = 0.0;
  net.rate_jitter = 0.0;
  oracle::InstanceSpec inst{env::nominal_vehicles(net), net.cloud_capacity_ghz, net.costs};
  double best = oracle::exhaustive_best(inst).total_latency_s;
  env::OffloadEnv environment(net);
  env::EnvState state = environment.reset(net.seed);
  std::seed_seq seq{net.seed, std::uint64_t{0x0fac1e}};
  std::mt19937_64 rng(seq);
  double agent = -environment.step(policy.act(state, rng)).reward;
  return (agent - best) / best;
}

inline ResultRow run_one(const ExperimentConfig& cfg, const RunSpec& run) {
  ResultRow row;
  row.n = run.n;
  row.task_size_bytes = run.task_size_bytes;
  row.rate_mbps = run.rate_mbps;
  row.ibc_mode = run.ibc_mode;
  row.seed = run.seed;
  env::NetworkConfig net = network_for(cfg, run);

  std::unique_ptr<ppo::Trainer> trainer;
  std::unique_ptr<env::Policy> policy;
  const std::string& kind = cfg.evaluation.policy;
  if (kind == "trained") {
    if (!cfg.evaluation.checkpoint.empty()) {
      try {
        trainer = std::make_unique<ppo::Trainer>(ppo::Trainer::load_checkpoint(cfg.evaluation.checkpoint, net));
      } catch (const ppo::CheckpointError& e) {
        throw IoError(e.what());
      }
    } else {
      ppo::TrainConfig tc = cfg.train;
      tc.seed = run.seed;
      trainer = std::make_unique<ppo::Trainer>(net, tc);
      try {
        trainer->train();
      } catch (const ppo::TrainingDivergence&) {
        row.diverged = true;
        return row;
      }
      auto dir = run_dir(cfg, run);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      try {
        trainer->save_checkpoint((dir / "checkpoint.bin").string());
      } catch (const ppo::CheckpointError& e) {
        throw IoError(e.what());
      }
    }
    policy = std::make_unique<ppo::PpoPolicy>(trainer->params(), true);
  } else if (kind == "random") {
    policy = std::make_unique<env::RandomPolicy>(net.cloud_capacity_ghz);
  } else if (kind == "local") {
    policy = std::make_unique<env::AlwaysLocalPolicy>();
  } else {
    policy = std::make_unique<env::AlwaysOffloadPolicy>(net.cloud_capacity_ghz);
  }

  env::NetworkConfig eval_net = net;
  eval_net.seed = run.seed + cfg.evaluation.seed_offset;
  env::EvalMetrics m = env::evaluate_policy(*policy, eval_net, cfg.evaluation.episodes);
  row.avg_latency_ms = m.avg_latency_ms;
  row.offload_pct = m.offload_percentage;
  row.mean_reward = m.mean_reward;
  if (cfg.mode == Mode::kOracle && run.n <= oracle::kMaxExhaustiveVehicles) row.oracle_gap = oracle_gap(*policy, net);
  return row;
}

/// Worker count: VTN_SIM_THREADS if set, otherwise the hardware concurrency.
inline std::size_t worker_count(std::size_t runs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env_threads = std::getenv("VTN_SIM_THREADS")) {
    try {
      long v = std::stol(env_threads);
      if (v >= 1) cap = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("VTN_SIM_THREADS is not a positive integer: ") + env_threads);
    }
  }
  return std::max<std::size_t>(1, std::min(cap, runs));
}

/// Rows come back in grid order regardless of scheduling.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunSpec> runs = expand_grid(cfg);
  std::vector<ResultRow> rows(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        rows[i] = run_one(cfg, runs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    std::size_t workers = worker_count(runs.size());
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

// ---- output ----------------------------------------------------------------

inline constexpr const char* kCsvHeader = "n,task_size_bytes,rate_mbps,ibc_mode,seed,avg_latency_ms,offload_pct,mean_reward,oracle_gap";

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << fixed4(r.task_size_bytes) << ',' << fixed4(r.rate_mbps) << ',' << latency::to_string(r.ibc_mode)
        << ',' << r.seed << ',';
    if (!r.diverged) out << fixed4(r.avg_latency_ms) << ',' << fixed4(r.offload_pct) << ',' << fixed4(r.mean_reward);
    else out << ",,";
    out << ',';
    if (r.oracle_gap && !r.diverged) out << fixed4(*r.oracle_gap);
    out << '\n';
  }
  return out.str();
}

inline json to_json_rows(const std::vector<ResultRow>& rows) {
  auto rounded = [](double v) { return std::stod(fixed4(v)); };
  json arr = json::array();
  for (const auto& r : rows) {
    json o{{"n", r.n},
           {"task_size_bytes", rounded(r.task_size_bytes)},
           {"rate_mbps", rounded(r.rate_mbps)},
           {"ibc_mode", latency::to_string(r.ibc_mode)},
           {"seed", r.seed}};
    o["avg_latency_ms"] = r.diverged ? json(nullptr) : json(rounded(r.avg_latency_ms));
    o["offload_pct"] = r.diverged ? json(nullptr) : json(rounded(r.offload_pct));
    o["mean_reward"] = r.diverged ? json(nullptr) : json(rounded(r.mean_reward));
    o["oracle_gap"] = r.oracle_gap && !r.diverged ? json(rounded(*r.oracle_gap)) : json(nullptr);
    arr.push_back(std::move(o));
  }
  return arr;
}

enum class Format { kCsv, kJson };

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

inline void emit_results(const std::vector<ResultRow>& rows, Format format, const std::filesystem::path& path) {
  if (rows.empty()) throw ConfigError("refusing to emit an empty result table");
  write_file(path, format == Format::kCsv ? to_csv(rows) : to_json_rows(rows).dump(2) + "\n");
}

inline void write_manifest(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  json runs = json::array();
  for (const auto& run : expand_grid(cfg)) runs.push_back(run.id());
  std::size_t diverged = static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.diverged; }));
  json manifest{{"version", VTN_VERSION}, {"config", config_to_json(cfg)}, {"runs", runs}, {"diverged_runs", diverged}};
  write_file(std::filesystem::path(cfg.out_dir) / "manifest.json", manifest.dump(2) + "\n");
}

/// Full pipeline behind the CLI. Returns the process exit code.
inline int run_experiment(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
  std::vector<ResultRow> rows = run_sweep(cfg);
  std::filesystem::path out(cfg.out_dir);
  emit_results(rows, Format::kCsv, out / "results.csv");
  emit_results(rows, Format::kJson, out / "results.json");
  write_manifest(cfg, rows);
  bool diverged = std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.diverged; });
  return diverged ? kExitDivergence : kExitOk;
}

}  // namespace vtn::exp
