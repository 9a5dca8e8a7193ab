#pragma once

// Episodic offloading environment over the vehicle twins. Each step the agent
// picks offload bits and cloud-cycle requests for every vehicle; the reward is
// the negated total latency of the projected (feasible) action.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "vtn/latency_model.hpp"

namespace vtn::env {

using latency::CostConstants;
using latency::IbcMode;
using latency::VehicleProfile;

inline constexpr std::size_t kFeaturesPerVehicle = 6;

// Reference scales that bring state features to order one.
inline constexpr double kBytesScale = 1e6;
inline constexpr double kCyclesScale = 1e5;
inline constexpr double kComputeScale = 10.0;  // GHz
inline constexpr double kRateScale = 1e9;      // bit/s

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NetworkConfig {
  std::size_t vehicles = 10;
  double task_size_bytes = 50.0;
  double rate_mbps = 100.0;
  double cloud_capacity_ghz = 20.0;
  double vehicle_compute_ghz = 1.0;
  double speed_mps = 25.0;
  IbcMode ibc_mode = IbcMode::kWithIbc;
  // Envelope overhead of the signing curve; 139 bytes for P-256.
  std::size_t auth_overhead_bytes = 139;
  std::uint64_t seed = 0;
  std::size_t episode_length = 100;
  double size_jitter = 0.10;
  double rate_jitter = 0.05;
  double initial_alloc_min_ghz = 2.0;
  double initial_alloc_max_ghz = 4.0;
  CostConstants costs;

  void validate() const {
    if (vehicles < 1) throw ContractError("network needs at least one vehicle");
    if (!(task_size_bytes >= 0)) throw ContractError("task size must be non-negative");
    if (!(rate_mbps > 0 && cloud_capacity_ghz > 0 && vehicle_compute_ghz > 0))
      throw ContractError("rates and capacities must be positive");
    if (episode_length < 1) throw ContractError("episode length must be at least 1");
    if (!(size_jitter >= 0 && size_jitter < 1 && rate_jitter >= 0 && rate_jitter < 1))
      throw ContractError("jitter fractions must lie in [0, 1)");
    if (!(initial_alloc_min_ghz > 0 && initial_alloc_min_ghz <= initial_alloc_max_ghz))
      throw ContractError("initial allocation range is invalid");
    costs.validate();
  }
};

struct EnvState {
  std::vector<double> features;  // 6 per vehicle: d, c_sign, c_verify, f_V, T_up, T_down (normalized)
  std::vector<VehicleProfile> vehicles;
  std::size_t step = 0;
};

struct EnvAction {
  std::vector<int> offload;             // x_i in {0, 1}
  std::vector<double> request_ghz;      // cloud cycles requested per vehicle
};

struct StepInfo {
  std::vector<double> per_vehicle_latency_s;
  std::size_t offloaded = 0;
  double total_latency_s = 0.0;
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
  EnvAction projected;
};

inline std::vector<double> encode_features(const std::vector<VehicleProfile>& vehicles) {
  std::vector<double> features;
  features.reserve(vehicles.size() * kFeaturesPerVehicle);
  for (const auto& v : vehicles) {
    features.push_back(v.task_bytes / kBytesScale);
    features.push_back(v.sign_cycles_per_byte / kCyclesScale);
    features.push_back(v.verify_cycles_per_byte / kCyclesScale);
    features.push_back(v.compute_ghz / kComputeScale);
    features.push_back(v.uplink_mbps * latency::kMega / kRateScale);
    features.push_back(v.downlink_mbps * latency::kMega / kRateScale);
  }
  return features;
}

inline VehicleProfile make_vehicle(const NetworkConfig& cfg, double payload_bytes, double uplink_mbps,
                                   double downlink_mbps) {
  auto shape = latency::ibc_mode_profile(payload_bytes, cfg.ibc_mode, cfg.auth_overhead_bytes, cfg.costs);
  VehicleProfile v;
  v.compute_ghz = cfg.vehicle_compute_ghz;
  v.speed_mps = cfg.speed_mps;
  v.payload_bytes = payload_bytes;
  v.task_bytes = shape.task_bytes;
  v.sign_cycles_per_byte = shape.sign_cycles_per_byte;
  v.verify_cycles_per_byte = shape.verify_cycles_per_byte;
  v.uplink_mbps = uplink_mbps;
  v.downlink_mbps = downlink_mbps;
  return v;
}

/// Vehicles at the preset size and nominal rate, no jitter.
inline std::vector<VehicleProfile> nominal_vehicles(const NetworkConfig& cfg) {
  return std::vector<VehicleProfile>(cfg.vehicles, make_vehicle(cfg, cfg.task_size_bytes, cfg.rate_mbps, cfg.rate_mbps));
}

/// Enforces Σ_{offloaded} f_i ≤ F by proportional rescaling, then clamps each
/// request into (0, F]. Requests of local vehicles pass through untouched.
inline EnvAction project_action(const EnvAction& raw, double capacity_ghz) {
  if (raw.offload.size() != raw.request_ghz.size()) throw ContractError("action vectors differ in length");
  EnvAction out = raw;
  double total = 0.0;
  for (std::size_t i = 0; i < out.offload.size(); ++i) {
    if (out.offload[i] == 0) continue;
    if (!(out.request_ghz[i] > 0)) throw ContractError("offloaded vehicle requested non-positive cycles");
    out.request_ghz[i] = std::min(out.request_ghz[i], capacity_ghz);
    total += out.request_ghz[i];
  }
  if (total > capacity_ghz) {
    double scale = capacity_ghz / total;
    for (std::size_t i = 0; i < out.offload.size(); ++i)
      if (out.offload[i] != 0) out.request_ghz[i] *= scale;
  }
  return out;
}

class OffloadEnv {
 public:
  explicit OffloadEnv(NetworkConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const NetworkConfig& config() const { return cfg_; }
  std::size_t vehicles() const { return cfg_.vehicles; }
  std::size_t state_dim() const { return cfg_.vehicles * kFeaturesPerVehicle; }
  const std::vector<double>& initial_allocations() const { return initial_alloc_; }
  const EnvState& state() const { return state_; }

  /// Starts an episode. Everything after this is a function of (config, seed, actions).
  const EnvState& reset(std::uint64_t seed) {
    seed_ = seed;
    std::seed_seq seq{seed, std::uint64_t{0xa110c}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> alloc(cfg_.initial_alloc_min_ghz, cfg_.initial_alloc_max_ghz);
    initial_alloc_.resize(cfg_.vehicles);
    for (double& f : initial_alloc_) f = alloc(rng);
    state_ = sample_state(0);
    started_ = true;
    return state_;
  }

  StepOutcome step(const EnvAction& action) {
    if (!started_) throw ContractError("step called before reset");
    if (state_.step >= cfg_.episode_length) throw ContractError("episode is over; call reset");
    if (action.offload.size() != cfg_.vehicles || action.request_ghz.size() != cfg_.vehicles)
      throw ContractError("action dimension does not match vehicle count");

    StepOutcome out;
    out.projected = project_action(action, cfg_.cloud_capacity_ghz);
    latency::CloudProfile cloud{cfg_.cloud_capacity_ghz, out.projected.request_ghz};
    auto breakdown = latency::total_latency_breakdown(out.projected.offload, state_.vehicles, cloud, cfg_.costs);
    out.reward = -breakdown.total_s;
    out.info.per_vehicle_latency_s = std::move(breakdown.per_vehicle_s);
    out.info.offloaded = breakdown.offloaded;
    out.info.total_latency_s = breakdown.total_s;

    std::size_t next = state_.step + 1;
    out.done = next >= cfg_.episode_length;
    state_ = sample_state(next);
    out.next_state = state_;
    return out;
  }

 private:
  // Per-step i.i.d. resampling of task sizes and link rates around the preset.
  EnvState sample_state(std::size_t step) const {
    std::seed_seq seq{seed_, static_cast<std::uint64_t>(step), std::uint64_t{0x57e9}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> size_noise(-cfg_.size_jitter, cfg_.size_jitter);
    std::uniform_real_distribution<double> rate_noise(-cfg_.rate_jitter, cfg_.rate_jitter);
    EnvState s;
    s.step = step;
    s.vehicles.reserve(cfg_.vehicles);
    for (std::size_t i = 0; i < cfg_.vehicles; ++i) {
      double payload = cfg_.task_size_bytes * (1.0 + size_noise(rng));
      double up = cfg_.rate_mbps * (1.0 + rate_noise(rng));
      double down = cfg_.rate_mbps * (1.0 + rate_noise(rng));
      s.vehicles.push_back(make_vehicle(cfg_, payload, up, down));
    }
    s.features = encode_features(s.vehicles);
    return s;
  }

  NetworkConfig cfg_;
  std::uint64_t seed_ = 0;
  bool started_ = false;
  std::vector<double> initial_alloc_;
  EnvState state_;
};

// Anything that maps a state to an action. Implementations may draw from rng.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual EnvAction act(const EnvState& state, std::mt19937_64& rng) = 0;
};

/// Fair coin per offload bit, requests uniform in (0, F].
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(double capacity_ghz) : capacity_ghz_(capacity_ghz) {}
  EnvAction act(const EnvState& state, std::mt19937_64& rng) override {
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> request(0.0, capacity_ghz_);
    EnvAction a;
    for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
      a.offload.push_back(coin(rng) ? 1 : 0);
      double f = request(rng);
      a.request_ghz.push_back(f > 0 ? f : capacity_ghz_);
    }
    return a;
  }

 private:
  double capacity_ghz_;
};

class AlwaysLocalPolicy : public Policy {
 public:
  EnvAction act(const EnvState& state, std::mt19937_64&) override {
    return EnvAction{std::vector<int>(state.vehicles.size(), 0), std::vector<double>(state.vehicles.size(), 1.0)};
  }
};

// Offloads everything and asks for the full capacity, which projects to an equal split.
class AlwaysOffloadPolicy : public Policy {
 public:
  explicit AlwaysOffloadPolicy(double capacity_ghz) : capacity_ghz_(capacity_ghz) {}
  EnvAction act(const EnvState& state, std::mt19937_64&) override {
    return EnvAction{std::vector<int>(state.vehicles.size(), 1),
                     std::vector<double>(state.vehicles.size(), capacity_ghz_)};
  }

 private:
  double capacity_ghz_;
};

struct EvalMetrics {
  double avg_latency_ms = 0.0;    // mean over steps of T_total / n
  double offload_percentage = 0.0;
  double mean_reward = 0.0;       // mean per-step reward (seconds, negated)
  std::size_t steps = 0;
  std::size_t decisions = 0;
  std::size_t offloaded = 0;
};

inline std::uint64_t episode_seed(std::uint64_t base, std::uint64_t episode) {
  std::seed_seq seq{base, episode, std::uint64_t{0xe915}};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// Runs `episodes` full episodes. Episode seeds and the policy RNG derive from cfg.seed.
inline EvalMetrics evaluate_policy(Policy& policy, const NetworkConfig& cfg, std::size_t episodes) {
  OffloadEnv env(cfg);
  std::seed_seq policy_seq{cfg.seed, std::uint64_t{0xe7a1}};
  std::mt19937_64 rng(policy_seq);
  EvalMetrics m;
  double latency_sum = 0.0;
  double reward_sum = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    EnvState state = env.reset(episode_seed(cfg.seed, ep));
    for (;;) {
      StepOutcome out = env.step(policy.act(state, rng));
      latency_sum += out.info.total_latency_s / static_cast<double>(cfg.vehicles);
      reward_sum += out.reward;
      m.offloaded += out.info.offloaded;
      m.decisions += cfg.vehicles;
      ++m.steps;
      state = std::move(out.next_state);
      if (out.done) break;
    }
  }
  if (m.steps > 0) {
    m.avg_latency_ms = 1e3 * latency_sum / static_cast<double>(m.steps);
    m.mean_reward = reward_sum / static_cast<double>(m.steps);
    m.offload_percentage = 100.0 * static_cast<double>(m.offloaded) / static_cast<double>(m.decisions);
  }
  return m;
}

}  // namespace vtn::env
