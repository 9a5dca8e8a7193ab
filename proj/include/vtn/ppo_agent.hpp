#pragma once

// Actor-critic PPO with a hybrid action head.
//
// The actor maps the 6n-dim state to 3n outputs: offload logits (sigmoid ->
// Bernoulli per vehicle), Gaussian means, and raw standard deviations mapped
// to kMinStd + max_std·sigmoid(raw) for the cloud-cycle requests. A Gaussian draw u is squashed to
// F·sigmoid(u) before the environment projects it; log-probabilities are taken
// on u. The critic is a separate network with a scalar output.
//
// Loss convention: the optimizer MINIMIZES
//     -L_clip + value_coef·(V - R)^2 - entropy_coef·H
// averaged over the batch, i.e. it maximizes the clipped surrogate plus the
// entropy bonus.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtn/mlp.hpp"
#include "vtn/offload_env.hpp"

namespace vtn::ppo {

using env::EnvAction;
using env::EnvState;

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinStd = 1e-6;
inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2π)

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) { return z > 30 ? z : std::log1p(std::exp(z)); }

// ln(sigmoid(z)) without cancellation.
inline double log_sigmoid(double z) { return -softplus(-z); }

inline double normal_log_density(double x, double mean, double std) {
  double zscore = (x - mean) / std;
  return -0.5 * zscore * zscore - std::log(std) - 0.5 * kLog2Pi;
}

inline double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0) h -= p * std::log(p);
  if (p < 1) h -= (1 - p) * std::log(1 - p);
  return h;
}

inline double gaussian_entropy(double std) { return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std * std); }

struct TrainConfig {
  double learning_rate = 0.003;
  double entropy_coef = 0.08;
  double gamma = 0.9;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  std::size_t epochs_per_iteration = 4;
  std::size_t iterations = 10'000;
  std::size_t episodes_per_iteration = 100;
  std::size_t steps_per_episode = 100;
  std::size_t minibatch_size = 0;  // 0: one full-batch step per epoch
  std::vector<std::size_t> hidden = {64, 64};
  bool use_adam = true;
  bool normalize_advantages = true;
  // Upper bound on the Gaussian std. The entropy of an unbounded Gaussian keeps
  // growing under a constant-sign bonus, which Adam turns into a steady drift.
  double max_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must lie in (0, 1]");
    if (!(clip_epsilon > 0 && clip_epsilon < 1)) throw std::invalid_argument("clip epsilon must lie in (0, 1)");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    if (!(entropy_coef >= 0 && value_coef >= 0)) throw std::invalid_argument("loss coefficients must be non-negative");
    if (epochs_per_iteration < 1 || episodes_per_iteration < 1 || steps_per_episode < 1)
      throw std::invalid_argument("schedule counts must be positive");
    if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
    if (!(max_std > kMinStd)) throw std::invalid_argument("max_std must exceed the std floor");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"entropy_coef", c.entropy_coef},
                     {"gamma", c.gamma},
                     {"clip_epsilon", c.clip_epsilon},
                     {"value_coef", c.value_coef},
                     {"epochs_per_iteration", c.epochs_per_iteration},
                     {"iterations", c.iterations},
                     {"episodes_per_iteration", c.episodes_per_iteration},
                     {"steps_per_episode", c.steps_per_episode},
                     {"minibatch_size", c.minibatch_size},
                     {"hidden", c.hidden},
                     {"use_adam", c.use_adam},
                     {"normalize_advantages", c.normalize_advantages},
                     {"max_std", c.max_std},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.entropy_coef = j.value("entropy_coef", d.entropy_coef);
  c.gamma = j.value("gamma", d.gamma);
  c.clip_epsilon = j.value("clip_epsilon", d.clip_epsilon);
  c.value_coef = j.value("value_coef", d.value_coef);
  c.epochs_per_iteration = j.value("epochs_per_iteration", d.epochs_per_iteration);
  c.iterations = j.value("iterations", d.iterations);
  c.episodes_per_iteration = j.value("episodes_per_iteration", d.episodes_per_iteration);
  c.steps_per_episode = j.value("steps_per_episode", d.steps_per_episode);
  c.minibatch_size = j.value("minibatch_size", d.minibatch_size);
  c.hidden = j.value("hidden", d.hidden);
  c.use_adam = j.value("use_adam", d.use_adam);
  c.normalize_advantages = j.value("normalize_advantages", d.normalize_advantages);
  c.max_std = j.value("max_std", d.max_std);
  c.seed = j.value("seed", d.seed);
}

/// Actor and critic weights (θ) for n vehicles.
struct PolicyParams {
  std::size_t vehicles = 0;
  double capacity_ghz = 20.0;
  double max_std = 1.0;
  nn::Mlp actor;
  nn::Mlp critic;

  PolicyParams() = default;
  PolicyParams(std::size_t n, double capacity, const std::vector<std::size_t>& hidden, double std_bound = 1.0)
      : vehicles(n), capacity_ghz(capacity), max_std(std_bound) {
    std::size_t in = n * env::kFeaturesPerVehicle;
    std::vector<std::size_t> actor_sizes{in};
    std::vector<std::size_t> critic_sizes{in};
    for (std::size_t h : hidden) {
      actor_sizes.push_back(h);
      critic_sizes.push_back(h);
    }
    actor_sizes.push_back(3 * n);
    critic_sizes.push_back(1);
    actor = nn::Mlp(actor_sizes);
    critic = nn::Mlp(critic_sizes);
  }

  std::size_t state_dim() const { return actor.input_size(); }
  std::size_t parameter_count() const { return actor.parameter_count() + critic.parameter_count(); }

  template <typename Rng>
  void initialize(Rng& rng) {
    actor.initialize(rng);
    critic.initialize(rng);
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(actor.params()) && ok(critic.params());
  }
};

struct PolicyOutput {
  std::vector<double> logits;
  std::vector<double> offload_probs;
  std::vector<double> means;
  std::vector<double> std_raw;
  std::vector<double> stds;
  double state_value = 0.0;
};

inline PolicyOutput policy_forward(const PolicyParams& theta, std::span<const double> state,
                                   nn::Mlp::Cache* actor_cache = nullptr, nn::Mlp::Cache* critic_cache = nullptr) {
  if (state.size() != theta.state_dim()) throw env::ContractError("state dimension does not match the network input");
  const std::size_t n = theta.vehicles;
  std::vector<double> out = theta.actor.forward(state, actor_cache);
  PolicyOutput po;
  po.logits.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n));
  po.means.assign(out.begin() + static_cast<std::ptrdiff_t>(n), out.begin() + static_cast<std::ptrdiff_t>(2 * n));
  po.std_raw.assign(out.begin() + static_cast<std::ptrdiff_t>(2 * n), out.end());
  po.offload_probs.resize(n);
  po.stds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    po.offload_probs[i] = sigmoid(po.logits[i]);
    po.stds[i] = kMinStd + theta.max_std * sigmoid(po.std_raw[i]);
  }
  po.state_value = theta.critic.forward(state, critic_cache)[0];
  return po;
}

/// The raw (pre-squash) sampled action; this is what log-probabilities refer to.
struct RawAction {
  std::vector<int> offload;
  std::vector<double> gaussian;
};

/// Σ_i log Bernoulli(x_i; p_i) + Σ_i log Normal(u_i; μ_i, σ_i)
inline double log_prob(const PolicyOutput& po, const RawAction& a) {
  double lp = 0.0;
  for (std::size_t i = 0; i < po.logits.size(); ++i) {
    lp += a.offload[i] != 0 ? log_sigmoid(po.logits[i]) : log_sigmoid(-po.logits[i]);
    lp += normal_log_density(a.gaussian[i], po.means[i], po.stds[i]);
  }
  return lp;
}

inline double policy_entropy(const PolicyOutput& po) {
  double h = 0.0;
  for (std::size_t i = 0; i < po.logits.size(); ++i)
    h += bernoulli_entropy(po.offload_probs[i]) + gaussian_entropy(po.stds[i]);
  return h;
}

inline double squash_request(double u, double capacity_ghz) {
  double f = capacity_ghz * sigmoid(u);
  return std::max(f, capacity_ghz * 1e-12);
}

inline EnvAction to_env_action(const RawAction& raw, double capacity_ghz) {
  EnvAction a;
  a.offload = raw.offload;
  a.request_ghz.reserve(raw.gaussian.size());
  for (double u : raw.gaussian) a.request_ghz.push_back(squash_request(u, capacity_ghz));
  return a;
}

struct SampledAction {
  EnvAction action;
  RawAction raw;
  double log_prob = 0.0;
  double state_value = 0.0;
};

inline SampledAction sample_action(const PolicyParams& theta, const EnvState& state, std::mt19937_64& rng) {
  PolicyOutput po = policy_forward(theta, state.features);
  SampledAction s;
  const std::size_t n = theta.vehicles;
  s.raw.offload.resize(n);
  s.raw.gaussian.resize(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.raw.offload[i] = unit(rng) < po.offload_probs[i] ? 1 : 0;
    s.raw.gaussian[i] = po.means[i] + po.stds[i] * normal(rng);
  }
  s.log_prob = log_prob(po, s.raw);
  s.action = to_env_action(s.raw, theta.capacity_ghz);
  s.state_value = po.state_value;
  return s;
}

// Most likely offload bit and the Gaussian mean.
inline EnvAction greedy_action(const PolicyParams& theta, const EnvState& state) {
  PolicyOutput po = policy_forward(theta, state.features);
  RawAction raw{std::vector<int>(theta.vehicles), po.means};
  for (std::size_t i = 0; i < theta.vehicles; ++i) raw.offload[i] = po.offload_probs[i] > 0.5 ? 1 : 0;
  return to_env_action(raw, theta.capacity_ghz);
}

class PpoPolicy : public env::Policy {
 public:
  PpoPolicy(const PolicyParams& theta, bool greedy) : theta_(theta), greedy_(greedy) {}
  EnvAction act(const EnvState& state, std::mt19937_64& rng) override {
    return greedy_ ? greedy_action(theta_, state) : sample_action(theta_, state, rng).action;
  }

 private:
  const PolicyParams& theta_;
  bool greedy_;
};

struct TrajectoryRecord {
  std::vector<double> state;
  RawAction action;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double next_value = 0.0;  // 0 at the terminal step
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

using Trajectory = std::vector<TrajectoryRecord>;

/// One-step TD: A_t = r_t + γ·v_{t+1} - v_t, critic target r_t + γ·v_{t+1}.
inline void compute_advantages(Trajectory& traj, double gamma) {
  for (auto& rec : traj) {
    double next = rec.done ? 0.0 : rec.next_value;
    rec.ret = rec.reward + gamma * next;
    rec.advantage = rec.ret - rec.value;
  }
}

inline void normalize_advantages(Trajectory& traj) {
  if (traj.size() < 2) return;
  double mean = 0.0;
  for (const auto& r : traj) mean += r.advantage;
  mean /= static_cast<double>(traj.size());
  double var = 0.0;
  for (const auto& r : traj) var += (r.advantage - mean) * (r.advantage - mean);
  double sd = std::sqrt(var / static_cast<double>(traj.size()));
  for (auto& r : traj) r.advantage = (r.advantage - mean) / (sd + 1e-8);
}

/// min(r·A, clip(r, 1-ε, 1+ε)·A) for one sample.
inline double clipped_surrogate(double ratio, double advantage, double epsilon) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

/// Batch mean of the clipped surrogate, from new/old log-probabilities.
inline double clipped_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                           std::span<const double> advantages, double epsilon) {
  if (log_prob_new.size() != log_prob_old.size() || log_prob_new.size() != advantages.size())
    throw std::invalid_argument("clipped_loss inputs differ in length");
  if (log_prob_new.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < log_prob_new.size(); ++i)
    sum += clipped_surrogate(std::exp(log_prob_new[i] - log_prob_old[i]), advantages[i], epsilon);
  return sum / static_cast<double>(log_prob_new.size());
}

struct LossTerms {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

/// Combined loss over `batch` and, when `grad_actor`/`grad_critic` are given,
/// its analytic gradient (accumulated, not overwritten).
inline LossTerms ppo_loss(const PolicyParams& theta, std::span<const TrajectoryRecord* const> batch,
                          const TrainConfig& cfg, std::vector<double>* grad_actor = nullptr,
                          std::vector<double>* grad_critic = nullptr) {
  LossTerms terms;
  if (batch.empty()) return terms;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t n = theta.vehicles;
  const bool want_grad = grad_actor != nullptr && grad_critic != nullptr;
  nn::Mlp::Cache actor_cache, critic_cache;
  std::vector<double> d_actor(3 * n);
  double d_value[1];

  for (const TrajectoryRecord* rec : batch) {
    PolicyOutput po = policy_forward(theta, rec->state, &actor_cache, &critic_cache);
    double lp = log_prob(po, rec->action);
    double ratio = std::exp(lp - rec->log_prob_old);
    double unclipped = ratio * rec->advantage;
    double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * rec->advantage;
    bool unclipped_active = unclipped <= clipped;
    terms.surrogate += std::min(unclipped, clipped) * inv;
    if (ratio < 1.0 - cfg.clip_epsilon || ratio > 1.0 + cfg.clip_epsilon) terms.clip_fraction += inv;
    double h = policy_entropy(po);
    terms.entropy += h * inv;
    double verr = po.state_value - rec->ret;
    terms.value_loss += verr * verr * inv;

    if (!want_grad) continue;
    // d(-surrogate)/d(log π) for this sample.
    double g_lp = unclipped_active ? -unclipped * inv : 0.0;
    double g_h = -cfg.entropy_coef * inv;
    for (std::size_t i = 0; i < n; ++i) {
      double p = po.offload_probs[i];
      double z = po.logits[i];
      double x = rec->action.offload[i] != 0 ? 1.0 : 0.0;
      // dlogπ/dz = x - p ; dH_bern/dz = -z·p(1-p)
      d_actor[i] = g_lp * (x - p) + g_h * (-z * p * (1.0 - p));
      double sd = po.stds[i];
      double diff = rec->action.gaussian[i] - po.means[i];
      d_actor[n + i] = g_lp * diff / (sd * sd);
      // dlogπ/dσ = -1/σ + diff²/σ³ ; dH_gauss/dσ = 1/σ ; dσ/draw = max_std·s(1-s)
      double d_sd = g_lp * (-1.0 / sd + diff * diff / (sd * sd * sd)) + g_h / sd;
      double s = sigmoid(po.std_raw[i]);
      d_actor[2 * n + i] = d_sd * theta.max_std * s * (1.0 - s);
    }
    theta.actor.backward(actor_cache, d_actor, *grad_actor);
    d_value[0] = 2.0 * cfg.value_coef * verr * inv;
    theta.critic.backward(critic_cache, d_value, *grad_critic);
  }
  terms.total = -terms.surrogate + cfg.value_coef * terms.value_loss - cfg.entropy_coef * terms.entropy;
  return terms;
}

struct IterationStats {
  std::size_t iteration = 0;
  double mean_reward = 0.0;  // mean per-step reward of the collected batch
  double loss = 0.0;
  double entropy = 0.0;
};

/// Owns the policy, optimizers, RNG and environment for one training run.
/// Fully deterministic given (network config, train config).
class Trainer {
 public:
  Trainer(env::NetworkConfig net, TrainConfig cfg) : net_(std::move(net)), cfg_(std::move(cfg)) {
    cfg_.validate();
    net_.episode_length = cfg_.steps_per_episode;
    net_.validate();
    theta_ = PolicyParams(net_.vehicles, net_.cloud_capacity_ghz, cfg_.hidden, cfg_.max_std);
    std::seed_seq init_seq{cfg_.seed, std::uint64_t{0x1417}};
    std::mt19937_64 init_rng(init_seq);
    theta_.initialize(init_rng);
    std::seed_seq seq{cfg_.seed, std::uint64_t{0x5a3b1e}};
    rng_.seed(seq);
    actor_opt_ = nn::Optimizer(theta_.actor.parameter_count(), cfg_.learning_rate, cfg_.use_adam);
    critic_opt_ = nn::Optimizer(theta_.critic.parameter_count(), cfg_.learning_rate, cfg_.use_adam);
  }

  const PolicyParams& params() const { return theta_; }
  PolicyParams& params() { return theta_; }
  const TrainConfig& config() const { return cfg_; }
  const env::NetworkConfig& network() const { return net_; }
  std::size_t iterations_done() const { return iteration_; }
  const std::vector<IterationStats>& curve() const { return curve_; }

  Trajectory collect() {
    env::OffloadEnv environment(net_);
    Trajectory traj;
    traj.reserve(cfg_.episodes_per_iteration * cfg_.steps_per_episode);
    for (std::size_t ep = 0; ep < cfg_.episodes_per_iteration; ++ep) {
      std::uint64_t episode = static_cast<std::uint64_t>(iteration_) * cfg_.episodes_per_iteration + ep;
      EnvState state = environment.reset(env::episode_seed(cfg_.seed, episode));
      for (;;) {
        SampledAction s = sample_action(theta_, state, rng_);
        env::StepOutcome out = environment.step(s.action);
        TrajectoryRecord rec;
        rec.state = state.features;
        rec.action = std::move(s.raw);
        rec.log_prob_old = s.log_prob;
        rec.reward = out.reward;
        rec.value = s.state_value;
        rec.done = out.done;
        rec.next_value = out.done ? 0.0 : theta_.critic.forward(out.next_state.features)[0];
        traj.push_back(std::move(rec));
        state = std::move(out.next_state);
        if (out.done) break;
      }
    }
    return traj;
  }

  IterationStats run_iteration() {
    Trajectory traj = collect();
    IterationStats stats;
    stats.iteration = iteration_;
    for (const auto& r : traj) stats.mean_reward += r.reward;
    stats.mean_reward /= static_cast<double>(traj.size());

    compute_advantages(traj, cfg_.gamma);
    if (cfg_.normalize_advantages) normalize_advantages(traj);

    std::vector<const TrajectoryRecord*> order(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) order[i] = &traj[i];
    const std::size_t mb = cfg_.minibatch_size == 0 ? traj.size() : std::min(cfg_.minibatch_size, traj.size());
    std::vector<double> ga(theta_.actor.parameter_count());
    std::vector<double> gc(theta_.critic.parameter_count());
    for (std::size_t epoch = 0; epoch < cfg_.epochs_per_iteration; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t start = 0; start < order.size(); start += mb) {
        std::size_t count = std::min(mb, order.size() - start);
        std::fill(ga.begin(), ga.end(), 0.0);
        std::fill(gc.begin(), gc.end(), 0.0);
        LossTerms terms = ppo_loss(theta_, std::span(order).subspan(start, count), cfg_, &ga, &gc);
        if (!std::isfinite(terms.total)) {
          std::ostringstream msg;
          msg << "non-finite loss at iteration " << iteration_ << " epoch " << epoch << " (surrogate "
              << terms.surrogate << ", value " << terms.value_loss << ", entropy " << terms.entropy << ")";
          throw TrainingDivergence(msg.str());
        }
        stats.loss = terms.total;
        stats.entropy = terms.entropy;
        actor_opt_.step(theta_.actor.params(), ga);
        critic_opt_.step(theta_.critic.params(), gc);
      }
    }
    if (!theta_.finite()) throw TrainingDivergence("weights became non-finite at iteration " + std::to_string(iteration_));
    ++iteration_;
    curve_.push_back(stats);
    return stats;
  }

  /// Runs until cfg.iterations iterations have been completed in total.
  const std::vector<IterationStats>& train(const std::function<void(const IterationStats&)>& on_iteration = {}) {
    while (iteration_ < cfg_.iterations) {
      IterationStats s = run_iteration();
      if (on_iteration) on_iteration(s);
    }
    return curve_;
  }

  void save_checkpoint(const std::string& path);
  static Trainer load_checkpoint(const std::string& path, const env::NetworkConfig& net);

 private:
  env::NetworkConfig net_;
  TrainConfig cfg_;
  PolicyParams theta_;
  nn::Optimizer actor_opt_, critic_opt_;
  std::mt19937_64 rng_;
  std::size_t iteration_ = 0;
  std::vector<IterationStats> curve_;
};

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'V', 'T', 'N', 'P', 'P', 'O', '\r', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u64(std::ostream& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.put(static_cast<char>(v >> shift));
}
inline std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int c = in.get();
    if (c == EOF) throw CheckpointError("checkpoint is truncated");
    v = (v << 8) | static_cast<std::uint8_t>(c);
  }
  return v;
}
inline void put_blob(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_blob(std::istream& in) {
  std::uint64_t size = get_u64(in);
  if (size > (1ULL << 32)) throw CheckpointError("checkpoint blob is implausibly large");
  std::string s(size, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(size))) throw CheckpointError("checkpoint is truncated");
  return s;
}
// Doubles are stored as their IEEE-754 bit patterns, big-endian.
inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
  }
}
inline void get_doubles(std::istream& in, std::vector<double>& v) {
  if (get_u64(in) != v.size()) throw CheckpointError("checkpoint tensor size does not match the network");
  for (double& d : v) {
    std::uint64_t bits = get_u64(in);
    std::memcpy(&d, &bits, sizeof bits);
  }
}
}  // namespace detail

// Layout: magic | version | header JSON | RNG state | actor θ, m, v | critic θ, m, v.
inline void Trainer::save_checkpoint(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
  detail::put_u64(out, detail::kCheckpointVersion);
  nlohmann::json header{{"train_config", cfg_},
                        {"iteration", iteration_},
                        {"vehicles", net_.vehicles},
                        {"capacity_ghz", net_.cloud_capacity_ghz},
                        {"actor_opt_steps", actor_opt_.step_count()},
                        {"critic_opt_steps", critic_opt_.step_count()}};
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& s : curve_) curve.push_back({s.iteration, s.mean_reward, s.loss, s.entropy});
  header["curve"] = curve;
  detail::put_blob(out, header.dump());
  std::ostringstream rng_state;
  rng_state << rng_;
  detail::put_blob(out, rng_state.str());
  for (auto* pair : {&theta_.actor, &theta_.critic}) detail::put_doubles(out, pair->params());
  for (auto* opt : {&actor_opt_, &critic_opt_}) {
    detail::put_doubles(out, opt->first_moment());
    detail::put_doubles(out, opt->second_moment());
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

inline Trainer Trainer::load_checkpoint(const std::string& path, const env::NetworkConfig& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[sizeof detail::kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  if (detail::get_u64(in) != detail::kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
  nlohmann::json header = nlohmann::json::parse(detail::get_blob(in));
  if (header.at("vehicles").get<std::size_t>() != net.vehicles)
    throw CheckpointError("checkpoint was trained for a different vehicle count");
  Trainer t(net, header.at("train_config").get<TrainConfig>());
  t.iteration_ = header.at("iteration").get<std::size_t>();
  t.actor_opt_.step_count() = header.at("actor_opt_steps").get<std::uint64_t>();
  t.critic_opt_.step_count() = header.at("critic_opt_steps").get<std::uint64_t>();
  for (const auto& row : header.at("curve"))
    t.curve_.push_back({row[0].get<std::size_t>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>()});
  std::istringstream rng_state(detail::get_blob(in));
  rng_state >> t.rng_;
  for (auto* net_ptr : {&t.theta_.actor, &t.theta_.critic}) detail::get_doubles(in, net_ptr->params());
  for (auto* opt : {&t.actor_opt_, &t.critic_opt_}) {
    detail::get_doubles(in, opt->first_moment());
    detail::get_doubles(in, opt->second_moment());
  }
  return t;
}

}  // namespace vtn::ppo
