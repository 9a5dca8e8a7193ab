#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "vtn/ppo_agent.hpp"

namespace {

using namespace vtn::ppo;

vtn::env::NetworkConfig tiny_network(std::size_t n = 2) {
  vtn::env::NetworkConfig net;
  net.vehicles = n;
  return net;
}

TrainConfig tiny_train(std::size_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.episodes_per_iteration = 2;
  cfg.steps_per_episode = 5;
  cfg.hidden = {8};
  cfg.seed = 42;
  return cfg;
}

std::vector<double> random_state(std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(dim);
  for (double& x : s) x = u(rng);
  return s;
}

TEST(PolicyForward, ZeroWeightsGiveFairCoins) {
  PolicyParams theta(3, 20.0, {4, 4});
  std::fill(theta.actor.params().begin(), theta.actor.params().end(), 0.0);
  std::mt19937_64 rng(0);
  auto po = policy_forward(theta, random_state(theta.state_dim(), rng));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(po.offload_probs[i], 0.5);
    EXPECT_DOUBLE_EQ(po.means[i], 0.0);
    EXPECT_NEAR(po.stds[i], theta.max_std / 2, 1e-5);
  }
}

TEST(PolicyForward, FiniteOnRandomStates) {
  PolicyParams theta(4, 20.0, {16, 16});
  std::mt19937_64 rng(1);
  theta.initialize(rng);
  for (int i = 0; i < 1000; ++i) {
    auto state = random_state(theta.state_dim(), rng);
    auto po = policy_forward(theta, state);
    for (std::size_t k = 0; k < 4; ++k) {
      ASSERT_GE(po.offload_probs[k], 0.0);
      ASSERT_LE(po.offload_probs[k], 1.0);
      ASSERT_GT(po.stds[k], 0.0);
      ASSERT_TRUE(std::isfinite(po.means[k]));
    }
    ASSERT_TRUE(std::isfinite(po.state_value));
    EXPECT_THROW(policy_forward(theta, std::vector<double>(5)), vtn::env::ContractError);
  }
}

TEST(PolicyForward, SampledRequestsRespectCapacity) {
  PolicyParams theta(3, 20.0, {8});
  std::mt19937_64 rng(2);
  theta.initialize(rng);
  vtn::env::EnvState state{random_state(theta.state_dim(), rng), {}, 0};
  for (int i = 0; i < 500; ++i) {
    auto s = sample_action(theta, state, rng);
    for (double f : s.action.request_ghz) {
      EXPECT_GT(f, 0.0);
      EXPECT_LE(f, 20.0);
    }
    EXPECT_NEAR(s.log_prob, log_prob(policy_forward(theta, state.features), s.raw), 1e-12);
  }
}

TEST(LogProb, MatchesClosedFormDensity) {
  PolicyOutput po;
  po.logits = {0.3};
  po.offload_probs = {sigmoid(0.3)};
  po.means = {0.7};
  po.stds = {1.3};
  RawAction a{{1}, {-0.4}};
  double z = (-0.4 - 0.7) / 1.3;
  double expected = std::log(sigmoid(0.3)) - 0.5 * z * z - std::log(1.3) - 0.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(log_prob(po, a), expected, 1e-9);

  a.offload = {0};
  EXPECT_NEAR(log_prob(po, a), expected - std::log(sigmoid(0.3)) + std::log(1 - sigmoid(0.3)), 1e-9);
}

TEST(LogProb, BernoulliEdgeCases) {
  EXPECT_NEAR(log_sigmoid(0.0), std::log(0.5), 1e-15);
  EXPECT_NEAR(log_sigmoid(800.0), 0.0, 1e-15);  // p → 1, taking the likely action
  EXPECT_TRUE(std::isfinite(log_sigmoid(-800.0)));
}

TEST(Advantages, OneStepTemporalDifference) {
  Trajectory traj(1);
  traj[0].reward = 1.0;
  traj[0].next_value = 2.0;
  traj[0].value = 1.0;
  compute_advantages(traj, 0.9);
  EXPECT_DOUBLE_EQ(traj[0].advantage, 1.8);
  EXPECT_DOUBLE_EQ(traj[0].ret, 2.8);

  compute_advantages(traj, 1e-300);
  EXPECT_NEAR(traj[0].advantage, traj[0].reward - traj[0].value, 1e-12);

  // v = r / (1 - γ) is a fixed point with zero advantage.
  traj[0].reward = -0.5;
  traj[0].value = traj[0].next_value = -5.0;
  compute_advantages(traj, 0.9);
  EXPECT_NEAR(traj[0].advantage, 0.0, 1e-12);

  traj[0].done = true;
  compute_advantages(traj, 0.9);
  EXPECT_DOUBLE_EQ(traj[0].ret, -0.5);
}

TEST(ClippedSurrogate, KnownValues) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.0, 1.0, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
}

TEST(ClippedSurrogate, BoundedByClipAndIdentityAtEqualLogProbs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lp(-5, 5), adv(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    double a = adv(rng), l = lp(rng), r = std::exp(lp(rng) - l);
    EXPECT_LE(clipped_surrogate(r, a, 0.2), 1.2 * std::abs(a) + 1e-15);
  }
  std::vector<double> lps(100), advs(100);
  double mean = 0;
  for (int i = 0; i < 100; ++i) {
    lps[i] = lp(rng);
    advs[i] = adv(rng);
    mean += advs[i] / 100;
  }
  EXPECT_NEAR(clipped_loss(lps, lps, advs, 0.2), mean, 1e-12);
}

TEST(Entropy, ClosedForms) {
  EXPECT_NEAR(bernoulli_entropy(0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(bernoulli_entropy(1.0 - 1e-12), 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(bernoulli_entropy(1.0), 0.0);
  EXPECT_NEAR(gaussian_entropy(1.0 / std::sqrt(2 * std::numbers::pi * std::numbers::e)), 0.0, 1e-12);
}

// Central differences against the analytic gradient of the combined loss on a
// micro network. Advantages and old log-probs are arranged so every sample is
// away from the clip kinks.
TEST(Gradient, MatchesFiniteDifferences) {
  PolicyParams theta(1, 20.0, {3});
  std::mt19937_64 rng(9);
  theta.initialize(rng);
  TrainConfig cfg;
  std::normal_distribution<double> normal(0.0, 1.0);

  Trajectory traj(6);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    auto& rec = traj[k];
    rec.state = random_state(theta.state_dim(), rng);
    auto po = policy_forward(theta, rec.state);
    rec.action = RawAction{{static_cast<int>(k % 2)}, {po.means[0] + po.stds[0] * normal(rng)}};
    double lp = log_prob(po, rec.action);
    // ratios 1.05 (inside), 2.0 and 0.3 (clipped for the matching sign)
    double ratio = k < 2 ? 1.05 : (k < 4 ? 2.0 : 0.3);
    rec.log_prob_old = lp - std::log(ratio);
    rec.advantage = k % 2 == 0 ? 0.7 : -1.1;
    rec.ret = normal(rng);
  }
  std::vector<const TrajectoryRecord*> batch;
  for (const auto& r : traj) batch.push_back(&r);

  std::vector<double> ga(theta.actor.parameter_count()), gc(theta.critic.parameter_count());
  ppo_loss(theta, batch, cfg, &ga, &gc);

  auto check = [&](std::vector<double>& params, const std::vector<double>& analytic, const char* which) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      double saved = params[i];
      const double h = 1e-6;
      params[i] = saved + h;
      double up = ppo_loss(theta, batch, cfg).total;
      params[i] = saved - h;
      double down = ppo_loss(theta, batch, cfg).total;
      params[i] = saved;
      double numeric = (up - down) / (2 * h);
      double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
      EXPECT_LE(std::abs(numeric - analytic[i]) / scale, 1e-4) << which << " parameter " << i;
    }
  };
  check(theta.actor.params(), ga, "actor");
  check(theta.critic.params(), gc, "critic");
}

TEST(Trainer, ZeroIterationsLeaveWeightsUntouched) {
  Trainer a(tiny_network(), tiny_train(0));
  auto before = a.params().actor.params();
  a.train();
  EXPECT_EQ(a.params().actor.params(), before);
  EXPECT_EQ(a.iterations_done(), 0u);
}

TEST(Trainer, DeterministicForFixedSeed) {
  Trainer a(tiny_network(), tiny_train(3)), b(tiny_network(), tiny_train(3));
  a.train();
  b.train();
  EXPECT_EQ(a.params().actor.params(), b.params().actor.params());
  EXPECT_EQ(a.params().critic.params(), b.params().critic.params());
  ASSERT_EQ(a.curve().size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.curve()[i].mean_reward, b.curve()[i].mean_reward);

  auto other = tiny_train(3);
  other.seed = 43;
  Trainer c(tiny_network(), other);
  c.train();
  EXPECT_NE(a.params().actor.params(), c.params().actor.params());
}

TEST(Trainer, CheckpointResumeIsBitExact) {
  auto path = (std::filesystem::temp_directory_path() / "vtn_ppo_resume_test.bin").string();
  Trainer straight(tiny_network(), tiny_train(4));
  straight.train();

  Trainer first(tiny_network(), tiny_train(4));
  first.run_iteration();
  first.run_iteration();
  first.save_checkpoint(path);
  Trainer resumed = Trainer::load_checkpoint(path, tiny_network());
  EXPECT_EQ(resumed.iterations_done(), 2u);
  resumed.train();
  EXPECT_EQ(resumed.params().actor.params(), straight.params().actor.params());
  EXPECT_EQ(resumed.params().critic.params(), straight.params().critic.params());
  EXPECT_EQ(resumed.curve().back().mean_reward, straight.curve().back().mean_reward);
  std::filesystem::remove(path);
}

TEST(Trainer, RejectsBadCheckpoints) {
  auto path = (std::filesystem::temp_directory_path() / "vtn_ppo_bad_ckpt.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  EXPECT_THROW(Trainer::load_checkpoint(path, tiny_network()), CheckpointError);
  Trainer t(tiny_network(), tiny_train(1));
  t.save_checkpoint(path);
  EXPECT_THROW(Trainer::load_checkpoint(path, tiny_network(3)), CheckpointError);
  std::filesystem::resize_file(path, 40);
  EXPECT_THROW(Trainer::load_checkpoint(path, tiny_network()), CheckpointError);
  std::filesystem::remove(path);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig cfg = tiny_train(7);
  cfg.minibatch_size = 32;
  nlohmann::json j = cfg;
  TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  cfg.clip_epsilon = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
