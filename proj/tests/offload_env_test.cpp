#include <gtest/gtest.h>

#include <random>

#include "vtn/offload_env.hpp"

namespace {

using namespace vtn::env;

NetworkConfig small_config(std::size_t n = 4) {
  NetworkConfig cfg;
  cfg.vehicles = n;
  cfg.episode_length = 5;
  return cfg;
}

void expect_same_state(const EnvState& a, const EnvState& b) {
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) EXPECT_EQ(a.features[i], b.features[i]);
  EXPECT_EQ(a.step, b.step);
}

TEST(Reset, DeterministicAndSized) {
  OffloadEnv a(small_config(10)), b(small_config(10));
  expect_same_state(a.reset(3), b.reset(3));
  EXPECT_EQ(a.state().features.size(), 60u);
  EXPECT_EQ(a.state_dim(), 60u);
  for (double f : a.initial_allocations()) {
    EXPECT_GE(f, 2.0);
    EXPECT_LE(f, 4.0);
  }
  OffloadEnv c(small_config(10));
  c.reset(4);
  EXPECT_NE(a.state().features, c.state().features);
}

TEST(Reset, FeaturesAreNormalized) {
  NetworkConfig cfg = small_config(3);
  cfg.task_size_bytes = 300'000;
  cfg.rate_mbps = 1000;
  OffloadEnv env(cfg);
  for (double f : env.reset(1).features) {
    EXPECT_TRUE(std::isfinite(f));
    EXPECT_GE(f, 0.0);
    EXPECT_LT(f, 2.0);
  }
}

TEST(ProjectAction, RescalesOnlyWhenOverCapacity) {
  EnvAction under{{1, 1, 0}, {5.0, 6.0, 100.0}};
  auto p = project_action(under, 20.0);
  EXPECT_EQ(p.request_ghz, under.request_ghz);

  EnvAction over{{1, 1}, {15.0, 15.0}};
  p = project_action(over, 20.0);
  EXPECT_DOUBLE_EQ(p.request_ghz[0], 10.0);
  EXPECT_DOUBLE_EQ(p.request_ghz[1], 10.0);

  EnvAction local{{0, 0}, {-3.0, 1e9}};
  p = project_action(local, 20.0);
  EXPECT_EQ(p.request_ghz, local.request_ghz);

  EnvAction bad{{1}, {0.0}};
  EXPECT_THROW(project_action(bad, 20.0), ContractError);
}

TEST(ProjectAction, RandomRequestsAlwaysFeasible) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> req(1e-6, 60.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng() % 12;
    EnvAction a;
    for (std::size_t i = 0; i < n; ++i) {
      a.offload.push_back(rng() % 2);
      a.request_ghz.push_back(req(rng));
    }
    auto p = project_action(a, 20.0);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!p.offload[i]) continue;
      EXPECT_GT(p.request_ghz[i], 0.0);
      EXPECT_LE(p.request_ghz[i], 20.0);
      total += p.request_ghz[i];
    }
    EXPECT_LE(total, 20.0 * (1 + 1e-12));
  }
}

TEST(Step, AllLocalRewardIsNegatedLocalSum) {
  NetworkConfig cfg = small_config();
  cfg.size_jitter = 0;
  cfg.rate_jitter = 0;
  OffloadEnv env(cfg);
  EnvState s = env.reset(0);
  auto out = env.step(EnvAction{std::vector<int>(4, 0), std::vector<double>(4, 1.0)});
  double expected = 0;
  for (const auto& v : s.vehicles) expected += vtn::latency::local_latency(v);
  EXPECT_DOUBLE_EQ(out.reward, -expected);
  EXPECT_EQ(out.info.offloaded, 0u);
}

TEST(Step, RewardMatchesLatencyModelAndConstraintHolds) {
  OffloadEnv env(small_config(6));
  EnvState s = env.reset(9);
  std::mt19937_64 rng(1);
  RandomPolicy policy(20.0);
  for (;;) {
    EnvAction a = policy.act(s, rng);
    auto out = env.step(a);
    vtn::latency::CloudProfile cloud{20.0, out.projected.request_ghz};
    vtn::latency::check_allocation(out.projected.offload, out.projected.request_ghz, 20.0);
    EXPECT_EQ(out.reward, -vtn::latency::total_latency(out.projected.offload, s.vehicles, cloud, env.config().costs));
    s = out.next_state;
    if (out.done) break;
  }
  EXPECT_EQ(s.step, 5u);
  EXPECT_THROW(env.step(policy.act(s, rng)), ContractError);
}

TEST(Step, DimensionMismatchAndUnstartedEnvAreContractErrors) {
  OffloadEnv env(small_config(3));
  EnvAction a{{1, 0, 1}, {1.0, 1.0, 1.0}};
  EXPECT_THROW(env.step(a), ContractError);
  env.reset(0);
  EXPECT_THROW(env.step(EnvAction{{1}, {1.0}}), ContractError);
}

TEST(Step, EpisodeTraceIsPureFunctionOfSeedAndActions) {
  OffloadEnv a(small_config()), b(small_config());
  a.reset(11);
  b.reset(11);
  std::mt19937_64 ra(2), rb(2);
  RandomPolicy pa(20.0), pb(20.0);
  for (int t = 0; t < 5; ++t) {
    auto oa = a.step(pa.act(a.state(), ra));
    auto ob = b.step(pb.act(b.state(), rb));
    EXPECT_EQ(oa.reward, ob.reward);
    expect_same_state(oa.next_state, ob.next_state);
  }
}

TEST(Step, SymmetricVehiclesGetEqualLatency) {
  NetworkConfig cfg = small_config(2);
  cfg.size_jitter = 0;
  cfg.rate_jitter = 0;
  OffloadEnv env(cfg);
  env.reset(0);
  auto out = env.step(EnvAction{{1, 1}, {7.0, 7.0}});
  EXPECT_DOUBLE_EQ(out.info.per_vehicle_latency_s[0], out.info.per_vehicle_latency_s[1]);
}

TEST(Evaluate, FixedPoliciesGiveExtremePercentages) {
  NetworkConfig cfg = small_config(5);
  AlwaysLocalPolicy local;
  AlwaysOffloadPolicy offload(cfg.cloud_capacity_ghz);
  EXPECT_EQ(evaluate_policy(local, cfg, 2).offload_percentage, 0.0);
  EXPECT_EQ(evaluate_policy(offload, cfg, 2).offload_percentage, 100.0);
}

TEST(Evaluate, RandomPolicyOffloadsAboutHalf) {
  NetworkConfig cfg = small_config(10);
  cfg.episode_length = 100;
  RandomPolicy policy(cfg.cloud_capacity_ghz);
  auto m = evaluate_policy(policy, cfg, 10);  // 10 000 decisions
  EXPECT_EQ(m.decisions, 10'000u);
  EXPECT_NEAR(m.offload_percentage, 50.0, 5.0);
  EXPECT_GT(m.avg_latency_ms, 0.0);
  EXPECT_NEAR(m.mean_reward * 1e3 / -10.0, m.avg_latency_ms, 1e-9);
}

}  // namespace
