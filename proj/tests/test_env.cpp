#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "mirl/env.hpp"
#include "mirl/error.hpp"

namespace mirl {
namespace {

TEST(PointMassConfig, Defaults) {
  const auto open = PointMassConfig::open_task();
  EXPECT_EQ(open.horizon, 5);
  EXPECT_FALSE(open.obstacle.has_value());
  const auto obs = PointMassConfig::obstacle_task();
  EXPECT_EQ(obs.horizon, 50);
  ASSERT_TRUE(obs.obstacle.has_value());
  EXPECT_EQ(obs.obstacle->radius, 0.4);
  open.validate();
  obs.validate();
}

TEST(PointMassConfig, RejectsBadGeometry) {
  auto c = PointMassConfig::obstacle_task();
  c.obstacle->center = {0.1, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = PointMassConfig::obstacle_task();
  c.obstacle->center = {1.3, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = PointMassConfig::open_task();
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PointMassConfig::open_task();
  c.goal = {2.0, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(StartDistribution, AnchorGeometry) {
  const auto train = StartDistribution::train_corners();
  const auto test = StartDistribution::test_rotated();
  ASSERT_EQ(train.anchors.size(), 4u);
  ASSERT_EQ(test.anchors.size(), 4u);
  for (const auto& a : train.anchors) {
    EXPECT_EQ(std::abs(a[0]), 1.0);
    EXPECT_EQ(std::abs(a[1]), 1.0);
  }
  for (const auto& a : test.anchors) {
    EXPECT_NEAR(norm(a), std::numbers::sqrt2, 1e-15);
    EXPECT_EQ(a[0] * a[1], 0.0);
  }
  EXPECT_EQ(train.jitter, 0.05);
}

TEST(EnvReset, ZeroJitterReturnsAnchor) {
  const auto config = PointMassConfig::open_task();
  Rng rng(1);
  const Vec2 s = env_reset_at(config, {1.0, 1.0}, 0.0, rng);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[1], 1.0);
  const auto test = StartDistribution::test_rotated(0.0);
  for (int i = 0; i < 20; ++i) {
    const Vec2 p = env_reset(config, test, rng);
    bool found = false;
    for (const auto& a : test.anchors) found = found || (a == p);
    EXPECT_TRUE(found);
  }
}

TEST(EnvReset, AnchorFrequenciesAreUniform) {
  const auto config = PointMassConfig::open_task();
  const auto dist = StartDistribution::train_corners(0.0);
  Rng rng(17);
  std::map<std::pair<double, double>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Vec2 s = env_reset(config, dist, rng);
    ++counts[{s[0], s[1]}];
  }
  ASSERT_EQ(counts.size(), 4u);
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  // 3 degrees of freedom, 99.9% quantile is 16.27.
  EXPECT_LT(chi2, 16.27);
}

TEST(EnvReset, NeverInsideObstacleAndInsideArena) {
  auto config = PointMassConfig::obstacle_task();
  StartDistribution dist;
  dist.anchors = {{0.5, 0.3}, {1.5, 1.5}};
  dist.jitter = 0.3;
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Vec2 s = env_reset(config, dist, rng);
    EXPECT_FALSE(config.inside_obstacle(s));
    EXPECT_LE(std::abs(s[0]), 1.5);
    EXPECT_LE(std::abs(s[1]), 1.5);
  }
}

TEST(EnvReset, ExhaustedResampleBudgetThrows) {
  auto config = PointMassConfig::obstacle_task();
  Rng rng(3);
  EXPECT_THROW(env_reset_at(config, {0.5, 0.3}, 0.0, rng), ConfigError);
  StartDistribution empty;
  EXPECT_THROW(env_reset(config, empty, rng), ConfigError);
}

TEST(EnvStep, ZeroActionStaysPut) {
  const auto config = PointMassConfig::open_task();
  const Vec2 s{0.3, -0.7};
  EXPECT_EQ(env_step(config, s, {0.0, 0.0}), s);
}

TEST(EnvStep, ArenaClamp) {
  const auto config = PointMassConfig::open_task();
  const Vec2 next = env_step(config, {1.45, 0.0}, {0.2, 0.0});
  EXPECT_EQ(next[0], 1.5);
  EXPECT_EQ(next[1], 0.0);
}

TEST(EnvStep, PerAxisActionClamp) {
  const auto config = PointMassConfig::open_task();
  const Vec2 next = env_step(config, {0.0, 0.0}, {5.0, -0.1});
  EXPECT_DOUBLE_EQ(next[0], 0.2 * std::numbers::sqrt2);
  EXPECT_DOUBLE_EQ(next[1], -0.1);
  const Vec2 safe = clamp_action(config, {std::nan(""), 0.1});
  EXPECT_EQ(safe[0], 0.0);
}

Vec2 fine_step_oracle(const PointMassConfig& config, const Vec2& s, const Vec2& a) {
  const Vec2 d = clamp_action(config, a);
  const int n = 10000;
  Vec2 last = s;
  for (int k = 1; k <= n; ++k) {
    const Vec2 p = s + (static_cast<double>(k) / n) * d;
    if (config.inside_obstacle(p)) return last;
    last = p;
  }
  return last;
}

TEST(EnvStep, ObstacleContactMatchesFineStepOracle) {
  const auto config = PointMassConfig::obstacle_task();
  const Vec2 s{1.0, 0.3};
  const Vec2 a{-0.2, 0.0};
  const Vec2 next = env_step(config, s, a);
  const Vec2 oracle = fine_step_oracle(config, s, a);
  EXPECT_NEAR(next[0], oracle[0] + 1e-3, 1e-4);
  EXPECT_NEAR(next[1], oracle[1], 1e-12);
  EXPECT_NEAR(next[0], 0.901, 1e-12);
  EXPECT_FALSE(config.inside_obstacle(next));
}

TEST(EnvStep, RandomStepsStayLegal) {
  const auto config = PointMassConfig::obstacle_task();
  Rng rng(5);
  Vec2 s{-1.0, -1.0};
  for (int i = 0; i < 20000; ++i) {
    const Vec2 a{0.6 * (rng.uniform() - 0.5), 0.6 * (rng.uniform() - 0.5)};
    const Vec2 next = env_step(config, s, a);
    ASSERT_FALSE(config.inside_obstacle(next));
    ASSERT_LE(std::abs(next[0]), 1.5);
    ASSERT_LE(std::abs(next[1]), 1.5);
    ASSERT_EQ(next, env_step(config, s, a));
    s = next;
  }
}

TEST(Demos, OpenTaskFromCornerReachesGoalMonotonically) {
  const auto config = PointMassConfig::open_task();
  ScriptedExpert expert(config, {1.0, 1.0});
  Vec2 s{1.0, 1.0};
  double prev = norm(s);
  for (int t = 0; t < config.horizon; ++t) {
    s = env_step(config, s, expert.act(s));
    EXPECT_LE(norm(s), prev);
    prev = norm(s);
  }
  EXPECT_LT(norm(s), 0.05);
}

TEST(Demos, StartAtGoalGivesZeroActions) {
  const auto config = PointMassConfig::open_task();
  ScriptedExpert expert(config, {0.0, 0.0});
  const Vec2 a = expert.act({0.0, 0.0});
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(a[1], 0.0);
}

TEST(Demos, GeneratedOpenSetProperties) {
  const auto config = PointMassConfig::open_task();
  Rng rng(0);
  const DemoSet demos = generate_demos(config, 4, rng);
  ASSERT_EQ(demos.trajectories.size(), 4u);
  EXPECT_EQ(demos.transition_count(), 20u);
  EXPECT_EQ(demos.env_fingerprint, config.fingerprint());
  const auto anchors = StartDistribution::train_corners().anchors;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& tr = demos.trajectories[i];
    ASSERT_EQ(tr.states.size(), 6u);
    EXPECT_LT(norm(tr.states.front() - anchors[i]), 0.3);
    EXPECT_LT(norm(tr.states.back() - config.goal), 0.05);
    for (std::size_t t = 0; t + 1 < tr.states.size(); ++t) {
      EXPECT_LE(norm(tr.states[t + 1]), norm(tr.states[t]));
    }
  }
}

TEST(Demos, ReproducibleFromSeed) {
  const auto config = PointMassConfig::open_task();
  Rng a(9), b(9);
  const DemoSet x = generate_demos(config, 6, a);
  const DemoSet y = generate_demos(config, 6, b);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(x.trajectories[i].states, y.trajectories[i].states);
    EXPECT_EQ(x.trajectories[i].actions, y.trajectories[i].actions);
  }
}

TEST(Demos, ObstacleDemosAvoidTheDisk) {
  const auto config = PointMassConfig::obstacle_task();
  Rng rng(4);
  const DemoSet demos = generate_demos(config, 100, rng);
  for (const auto& tr : demos.trajectories) {
    for (const auto& s : tr.states) EXPECT_FALSE(config.inside_obstacle(s));
    EXPECT_LT(norm(tr.states.back() - config.goal), 0.05);
  }
}

TEST(Demos, ZeroDemosRejected) {
  Rng rng(1);
  EXPECT_THROW(generate_demos(PointMassConfig::open_task(), 0, rng), ConfigError);
}

TEST(PointMassConfig, FingerprintTracksGeometry) {
  auto a = PointMassConfig::open_task();
  auto b = a;
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  b.horizon = 6;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), PointMassConfig::obstacle_task().fingerprint());
}

}  // namespace
}  // namespace mirl
