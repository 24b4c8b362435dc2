#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mirl/error.hpp"
#include "mirl/ppo.hpp"
#include "test_util.hpp"

namespace mirl {
namespace {

using testing::central_difference;
using testing::relative_error;
using testing::uniform_vector;

Mlp constant_value_net(double v) {
  Mlp net(MlpSpec{2, 1, 1});
  net.params()[net.spec().param_count() - 1] = v;
  return net;
}

// Episodes of the given lengths; the last one is truncated when truncate_last.
RolloutBatch hand_batch(const std::vector<int>& lengths, bool truncate_last, Rng& rng) {
  RolloutBatch batch;
  for (std::size_t e = 0; e < lengths.size(); ++e) {
    for (int t = 0; t < lengths[e]; ++t) {
      StepRecord rec;
      rec.state = {rng.uniform() - 0.5, rng.uniform() - 0.5};
      if (t > 0) rec.state = batch.steps.back().next_state;
      rec.action = {0.3 * (rng.uniform() - 0.5), 0.3 * (rng.uniform() - 0.5)};
      rec.next_state = rec.state + rec.action;
      rec.reward = 2.0 * rng.uniform() - 1.0;
      rec.episode = static_cast<int>(e);
      rec.step = t;
      rec.done = (t == lengths[e] - 1) && !(truncate_last && e + 1 == lengths.size());
      batch.steps.push_back(rec);
    }
  }
  return batch;
}

std::vector<double> rewards_of(const RolloutBatch& b) {
  std::vector<double> r;
  for (const auto& s : b.steps) r.push_back(s.reward);
  return r;
}

void set_rewards(RolloutBatch& b, const std::vector<double>& r) {
  for (std::size_t i = 0; i < r.size(); ++i) b.steps[i].reward = r[i];
}

TEST(Gae, ZeroRewardZeroValue) {
  Rng rng(1);
  RolloutBatch b = hand_batch({5, 5}, false, rng);
  set_rewards(b, std::vector<double>(10, 0.0));
  const auto adv = gae(b, Mlp(MlpSpec{2, 3, 1}), 0.99, 0.95);
  for (double a : adv.advantages) EXPECT_EQ(a, 0.0);
}

TEST(Gae, HandRecursion) {
  Rng rng(1);
  RolloutBatch b = hand_batch({3}, false, rng);
  set_rewards(b, {1.0, 0.0, 0.0});
  const auto adv = gae(b, Mlp(MlpSpec{2, 3, 1}), 0.5, 1.0);
  EXPECT_EQ(adv.advantages[0], 1.0);
  EXPECT_EQ(adv.advantages[1], 0.0);
  EXPECT_EQ(adv.advantages[2], 0.0);
}

TEST(Gae, FrozenReferenceWithTruncation) {
  Rng rng(2);
  RolloutBatch b = hand_batch({3, 2}, true, rng);
  set_rewards(b, {1.0, 0.5, -1.0, 0.25, 2.0});
  const auto adv = gae(b, constant_value_net(0.2), 0.9, 0.8);
  const double expected[] = {0.7035199999999999, -0.38400000000000006, -1.2,
                             1.6556000000000004, 1.9800000000000002};
  for (int t = 0; t < 5; ++t) {
    EXPECT_NEAR(adv.advantages[t], expected[t], 1e-15);
    EXPECT_NEAR(adv.returns[t], expected[t] + 0.2, 1e-15);
  }
}

TEST(Gae, ReconstructionIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    RolloutBatch b = hand_batch({5, 5, 4, 3}, trial % 2 == 0, rng);
    const Mlp v = Mlp::initialized(MlpSpec{2, 8, 1}, rng);
    const auto adv = gae(b, v, 0.99, 0.95);
    const auto r = rewards_of(b);
    for (std::size_t t = 0; t < b.size(); ++t) {
      double recon = adv.offset[t];
      for (std::size_t k = 0; k < b.size(); ++k) recon += adv.weight(t, k) * r[k];
      EXPECT_NEAR(recon, adv.advantages[t], 1e-12);
    }
    const auto applied = adv.apply(r);
    for (std::size_t t = 0; t < b.size(); ++t) {
      EXPECT_NEAR(applied[t] + adv.offset[t], adv.advantages[t], 1e-12);
    }
  }
}

TEST(Gae, WeightsAreUpperTriangularWithinEpisodes) {
  Rng rng(4);
  RolloutBatch b = hand_batch({3, 4}, false, rng);
  const auto adv = gae(b, Mlp(MlpSpec{2, 2, 1}), 0.9, 0.5);
  EXPECT_EQ(adv.weight(1, 0), 0.0);
  EXPECT_EQ(adv.weight(0, 3), 0.0);
  EXPECT_EQ(adv.weight(3, 6), std::pow(0.45, 3));
  EXPECT_EQ(adv.weight(2, 2), 1.0);
}

TEST(Gae, TransposeIsAdjoint) {
  Rng rng(5);
  RolloutBatch b = hand_batch({5, 5, 2}, true, rng);
  const auto adv = gae(b, Mlp(MlpSpec{2, 2, 1}), 0.99, 0.95);
  const auto x = uniform_vector(b.size(), -1.0, 1.0, rng);
  const auto y = uniform_vector(b.size(), -1.0, 1.0, rng);
  const auto wx = adv.apply(x);
  const auto wty = adv.apply_transpose(y);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    lhs += y[i] * wx[i];
    rhs += wty[i] * x[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Gae, MonteCarloIdentityAtLambdaOne) {
  Rng rng(6);
  for (bool truncated : {false, true}) {
    RolloutBatch b = hand_batch({6}, truncated, rng);
    const Mlp v = Mlp::initialized(MlpSpec{2, 5, 1}, rng);
    const double gamma = 0.9;
    const auto adv = gae(b, v, gamma, 1.0);
    const std::size_t n = b.size();
    const double tail = truncated ? v.forward_scalar(b.steps[n - 1].next_state) : 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double g = 0.0;
      for (std::size_t k = t; k < n; ++k) g += std::pow(gamma, k - t) * b.steps[k].reward;
      g += std::pow(gamma, n - t) * tail;
      EXPECT_NEAR(adv.advantages[t], g - v.forward_scalar(b.steps[t].state), 1e-12);
    }
  }
}

TEST(Gae, AffineInReward) {
  Rng rng(7);
  RolloutBatch b = hand_batch({5, 5, 3}, true, rng);
  const Mlp v = Mlp::initialized(MlpSpec{2, 6, 1}, rng);
  const auto r1 = uniform_vector(b.size(), -1.0, 1.0, rng);
  const auto r2 = uniform_vector(b.size(), -1.0, 1.0, rng);
  auto advantages = [&](const std::vector<double>& r) {
    set_rewards(b, r);
    return gae(b, v, 0.99, 0.95);
  };
  std::vector<double> sum(b.size()), scaled(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    sum[i] = r1[i] + r2[i];
    scaled[i] = 3.5 * r1[i];
  }
  const auto a1 = advantages(r1), a2 = advantages(r2), a12 = advantages(sum),
             a3 = advantages(scaled);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double off = a1.offset[i];
    EXPECT_NEAR(a12.advantages[i] - off, (a1.advantages[i] - off) + (a2.advantages[i] - off),
                1e-12);
    EXPECT_NEAR(a3.advantages[i] - off, 3.5 * (a1.advantages[i] - off), 1e-12);
  }
}

TEST(Gae, NormalizationGivesZeroMeanUnitStd) {
  Rng rng(8);
  RolloutBatch b = hand_batch({5, 5}, false, rng);
  auto adv = gae(b, Mlp(MlpSpec{2, 2, 1}), 0.99, 0.95);
  normalize_advantages(adv);
  EXPECT_TRUE(adv.normalized);
  double sq = 0.0;
  for (double a : adv.advantages) sq += a * a;
  EXPECT_NEAR(mean_of(adv.advantages), 0.0, 1e-12);
  EXPECT_NEAR(sq / static_cast<double>(b.size()), 1.0, 1e-6);
}

TEST(Rollouts, ZeroRewardNetAndBookkeeping) {
  const auto config = PointMassConfig::open_task();
  PpoConfig ppo;
  ppo.hidden_dim = 8;
  const GaussianPolicy pi = make_policy(ppo, 0);
  const Mlp v = make_value_net(ppo, 0);
  Rng rng(1);
  const RolloutBatch b = collect_rollouts(pi, v, config, StartDistribution::train_corners(),
                                          state_reward(Mlp(MlpSpec{2, 4, 1})), 100, rng);
  ASSERT_EQ(b.size(), 100u);
  EXPECT_EQ(b.episode_count(), 20u);
  EXPECT_EQ(b.final_distances.size(), 20u);
  for (const auto& s : b.steps) {
    EXPECT_EQ(s.reward, 0.0);
    EXPECT_EQ(s.next_state, env_step(config, s.state, s.action));
    EXPECT_EQ(s.log_prob_old, pi.log_prob(s.state, s.action));
    EXPECT_EQ(s.done, s.step == 4);
  }
  Rng short_rng(1);
  EXPECT_THROW(collect_rollouts(pi, v, config, StartDistribution::train_corners(),
                                state_reward(Mlp(MlpSpec{2, 4, 1})), 3, short_rng),
               ConfigError);
}

TEST(Rollouts, TruncatedFinalEpisode) {
  PpoConfig ppo;
  ppo.hidden_dim = 4;
  Rng rng(1);
  const RolloutBatch b =
      collect_rollouts(make_policy(ppo, 0), make_value_net(ppo, 0), PointMassConfig::open_task(),
                       StartDistribution::train_corners(),
                       dense_distance_reward(PointMassConfig::open_task()), 12, rng);
  EXPECT_EQ(b.episode_count(), 3u);
  EXPECT_EQ(b.final_distances.size(), 2u);
  EXPECT_FALSE(b.steps.back().done);
}

TEST(Rollouts, DeterministicPolicyGivesIdenticalBatches) {
  PpoConfig ppo;
  ppo.hidden_dim = 4;
  ppo.log_std_init = -5.0;
  const auto pi = make_policy(ppo, 3);
  const auto v = make_value_net(ppo, 3);
  const auto config = PointMassConfig::open_task();
  Rng a(10), b(10);
  const auto x = collect_rollouts(pi, v, config, StartDistribution::train_corners(),
                                  dense_distance_reward(config), 50, a);
  const auto y = collect_rollouts(pi, v, config, StartDistribution::train_corners(),
                                  dense_distance_reward(config), 50, b);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(x.steps[i].next_state, y.steps[i].next_state);
    EXPECT_EQ(x.steps[i].reward, y.steps[i].reward);
  }
}

TEST(Rollouts, DenseRewardIsDistanceChange) {
  const auto config = PointMassConfig::open_task();
  StepRecord rec;
  rec.state = {1.0, 0.0};
  rec.next_state = {0.5, 0.0};
  EXPECT_DOUBLE_EQ(dense_distance_reward(config)(rec), 0.5);
}

struct PpoFixture {
  GaussianPolicy policy;
  Mlp value;
  RolloutBatch batch;
  AdvantageDecomposition adv;
};

PpoFixture make_fixture(std::uint64_t seed) {
  PpoConfig ppo;
  ppo.hidden_dim = 6;
  PpoFixture f{make_policy(ppo, seed), make_value_net(ppo, seed), {}, {}};
  Rng rng(seed);
  const auto config = PointMassConfig::open_task();
  f.batch = collect_rollouts(f.policy, f.value, config, StartDistribution::train_corners(),
                             dense_distance_reward(config), 40, rng);
  f.adv = gae(f.batch, f.value, 0.99, 0.95);
  return f;
}

TEST(PpoUpdate, ZeroAdvantageZeroEntropyLeavesPolicy) {
  PpoFixture f = make_fixture(1);
  std::fill(f.adv.advantages.begin(), f.adv.advantages.end(), 0.0);
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  auto opt = make_optimizer(f.policy, f.value);
  const auto before = f.policy.flat();
  Rng rng(2);
  ppo_update(f.policy, f.value, f.batch, f.adv, cfg, opt, 1e-2, rng);
  EXPECT_EQ(f.policy.flat(), before);
}

TEST(PpoUpdate, FirstGradientEqualsScoreFunction) {
  PpoFixture f = make_fixture(2);
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  std::vector<std::size_t> all(f.batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto g = ppo_policy_gradient(f.policy, f.batch, f.adv.advantages, all, cfg);
  std::vector<double> ref(f.policy.param_count(), 0.0);
  for (std::size_t t = 0; t < f.batch.size(); ++t) {
    std::vector<double> score(f.policy.param_count(), 0.0);
    f.policy.accumulate_log_prob_grad(f.batch.steps[t].state, f.batch.steps[t].action, 1.0, score);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      ref[j] -= f.adv.advantages[t] * score[j] / static_cast<double>(f.batch.size());
    }
  }
  EXPECT_LT(relative_error(g, ref), 1e-12);
  const auto inner = single_step_policy_gradient(f.policy, f.batch, f.adv, 1.0);
  std::vector<double> neg(ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) neg[j] = -inner.direction[j];
  EXPECT_LT(relative_error(g, neg), 1e-12);
}

TEST(PpoUpdate, SurrogateGradientMatchesFiniteDifferences) {
  PpoFixture f = make_fixture(3);
  PpoConfig cfg;
  // Perturbed parameters put some ratios outside the clip range.
  auto theta = f.policy.flat();
  Rng rng(4);
  for (double& x : theta) x += 0.05 * (rng.uniform() - 0.5);
  f.policy.set_flat(theta);
  std::vector<std::size_t> idx{0, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  double clip_frac = 0.0;
  const auto g =
      ppo_policy_gradient(f.policy, f.batch, f.adv.advantages, idx, cfg, nullptr, &clip_frac);
  auto objective = [&](std::span<const double> th) {
    GaussianPolicy p = f.policy;
    p.set_flat(th);
    double loss = 0.0;
    ppo_policy_gradient(p, f.batch, f.adv.advantages, idx, cfg, &loss);
    return loss;
  };
  EXPECT_LT(relative_error(g, central_difference(objective, theta, 1e-7)), 1e-5);
}

TEST(PpoUpdate, MinibatchShufflingIsSeeded) {
  PpoFixture a = make_fixture(5), b = make_fixture(5);
  PpoConfig cfg;
  auto oa = make_optimizer(a.policy, a.value);
  auto ob = make_optimizer(b.policy, b.value);
  Rng ra(9), rb(9);
  ppo_update(a.policy, a.value, a.batch, a.adv, cfg, oa, 3e-4, ra);
  ppo_update(b.policy, b.value, b.batch, b.adv, cfg, ob, 3e-4, rb);
  EXPECT_EQ(a.policy.flat(), b.policy.flat());
  EXPECT_EQ(std::vector<double>(a.value.params().begin(), a.value.params().end()),
            std::vector<double>(b.value.params().begin(), b.value.params().end()));
}

TEST(InnerStep, ZeroAlphaKeepsTheta) {
  PpoFixture f = make_fixture(6);
  const auto step = single_step_policy_gradient(f.policy, f.batch, f.adv, 0.0);
  EXPECT_EQ(step.theta_new, f.policy.flat());
}

TEST(InnerStep, UnitAdvantageIsMeanScore) {
  PpoFixture f = make_fixture(7);
  std::fill(f.adv.advantages.begin(), f.adv.advantages.end(), 1.0);
  const auto step = single_step_policy_gradient(f.policy, f.batch, f.adv, 0.1);
  auto objective = [&](std::span<const double> th) {
    GaussianPolicy p = f.policy;
    p.set_flat(th);
    double s = 0.0;
    for (const auto& r : f.batch.steps) s += p.log_prob(r.state, r.action);
    return s / static_cast<double>(f.batch.size());
  };
  EXPECT_LT(relative_error(step.direction, central_difference(objective, f.policy.flat(), 1e-6)),
            1e-6);
  for (std::size_t j = 0; j < step.theta_new.size(); ++j) {
    EXPECT_DOUBLE_EQ(step.theta_new[j], f.policy.flat()[j] + 0.1 * step.direction[j]);
  }
}

TEST(InnerStep, EqualsUnclippedGradientAtUnitRatio) {
  PpoFixture f = make_fixture(8);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatches = 1;
  cfg.entropy_coef = 0.0;
  cfg.clip = 0.01;
  std::vector<std::size_t> all(f.batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto g = ppo_policy_gradient(f.policy, f.batch, f.adv.advantages, all, cfg);
  const auto step = single_step_policy_gradient(f.policy, f.batch, f.adv, 1.0);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(-g[j], step.direction[j], 1e-14);
}

TEST(Schedule, LinearDecayToZero) {
  PpoConfig cfg;
  cfg.lr = 1e-3;
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 0, 1000), 1e-3);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 500, 1000), 5e-4);
  EXPECT_EQ(scheduled_lr(cfg, 1000, 1000), 0.0);
  cfg.lr_decay = false;
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 500, 1000), 1e-3);
}

TEST(PpoConfig, Validation) {
  PpoConfig cfg;
  cfg.validate();
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = PpoConfig{};
  cfg.lambda = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = PpoConfig{};
  cfg.clip = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Evaluate, ZeroBudgetPolicyStaysNearStart) {
  PpoConfig ppo;
  GaussianPolicy policy = make_policy(ppo, 0);
  auto flat = policy.flat();
  std::fill(flat.begin(), flat.end() - 2, 0.0);
  policy.set_flat(flat);
  Rng rng(1);
  const auto res = evaluate_policy(policy, PointMassConfig::open_task(),
                                   StartDistribution::test_rotated(), 100, rng);
  EXPECT_NEAR(res.mean, std::sqrt(2.0), 0.05);
  EXPECT_EQ(res.distances.size(), 100u);
}

TEST(TrainPpo, ZeroBudgetReturnsInitialPolicy) {
  PpoConfig ppo;
  ppo.hidden_dim = 8;
  const auto run = train_ppo(PointMassConfig::open_task(), StartDistribution::train_corners(),
                             dense_distance_reward(PointMassConfig::open_task()), ppo, 0, 4);
  EXPECT_EQ(run.policy.flat(), make_policy(ppo, 4).flat());
  EXPECT_EQ(run.env_steps, 0u);
}

}  // namespace
}  // namespace mirl
