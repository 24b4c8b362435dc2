#ifndef MIRL_ADVERSARIAL_HPP_
#define MIRL_ADVERSARIAL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mirl/bcirl.hpp"
#include "mirl/env.hpp"
#include "mirl/gcl.hpp"
#include "mirl/net.hpp"
#include "mirl/ppo.hpp"

namespace mirl {

// Logistic function kept strictly inside (0, 1) for finite input.
double open_sigmoid(double logit);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// One labelled discriminator input.
struct DiscSample {
  Vec2 state{};
  Vec2 action{};
  Vec2 next_state{};
  double log_pi = 0.0;
};

struct DiscUpdateStats {
  double loss = 0.0;
  std::size_t skipped = 0;  // non-finite log pi
};

// f(s, s') = g(s') + gamma h(s') - h(s); D = exp(f) / (exp(f) + pi(a|s)),
// i.e. D = sigmoid(f - log pi).
struct AirlDiscriminator {
  Mlp g;
  Mlp h;
  double gamma = 0.99;

  double f(const Vec2& s, const Vec2& s_next) const;
  double logit(const DiscSample& x) const { return f(x.state, x.next_state) - x.log_pi; }
  double prob(const DiscSample& x) const { return open_sigmoid(logit(x)); }
};

AirlDiscriminator make_airl_discriminator(std::size_t hidden_dim, double init_scale,
                                          double gamma, std::uint64_t seed);

struct AirlOptimizer {
  AdamState g;
  AdamState h;
};

// Mean binary cross-entropy (expert label 1, agent label 0); gradients are
// accumulated into grad_g and grad_h.
double airl_loss(const AirlDiscriminator& disc, std::span<const DiscSample> expert,
                 std::span<const DiscSample> agent, std::span<double> grad_g = {},
                 std::span<double> grad_h = {}, std::size_t* skipped = nullptr);

DiscUpdateStats airl_update(AirlDiscriminator& disc, AirlOptimizer& opt,
                            std::span<const DiscSample> expert,
                            std::span<const DiscSample> agent, double lr);

// f(s, s') - log pi(a|s) = log D - log(1 - D).
double airl_policy_reward(const AirlDiscriminator& disc, const DiscSample& x);

// Discriminator over (s, clamped a) producing a logit.
struct GailDiscriminator {
  Mlp net;

  double logit(const Vec2& s, const Vec2& a) const;
  double prob(const Vec2& s, const Vec2& a) const { return open_sigmoid(logit(s, a)); }
};

GailDiscriminator make_gail_discriminator(std::size_t hidden_dim, double init_scale,
                                          std::uint64_t seed);

double gail_loss(const GailDiscriminator& disc, std::span<const DiscSample> expert,
                 std::span<const DiscSample> agent, std::span<double> grad = {});

DiscUpdateStats gail_update(GailDiscriminator& disc, AdamState& opt,
                            std::span<const DiscSample> expert,
                            std::span<const DiscSample> agent, double lr);

inline constexpr double kGailRewardMax = 10.0;

// -log(1 - D(s, a)) clamped to [0, kGailRewardMax].
double gail_reward(const GailDiscriminator& disc, const Vec2& s, const Vec2& a);

// Transition reward from the frozen discriminator on the executed action.
RewardFn gail_step_reward(GailDiscriminator disc, const PointMassConfig& config);

struct AdversarialConfig {
  double reward_lr = 1e-3;
  std::size_t reward_batch_size = 20;

  void validate() const;
};

struct AirlRun {
  AirlDiscriminator disc;
  PpoRun ppo;
};

struct GailRun {
  GailDiscriminator disc;
  PpoRun ppo;
};

// Each rollout batch is split into minibatches of reward_batch_size agent
// transitions, each paired with as many sampled demo transitions for one
// discriminator step; the batch is then relabelled and PPO runs on it.
AirlRun airl_train(const PointMassConfig& env, const StartDistribution& dist,
                   const DemoSet& demos, const AdversarialConfig& config,
                   const PpoConfig& ppo, std::size_t hidden_dim, double init_scale,
                   std::size_t budget_steps, std::uint64_t seed);

GailRun gail_train(const PointMassConfig& env, const StartDistribution& dist,
                   const DemoSet& demos, const AdversarialConfig& config,
                   const PpoConfig& ppo, std::size_t hidden_dim, double init_scale,
                   std::size_t budget_steps, std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_ADVERSARIAL_HPP_
