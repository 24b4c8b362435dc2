#ifndef MIRL_PPO_HPP_
#define MIRL_PPO_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "mirl/env.hpp"
#include "mirl/net.hpp"
#include "mirl/rng.hpp"

namespace mirl {

struct StepRecord {
  Vec2 state{};
  Vec2 action{};  // unclamped policy output
  Vec2 next_state{};
  double log_prob_old = 0.0;
  double value_old = 0.0;
  double reward = 0.0;
  bool done = false;  // episode reached the horizon
  int episode = 0;
  int step = 0;
};

// Episodes are stored contiguously; the last one may be truncated.
struct RolloutBatch {
  std::vector<StepRecord> steps;
  std::vector<double> final_distances;  // completed episodes only

  std::size_t size() const { return steps.size(); }
  std::size_t episode_count() const;
};

using RewardFn = std::function<double(const StepRecord&)>;

// r = R(s') for a state-only reward network.
RewardFn state_reward(Mlp reward_net);
// r = d(s) - d(s'), the change in distance to the goal.
RewardFn dense_distance_reward(const PointMassConfig& config);

RolloutBatch collect_rollouts(const GaussianPolicy& policy, const Mlp& value_net,
                              const PointMassConfig& config,
                              const StartDistribution& dist,
                              const RewardFn& reward, std::size_t n_steps,
                              Rng& rng);

void relabel_rewards(RolloutBatch& batch, const RewardFn& reward);

// Generalized advantage estimates together with the linear map from
// per-step rewards to advantages: A = W r + b, where
// W[t,k] = (gamma lambda)^(k-t) for k >= t in the same episode segment.
struct AdvantageDecomposition {
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> offset;               // b
  std::vector<std::size_t> segment_begin;   // per step
  std::vector<std::size_t> segment_end;     // per step, one past the last
  double gamma_lambda = 0.0;
  bool normalized = false;

  std::size_t size() const { return advantages.size(); }
  double weight(std::size_t t, std::size_t k) const;
  std::vector<double> apply(std::span<const double> rewards) const;
  std::vector<double> apply_transpose(std::span<const double> coeffs) const;
};

AdvantageDecomposition gae(const RolloutBatch& batch, const Mlp& value_net,
                           double gamma, double lambda);

// Mean 0, std 1. Breaks the affine-in-reward property, so the
// decomposition is marked normalized.
void normalize_advantages(AdvantageDecomposition& adv);

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs = 4;
  int minibatches = 4;
  double entropy_coef = 1e-4;
  double value_coef = 0.5;
  bool normalize_advantages = true;
  double lr = 3e-4;
  bool lr_decay = true;
  std::size_t batch_size = 1280;
  std::size_t hidden_dim = 128;
  double log_std_init = -1.0;
  // Policy mean bound; 0 disables squashing.
  double mean_scale = 0.2 * std::numbers::sqrt2;

  void validate() const;
};

struct PpoOptimizer {
  AdamState policy;
  AdamState value;
};

PpoOptimizer make_optimizer(const GaussianPolicy& policy, const Mlp& value_net);

struct PpoUpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

// Gradient of the clipped surrogate minus the entropy bonus over the listed
// batch indices.
FlatParams ppo_policy_gradient(const GaussianPolicy& policy,
                               const RolloutBatch& batch,
                               std::span<const double> advantages,
                               std::span<const std::size_t> indices,
                               const PpoConfig& config, double* loss = nullptr,
                               double* clip_fraction = nullptr);

FlatParams value_gradient(const Mlp& value_net, const RolloutBatch& batch,
                          std::span<const double> returns,
                          std::span<const std::size_t> indices,
                          double* loss = nullptr);

PpoUpdateStats ppo_update(GaussianPolicy& policy, Mlp& value_net,
                          const RolloutBatch& batch,
                          const AdvantageDecomposition& adv,
                          const PpoConfig& config, PpoOptimizer& opt, double lr,
                          Rng& rng);

// Value regression on the decomposition's returns only.
double fit_value(Mlp& value_net, const RolloutBatch& batch,
                 std::span<const double> returns, const PpoConfig& config,
                 AdamState& opt, double lr, Rng& rng);

// theta' = theta + alpha * (1/N) sum_t A_t grad log pi(a_t|s_t). Scores are
// kept row-major (N x P) for the meta-gradient.
struct InnerStep {
  FlatParams theta_new;
  FlatParams direction;
  std::vector<double> scores;
  std::size_t n_params = 0;

  std::span<const double> score(std::size_t t) const {
    return std::span<const double>(scores).subspan(t * n_params, n_params);
  }
};

InnerStep single_step_policy_gradient(const GaussianPolicy& policy,
                                      const RolloutBatch& batch,
                                      const AdvantageDecomposition& adv,
                                      double alpha);

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> distances;
};

// Mean-action episodes; reports final distance to the goal.
EvalResult evaluate_policy(const GaussianPolicy& policy,
                           const PointMassConfig& config,
                           const StartDistribution& dist,
                           std::size_t n_episodes, Rng& rng);

double mean_of(std::span<const double> values);

struct CurvePoint {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double mean_final_distance = 0.0;
  double value = 0.0;  // algorithm-specific loss
};

// Linear decay to zero over the budget when enabled.
double scheduled_lr(const PpoConfig& config, std::size_t steps_done,
                    std::size_t budget);

struct PpoRun {
  GaussianPolicy policy;
  Mlp value_net;
  std::vector<CurvePoint> curve;
  std::size_t env_steps = 0;
};

GaussianPolicy make_policy(const PpoConfig& config, std::uint64_t seed);
Mlp make_value_net(const PpoConfig& config, std::uint64_t seed);

// Fresh policy trained by PPO against a fixed reward.
PpoRun train_ppo(const PointMassConfig& env, const StartDistribution& dist,
                 const RewardFn& reward, const PpoConfig& config,
                 std::size_t budget_steps, std::uint64_t seed);

// Called after every rollout batch; the returned reward relabels the batch
// before the update and drives the next collection.
using RewardRefit =
    std::function<RewardFn(const RolloutBatch& batch, const GaussianPolicy& policy)>;

// As train_ppo, with the reward refit from each batch when refit is set.
PpoRun train_ppo_refit(const PointMassConfig& env, const StartDistribution& dist,
                       const RewardFn& reward, const RewardRefit& refit,
                       const PpoConfig& config, std::size_t budget_steps,
                       std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_PPO_HPP_
