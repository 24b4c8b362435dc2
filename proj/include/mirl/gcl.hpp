#ifndef MIRL_GCL_HPP_
#define MIRL_GCL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mirl/env.hpp"
#include "mirl/net.hpp"
#include "mirl/ppo.hpp"

namespace mirl {

// Sampled trajectory with log q(tau) = sum_t log pi(a_t|s_t).
struct AgentTrajectory {
  std::vector<Vec2> states;
  double log_q = 0.0;
};

// Completed episodes of a batch, states s_0..s_T.
std::vector<AgentTrajectory> complete_episodes(const RolloutBatch& batch);

// R(tau) = sum_t R(s_t).
double trajectory_reward(const Mlp& reward_net, std::span<const Vec2> states);

struct GclGradient {
  FlatParams grad;
  double loss = 0.0;
  double effective_sample_size = 0.0;
  std::size_t skipped = 0;  // samples with non-finite log q
  std::vector<double> weights;
};

// L = -mean_demo R(tau) + log(mean_i exp(R(tau_i) - log q_i)), with the
// importance weights self-normalized in log space.
GclGradient gcl_gradient(const Mlp& reward_net, std::span<const AgentTrajectory> agent,
                         std::span<const Trajectory> demos);

double gcl_loss(const Mlp& reward_net, std::span<const AgentTrajectory> agent,
                std::span<const Trajectory> demos);

struct GclConfig {
  double reward_lr = 3e-4;
  std::size_t reward_batch_size = 20;

  void validate() const;
};

struct IrlRun {
  Mlp reward_net;
  PpoRun ppo;
};

// PPO on R(s') with the reward refit after each batch by minibatched GCL
// steps over the completed episodes.
IrlRun gcl_train(const PointMassConfig& env, const StartDistribution& dist,
                 const DemoSet& demos, const GclConfig& config, const PpoConfig& ppo,
                 std::size_t reward_hidden, double reward_init_scale,
                 std::size_t budget_steps, std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_GCL_HPP_
