#include "mirl/gcl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mirl/bcirl.hpp"
#include "mirl/error.hpp"

namespace mirl {

std::vector<AgentTrajectory> complete_episodes(const RolloutBatch& batch) {
  std::vector<AgentTrajectory> out;
  AgentTrajectory current;
  for (const StepRecord& step : batch.steps) {
    if (step.step == 0) {
      current = AgentTrajectory{{step.state}, 0.0};
    }
    current.states.push_back(step.next_state);
    current.log_q += step.log_prob_old;
    if (step.done) out.push_back(std::move(current));
  }
  return out;
}

double trajectory_reward(const Mlp& reward_net, std::span<const Vec2> states) {
  double r = 0.0;
  for (const Vec2& s : states) r += reward_net.forward_scalar(s);
  return r;
}

namespace {

void accumulate_trajectory_grad(const Mlp& reward_net, std::span<const Vec2> states,
                                double coeff, std::span<double> grad) {
  const double upstream[1] = {coeff};
  for (const Vec2& s : states) reward_net.backward(s, upstream, grad);
}

struct LogWeights {
  std::vector<double> log_w;  // -inf for skipped samples
  double log_sum = 0.0;
  std::size_t kept = 0;
};

LogWeights log_weights(const Mlp& reward_net, std::span<const AgentTrajectory> agent) {
  LogWeights lw;
  lw.log_w.resize(agent.size(), -std::numeric_limits<double>::infinity());
  double max_w = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < agent.size(); ++i) {
    if (!std::isfinite(agent[i].log_q)) continue;
    const double w = trajectory_reward(reward_net, agent[i].states) - agent[i].log_q;
    if (!std::isfinite(w)) continue;
    lw.log_w[i] = w;
    max_w = std::max(max_w, w);
    ++lw.kept;
  }
  if (lw.kept == 0) {
    throw NumericError("gcl: no finite importance weights (effective sample size 0)");
  }
  double s = 0.0;
  for (double w : lw.log_w) {
    if (std::isfinite(w)) s += std::exp(w - max_w);
  }
  lw.log_sum = max_w + std::log(s);
  return lw;
}

double demo_reward_mean(const Mlp& reward_net, std::span<const Trajectory> demos) {
  double r = 0.0;
  for (const Trajectory& d : demos) r += trajectory_reward(reward_net, d.states);
  return r / demos.size();
}

}  // namespace

GclGradient gcl_gradient(const Mlp& reward_net, std::span<const AgentTrajectory> agent,
                         std::span<const Trajectory> demos) {
  if (agent.empty() || demos.empty()) throw ConfigError("gcl: empty sample set");
  const LogWeights lw = log_weights(reward_net, agent);
  GclGradient out;
  out.grad.assign(reward_net.spec().param_count(), 0.0);
  out.skipped = agent.size() - lw.kept;
  out.weights.assign(agent.size(), 0.0);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < agent.size(); ++i) {
    if (!std::isfinite(lw.log_w[i])) continue;
    const double w = std::exp(lw.log_w[i] - lw.log_sum);
    out.weights[i] = w;
    sum_sq += w * w;
    accumulate_trajectory_grad(reward_net, agent[i].states, w, out.grad);
  }
  const double inv = 1.0 / demos.size();
  for (const Trajectory& d : demos) {
    accumulate_trajectory_grad(reward_net, d.states, -inv, out.grad);
  }
  out.effective_sample_size = 1.0 / sum_sq;
  out.loss = -demo_reward_mean(reward_net, demos) + lw.log_sum -
             std::log(static_cast<double>(lw.kept));
  return out;
}

double gcl_loss(const Mlp& reward_net, std::span<const AgentTrajectory> agent,
                std::span<const Trajectory> demos) {
  if (agent.empty() || demos.empty()) throw ConfigError("gcl: empty sample set");
  const LogWeights lw = log_weights(reward_net, agent);
  return -demo_reward_mean(reward_net, demos) + lw.log_sum -
         std::log(static_cast<double>(lw.kept));
}

void GclConfig::validate() const {
  if (!(reward_lr > 0.0)) throw ConfigError("gcl: reward_lr must be positive");
  if (reward_batch_size == 0) throw ConfigError("gcl: reward_batch_size must be positive");
}

IrlRun gcl_train(const PointMassConfig& env, const StartDistribution& dist,
                 const DemoSet& demos, const GclConfig& config, const PpoConfig& ppo,
                 std::size_t reward_hidden, double reward_init_scale,
                 std::size_t budget_steps, std::uint64_t seed) {
  config.validate();
  if (demos.trajectories.empty()) throw ConfigError("gcl: no demonstrations");
  Mlp reward = make_reward_net(reward_hidden, reward_init_scale, seed);
  AdamState opt(reward.spec().param_count());
  Rng batch_rng = derive_stream(seed, Stream::kDemoBatch);
  const std::size_t n = config.reward_batch_size;
  RewardRefit refit = [&](const RolloutBatch& batch, const GaussianPolicy&) {
    std::vector<AgentTrajectory> agent = complete_episodes(batch);
    if (!agent.empty()) {
      std::vector<std::size_t> order(agent.size());
      std::iota(order.begin(), order.end(), 0);
      batch_rng.shuffle(std::span<std::size_t>(order));
      const std::size_t rounds = std::max<std::size_t>(1, agent.size() / n);
      for (std::size_t k = 0; k < rounds; ++k) {
        std::vector<AgentTrajectory> agent_mb;
        for (std::size_t i = k * n; i < std::min(agent.size(), (k + 1) * n); ++i) {
          agent_mb.push_back(agent[order[i]]);
        }
        std::vector<Trajectory> demo_mb;
        for (std::size_t i = 0; i < n; ++i) {
          demo_mb.push_back(demos.trajectories[batch_rng.index(demos.trajectories.size())]);
        }
        const GclGradient g = gcl_gradient(reward, agent_mb, demo_mb);
        adam_step(reward.params(), g.grad, opt, config.reward_lr);
      }
    }
    return state_reward(reward);
  };
  PpoRun run = train_ppo_refit(env, dist, state_reward(reward), refit, ppo, budget_steps, seed);
  return IrlRun{std::move(reward), std::move(run)};
}

}  // namespace mirl
