#include "mirl/bcirl.hpp"

#include <cmath>
#include <string>

#include "mirl/error.hpp"

namespace mirl {

std::vector<DemoTransition> flatten_demos(const DemoSet& demos) {
  std::vector<DemoTransition> out;
  for (const auto& traj : demos.trajectories) {
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      out.push_back({traj.states[t], traj.actions[t], traj.states[t + 1]});
    }
  }
  return out;
}

std::vector<DemoTransition> sample_demo_batch(std::span<const DemoTransition> pool,
                                              std::size_t n, Rng& rng) {
  if (pool.empty() || n == 0) throw ConfigError("bc: empty demonstration batch");
  std::vector<DemoTransition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
  return out;
}

double bc_loss(const GaussianPolicy& policy, std::span<const DemoTransition> batch) {
  if (batch.empty()) throw ConfigError("bc: empty demonstration batch");
  double total = 0.0;
  for (const auto& d : batch) {
    const std::vector<double> mu = policy.mean(d.state);
    for (std::size_t j = 0; j < mu.size(); ++j) {
      total += (mu[j] - d.action[j]) * (mu[j] - d.action[j]);
    }
  }
  return total / static_cast<double>(batch.size());
}

FlatParams bc_loss_grad(const GaussianPolicy& policy,
                        std::span<const DemoTransition> batch, double* loss) {
  if (batch.empty()) throw ConfigError("bc: empty demonstration batch");
  FlatParams grad(policy.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> upstream(policy.action_dim());
  for (const auto& d : batch) {
    const std::vector<double> mu = policy.mean(d.state);
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double diff = mu[j] - d.action[j];
      total += diff * diff;
      upstream[j] = 2.0 * diff * inv_n;
    }
    policy.accumulate_mean_grad(d.state, upstream, grad);
  }
  if (loss) *loss = total * inv_n;
  return grad;
}

void BcIrlConfig::validate() const {
  if (!(inner_lr > 0.0)) throw ConfigError("bcirl: inner_lr must be positive");
  if (!(reward_lr > 0.0)) throw ConfigError("bcirl: reward_lr must be positive");
  if (inner_steps < 1) throw ConfigError("bcirl: inner_steps must be at least 1");
  if (reward_batch_size == 0) throw ConfigError("bcirl: reward_batch_size must be positive");
}

MetaGradient meta_gradient_analytic(const GaussianPolicy& policy,
                                    const Mlp& reward_net,
                                    const RolloutBatch& batch,
                                    const AdvantageDecomposition& adv,
                                    const InnerStep& step,
                                    std::span<const DemoTransition> demo_batch,
                                    double alpha) {
  const std::size_t n = batch.size();
  if (adv.size() != n || step.scores.size() != n * policy.param_count()) {
    throw ContractError("meta-gradient: batch, advantages and inner step disagree");
  }
  if (adv.normalized) {
    throw ContractError("meta-gradient: advantages must not be normalized");
  }
  GaussianPolicy updated = policy;
  updated.set_flat(step.theta_new);

  MetaGradient out;
  const FlatParams v = bc_loss_grad(updated, demo_batch, &out.bc_loss);

  std::vector<double> c(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = step.score(t);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += v[j] * row[j];
    c[t] = acc;
  }
  out.state_coeffs = adv.apply_transpose(c);

  out.grad.assign(reward_net.spec().param_count(), 0.0);
  const double scale = alpha / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double up = scale * out.state_coeffs[k];
    if (up == 0.0) continue;
    reward_net.backward(batch.steps[k].next_state, std::span<const double>(&up, 1), out.grad);
  }
  if (!all_finite(out.grad)) throw NumericError("meta-gradient: non-finite reward gradient");
  return out;
}

MetaGradient meta_gradient_analytic(const GaussianPolicy& policy,
                                    const Mlp& reward_net,
                                    const RolloutBatch& batch,
                                    const AdvantageDecomposition& adv,
                                    std::span<const DemoTransition> demo_batch,
                                    double alpha) {
  const InnerStep step = single_step_policy_gradient(policy, batch, adv, alpha);
  return meta_gradient_analytic(policy, reward_net, batch, adv, step, demo_batch, alpha);
}

double meta_objective(const FrozenInnerProblem& problem, const Mlp& reward_net,
                      std::span<const DemoTransition> demo_batch) {
  RolloutBatch relabeled = *problem.batch;
  for (auto& rec : relabeled.steps) rec.reward = reward_net.forward_scalar(rec.next_state);
  const AdvantageDecomposition adv =
      gae(relabeled, *problem.value_net, problem.gamma, problem.lambda);
  const InnerStep step =
      single_step_policy_gradient(*problem.policy, relabeled, adv, problem.alpha);
  GaussianPolicy updated = *problem.policy;
  updated.set_flat(step.theta_new);
  return bc_loss(updated, demo_batch);
}

MetaGradient meta_gradient_fd(const FrozenInnerProblem& problem,
                              const Mlp& reward_net,
                              std::span<const DemoTransition> demo_batch,
                              double h) {
  MetaGradient out;
  out.bc_loss = meta_objective(problem, reward_net, demo_batch);
  Mlp probe = reward_net;
  const std::size_t p = reward_net.spec().param_count();
  out.grad.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double orig = reward_net.params()[j];
    probe.params()[j] = orig + h;
    const double up = meta_objective(problem, probe, demo_batch);
    probe.params()[j] = orig - h;
    const double down = meta_objective(problem, probe, demo_batch);
    probe.params()[j] = orig;
    out.grad[j] = (up - down) / (2.0 * h);
  }
  return out;
}

Mlp make_reward_net(std::size_t hidden_dim, double init_scale, std::uint64_t seed) {
  Rng rng = derive_stream(seed, Stream::kRewardInit);
  const MlpSpec spec{2, hidden_dim, 1};
  return Mlp(spec, init_feature_params(spec, init_scale, rng));
}

BcIrlResult bcirl_train(const PointMassConfig& env, const StartDistribution& dist,
                        const DemoSet& demos, const BcIrlConfig& config,
                        const PpoConfig& ppo, std::size_t budget_steps,
                        std::uint64_t seed) {
  config.validate();
  ppo.validate();
  if (demos.trajectories.empty()) throw ConfigError("bcirl: no demonstrations");
  BcIrlResult result{make_reward_net(config.reward_hidden, config.reward_init_scale, seed),
                     make_policy(ppo, seed), make_value_net(ppo, seed), {}, 0};
  AdamState reward_opt(result.reward_net.spec().param_count());
  AdamState value_opt(result.value_net.spec().param_count());
  Rng rollout_rng = derive_stream(seed, Stream::kRollout);
  Rng minibatch_rng = derive_stream(seed, Stream::kMinibatch);
  Rng demo_rng = derive_stream(seed, Stream::kDemoBatch);
  const std::vector<DemoTransition> pool = flatten_demos(demos);
  const std::size_t steps_per_outer = ppo.batch_size * static_cast<std::size_t>(config.inner_steps);

  std::size_t iteration = 0;
  while (result.env_steps + steps_per_outer <= budget_steps) {
    MetaGradient meta;
    double final_distance = 0.0;
    for (int k = 0; k < config.inner_steps; ++k) {
      const RolloutBatch batch =
          collect_rollouts(result.policy, result.value_net, env, dist,
                           state_reward(result.reward_net), ppo.batch_size, rollout_rng);
      AdvantageDecomposition adv = gae(batch, result.value_net, ppo.gamma, ppo.lambda);
      const InnerStep step =
          single_step_policy_gradient(result.policy, batch, adv, config.inner_lr);
      if (k + 1 == config.inner_steps) {
        const auto demo_batch = sample_demo_batch(pool, config.reward_batch_size, demo_rng);
        if (config.mode == MetaMode::kAnalytic) {
          meta = meta_gradient_analytic(result.policy, result.reward_net, batch, adv, step,
                                        demo_batch, config.inner_lr);
        } else {
          const FrozenInnerProblem problem{&result.policy, &result.value_net, &batch,
                                           ppo.gamma, ppo.lambda, config.inner_lr};
          meta = meta_gradient_fd(problem, result.reward_net, demo_batch, config.fd_step);
        }
      }
      result.policy.set_flat(step.theta_new);
      const double lr = scheduled_lr(ppo, result.env_steps, budget_steps);
      fit_value(result.value_net, batch, adv.returns, ppo, value_opt, lr, minibatch_rng);
      result.env_steps += batch.size();
      final_distance = mean_of(batch.final_distances);
    }
    if (!std::isfinite(meta.bc_loss)) {
      throw NumericError("bcirl: non-finite BC loss at iteration " + std::to_string(iteration));
    }
    adam_step(result.reward_net.params(), meta.grad, reward_opt, config.reward_lr);
    result.curve.push_back({iteration++, result.env_steps, meta.bc_loss, final_distance});
  }
  return result;
}

}  // namespace mirl
