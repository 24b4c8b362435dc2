#include "mirl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mirl/error.hpp"

namespace mirl {

std::size_t RolloutBatch::episode_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i == 0 || steps[i].episode != steps[i - 1].episode) ++n;
  }
  return n;
}

RewardFn state_reward(Mlp reward_net) {
  return [net = std::move(reward_net)](const StepRecord& r) {
    return net.forward_scalar(r.next_state);
  };
}

RewardFn dense_distance_reward(const PointMassConfig& config) {
  const Vec2 goal = config.goal;
  return [goal](const StepRecord& r) {
    return norm(r.state - goal) - norm(r.next_state - goal);
  };
}

RolloutBatch collect_rollouts(const GaussianPolicy& policy, const Mlp& value_net,
                              const PointMassConfig& config,
                              const StartDistribution& dist,
                              const RewardFn& reward, std::size_t n_steps,
                              Rng& rng) {
  if (n_steps < static_cast<std::size_t>(config.horizon)) {
    throw ConfigError("rollout: n_steps must be at least the horizon");
  }
  RolloutBatch batch;
  batch.steps.reserve(n_steps);
  int episode = 0;
  while (batch.steps.size() < n_steps) {
    Vec2 s = env_reset(config, dist, rng);
    for (int t = 0; t < config.horizon && batch.steps.size() < n_steps; ++t) {
      StepRecord rec;
      rec.state = s;
      const std::vector<double> a = policy.sample(s, rng);
      rec.action = {a[0], a[1]};
      rec.log_prob_old = policy.log_prob(s, rec.action);
      rec.value_old = value_net.forward_scalar(s);
      rec.next_state = env_step(config, s, rec.action);
      rec.done = (t == config.horizon - 1);
      rec.episode = episode;
      rec.step = t;
      rec.reward = reward(rec);
      s = rec.next_state;
      batch.steps.push_back(rec);
      if (rec.done) batch.final_distances.push_back(norm(s - config.goal));
    }
    ++episode;
  }
  return batch;
}

void relabel_rewards(RolloutBatch& batch, const RewardFn& reward) {
  for (auto& rec : batch.steps) rec.reward = reward(rec);
}

double AdvantageDecomposition::weight(std::size_t t, std::size_t k) const {
  if (k < t || k >= segment_end[t]) return 0.0;
  return std::pow(gamma_lambda, static_cast<double>(k - t));
}

std::vector<double> AdvantageDecomposition::apply(
    std::span<const double> rewards) const {
  const std::size_t n = size();
  if (rewards.size() != n) throw ConfigError("gae: reward vector size mismatch");
  std::vector<double> out(n, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    out[t] = rewards[t];
    if (t + 1 < segment_end[t]) out[t] += gamma_lambda * out[t + 1];
  }
  return out;
}

std::vector<double> AdvantageDecomposition::apply_transpose(
    std::span<const double> coeffs) const {
  const std::size_t n = size();
  if (coeffs.size() != n) throw ConfigError("gae: coefficient vector size mismatch");
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = coeffs[k];
    if (k > segment_begin[k]) out[k] += gamma_lambda * out[k - 1];
  }
  return out;
}

AdvantageDecomposition gae(const RolloutBatch& batch, const Mlp& value_net,
                           double gamma, double lambda) {
  const std::size_t n = batch.size();
  AdvantageDecomposition adv;
  adv.gamma_lambda = gamma * lambda;
  adv.advantages.assign(n, 0.0);
  adv.returns.assign(n, 0.0);
  adv.offset.assign(n, 0.0);
  adv.segment_begin.assign(n, 0);
  adv.segment_end.assign(n, 0);

  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin + 1;
    while (end < n && batch.steps[end].episode == batch.steps[begin].episode) ++end;
    double running_adv = 0.0;
    double running_off = 0.0;
    for (std::size_t t = end; t-- > begin;) {
      const StepRecord& rec = batch.steps[t];
      const double v = value_net.forward_scalar(rec.state);
      const double v_next = rec.done ? 0.0 : value_net.forward_scalar(rec.next_state);
      const double base = gamma * v_next - v;
      const double delta = rec.reward + base;
      running_adv = delta + adv.gamma_lambda * running_adv;
      running_off = base + adv.gamma_lambda * running_off;
      adv.advantages[t] = running_adv;
      adv.offset[t] = running_off;
      adv.returns[t] = running_adv + v;
      adv.segment_begin[t] = begin;
      adv.segment_end[t] = end;
    }
    begin = end;
  }
  return adv;
}

void normalize_advantages(AdvantageDecomposition& adv) {
  const std::size_t n = adv.size();
  if (n == 0) return;
  const double mean = mean_of(adv.advantages);
  double var = 0.0;
  for (double a : adv.advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : adv.advantages) a = (a - mean) * inv;
  adv.normalized = true;
}

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("ppo: lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw ConfigError("ppo: clip must be positive");
  if (epochs < 1 || minibatches < 1) throw ConfigError("ppo: epochs and minibatches must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("ppo: lr must be non-negative");
  if (batch_size == 0) throw ConfigError("ppo: batch_size must be positive");
  if (hidden_dim == 0) throw ConfigError("ppo: hidden_dim must be positive");
}

PpoOptimizer make_optimizer(const GaussianPolicy& policy, const Mlp& value_net) {
  return {AdamState(policy.param_count()), AdamState(value_net.spec().param_count())};
}

FlatParams ppo_policy_gradient(const GaussianPolicy& policy,
                               const RolloutBatch& batch,
                               std::span<const double> advantages,
                               std::span<const std::size_t> indices,
                               const PpoConfig& config, double* loss,
                               double* clip_fraction) {
  FlatParams grad(policy.param_count(), 0.0);
  if (indices.empty()) return grad;
  const double inv_m = 1.0 / static_cast<double>(indices.size());
  double total = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i : indices) {
    const StepRecord& rec = batch.steps[i];
    const double a_hat = advantages[i];
    const double ratio = std::exp(policy.log_prob(rec.state, rec.action) - rec.log_prob_old);
    const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double unclipped_obj = ratio * a_hat;
    const double clipped_obj = clipped_ratio * a_hat;
    total -= std::min(unclipped_obj, clipped_obj);
    if (unclipped_obj <= clipped_obj) {
      policy.accumulate_log_prob_grad(rec.state, rec.action, -a_hat * ratio * inv_m, grad);
    } else {
      ++clipped;
    }
  }
  total = total * inv_m - config.entropy_coef * policy.entropy();
  policy.accumulate_entropy_grad(-config.entropy_coef, grad);
  if (!std::isfinite(total)) throw NumericError("ppo: non-finite policy loss");
  if (loss) *loss = total;
  if (clip_fraction) *clip_fraction = static_cast<double>(clipped) * inv_m;
  return grad;
}

FlatParams value_gradient(const Mlp& value_net, const RolloutBatch& batch,
                          std::span<const double> returns,
                          std::span<const std::size_t> indices, double* loss) {
  FlatParams grad(value_net.spec().param_count(), 0.0);
  if (indices.empty()) return grad;
  const double inv_m = 1.0 / static_cast<double>(indices.size());
  double total = 0.0;
  for (std::size_t i : indices) {
    const Vec2& s = batch.steps[i].state;
    const double err = value_net.forward_scalar(s) - returns[i];
    total += err * err;
    const double up = 2.0 * err * inv_m;
    value_net.backward(s, std::span<const double>(&up, 1), grad);
  }
  total *= inv_m;
  if (!std::isfinite(total)) throw NumericError("ppo: non-finite value loss");
  if (loss) *loss = total;
  return grad;
}

namespace {

std::vector<std::vector<std::size_t>> shuffled_minibatches(std::size_t n, int count,
                                                           Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(count));
  const std::size_t per = (n + count - 1) / count;
  for (std::size_t i = 0; i < n; ++i) out[i / per].push_back(order[i]);
  return out;
}

}  // namespace

PpoUpdateStats ppo_update(GaussianPolicy& policy, Mlp& value_net,
                          const RolloutBatch& batch,
                          const AdvantageDecomposition& adv,
                          const PpoConfig& config, PpoOptimizer& opt, double lr,
                          Rng& rng) {
  if (adv.size() != batch.size()) throw ContractError("ppo: advantages do not match batch");
  PpoUpdateStats stats;
  std::size_t n_updates = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& mb : shuffled_minibatches(batch.size(), config.minibatches, rng)) {
      if (mb.empty()) continue;
      double p_loss = 0.0, v_loss = 0.0, clip_frac = 0.0;
      FlatParams g_pi = ppo_policy_gradient(policy, batch, adv.advantages, mb, config,
                                            &p_loss, &clip_frac);
      FlatParams g_v = value_gradient(value_net, batch, adv.returns, mb, &v_loss);
      for (double& g : g_v) g *= config.value_coef;

      FlatParams theta = policy.flat();
      adam_step(theta, g_pi, opt.policy, lr);
      policy.set_flat(theta);
      adam_step(value_net.params(), g_v, opt.value, lr);

      stats.policy_loss += p_loss;
      stats.value_loss += v_loss;
      stats.clip_fraction += clip_frac;
      ++n_updates;
    }
  }
  if (n_updates > 0) {
    stats.policy_loss /= static_cast<double>(n_updates);
    stats.value_loss /= static_cast<double>(n_updates);
    stats.clip_fraction /= static_cast<double>(n_updates);
  }
  return stats;
}

double fit_value(Mlp& value_net, const RolloutBatch& batch,
                 std::span<const double> returns, const PpoConfig& config,
                 AdamState& opt, double lr, Rng& rng) {
  double last = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& mb : shuffled_minibatches(batch.size(), config.minibatches, rng)) {
      if (mb.empty()) continue;
      FlatParams g = value_gradient(value_net, batch, returns, mb, &last);
      for (double& x : g) x *= config.value_coef;
      adam_step(value_net.params(), g, opt, lr);
    }
  }
  return last;
}

InnerStep single_step_policy_gradient(const GaussianPolicy& policy,
                                      const RolloutBatch& batch,
                                      const AdvantageDecomposition& adv,
                                      double alpha) {
  if (adv.size() != batch.size() || batch.size() == 0) {
    throw ContractError("inner step: advantages do not match batch");
  }
  const std::size_t n = batch.size();
  const std::size_t p = policy.param_count();
  InnerStep step;
  step.n_params = p;
  step.scores.assign(n * p, 0.0);
  step.direction.assign(p, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::span<double> row(step.scores.data() + t * p, p);
    policy.accumulate_log_prob_grad(batch.steps[t].state, batch.steps[t].action, 1.0, row);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double w = adv.advantages[t] * inv_n;
    const double* row = step.scores.data() + t * p;
    for (std::size_t j = 0; j < p; ++j) step.direction[j] += w * row[j];
  }
  if (!all_finite(step.direction)) throw NumericError("inner step: non-finite policy gradient");
  step.theta_new = policy.flat();
  for (std::size_t j = 0; j < p; ++j) step.theta_new[j] += alpha * step.direction[j];
  return step;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

EvalResult evaluate_policy(const GaussianPolicy& policy,
                           const PointMassConfig& config,
                           const StartDistribution& dist,
                           std::size_t n_episodes, Rng& rng) {
  EvalResult result;
  result.distances.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Vec2 s = env_reset(config, dist, rng);
    for (int t = 0; t < config.horizon; ++t) {
      const std::vector<double> mu = policy.mean(s);
      s = env_step(config, s, {mu[0], mu[1]});
    }
    result.distances.push_back(norm(s - config.goal));
  }
  result.mean = mean_of(result.distances);
  if (n_episodes > 1) {
    double var = 0.0;
    for (double d : result.distances) var += (d - result.mean) * (d - result.mean);
    var /= static_cast<double>(n_episodes - 1);
    result.std_error = std::sqrt(var / static_cast<double>(n_episodes));
  }
  return result;
}

double scheduled_lr(const PpoConfig& config, std::size_t steps_done,
                    std::size_t budget) {
  if (!config.lr_decay || budget == 0) return config.lr;
  const double frac = 1.0 - static_cast<double>(steps_done) / static_cast<double>(budget);
  return config.lr * std::max(0.0, frac);
}

GaussianPolicy make_policy(const PpoConfig& config, std::uint64_t seed) {
  Rng rng = derive_stream(seed, Stream::kPolicyInit);
  return GaussianPolicy::initialized(2, 2, config.hidden_dim, rng, config.log_std_init,
                                     config.mean_scale);
}

Mlp make_value_net(const PpoConfig& config, std::uint64_t seed) {
  Rng rng = derive_stream(seed, Stream::kPolicyInit, 1);
  return Mlp::initialized({2, config.hidden_dim, 1}, rng);
}

PpoRun train_ppo(const PointMassConfig& env, const StartDistribution& dist,
                 const RewardFn& reward, const PpoConfig& config,
                 std::size_t budget_steps, std::uint64_t seed) {
  return train_ppo_refit(env, dist, reward, nullptr, config, budget_steps, seed);
}

PpoRun train_ppo_refit(const PointMassConfig& env, const StartDistribution& dist,
                       const RewardFn& reward, const RewardRefit& refit,
                       const PpoConfig& config, std::size_t budget_steps,
                       std::uint64_t seed) {
  config.validate();
  PpoRun run{make_policy(config, seed), make_value_net(config, seed), {}, 0};
  PpoOptimizer opt = make_optimizer(run.policy, run.value_net);
  Rng rollout_rng = derive_stream(seed, Stream::kRollout);
  Rng minibatch_rng = derive_stream(seed, Stream::kMinibatch);
  RewardFn current = reward;
  std::size_t iteration = 0;
  while (run.env_steps + config.batch_size <= budget_steps) {
    RolloutBatch batch = collect_rollouts(run.policy, run.value_net, env, dist, current,
                                          config.batch_size, rollout_rng);
    if (refit) {
      current = refit(batch, run.policy);
      relabel_rewards(batch, current);
    }
    AdvantageDecomposition adv = gae(batch, run.value_net, config.gamma, config.lambda);
    if (config.normalize_advantages) normalize_advantages(adv);
    const double lr = scheduled_lr(config, run.env_steps, budget_steps);
    PpoUpdateStats stats = ppo_update(run.policy, run.value_net, batch, adv, config, opt,
                                      lr, minibatch_rng);
    run.env_steps += batch.size();
    run.curve.push_back({iteration++, run.env_steps, mean_of(batch.final_distances),
                         stats.policy_loss});
  }
  return run;
}

}  // namespace mirl
