#include "mirl/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mirl/error.hpp"

namespace mirl {

double open_sigmoid(double logit) {
  double p;
  if (logit >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-logit));
  } else {
    const double e = std::exp(logit);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

// Logistic function without clamping, for gradients.
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Nonempty sample spans are required by every discriminator loss.
void check_batches(std::span<const DiscSample> expert, std::span<const DiscSample> agent) {
  if (expert.empty() || agent.empty()) throw ConfigError("discriminator: empty batch");
}

std::vector<DiscSample> agent_samples(const RolloutBatch& batch,
                                      std::span<const std::size_t> indices) {
  std::vector<DiscSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const StepRecord& s = batch.steps[i];
    out.push_back({s.state, s.action, s.next_state, s.log_prob_old});
  }
  return out;
}

std::vector<DiscSample> expert_samples(std::span<const DemoTransition> pool,
                                       const GaussianPolicy& policy, std::size_t n,
                                       Rng& rng) {
  std::vector<DiscSample> out;
  out.reserve(n);
  for (const DemoTransition& d : sample_demo_batch(pool, n, rng)) {
    out.push_back({d.state, d.action, d.next_state, policy.log_prob(d.state, d.action)});
  }
  return out;
}

// Splits each batch into reward_batch_size chunks and calls step(expert, agent).
template <typename Step>
void discriminator_pass(const RolloutBatch& batch, const GaussianPolicy& policy,
                        std::span<const DemoTransition> pool, std::size_t n, Rng& rng,
                        Step&& step) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t rounds = std::max<std::size_t>(1, batch.size() / n);
  for (std::size_t k = 0; k < rounds; ++k) {
    const std::size_t end = std::min(batch.size(), (k + 1) * n);
    if (k * n >= end) break;
    const auto agent = agent_samples(
        batch, std::span<const std::size_t>(order).subspan(k * n, end - k * n));
    const auto expert = expert_samples(pool, policy, n, rng);
    step(expert, agent);
  }
}

}  // namespace

double AirlDiscriminator::f(const Vec2& s, const Vec2& s_next) const {
  return g.forward_scalar(s_next) + gamma * h.forward_scalar(s_next) - h.forward_scalar(s);
}

AirlDiscriminator make_airl_discriminator(std::size_t hidden_dim, double init_scale,
                                          double gamma, std::uint64_t seed) {
  Rng rng = derive_stream(seed, Stream::kAuxInit);
  const MlpSpec spec{2, hidden_dim, 1};
  return AirlDiscriminator{make_reward_net(hidden_dim, init_scale, seed),
                           Mlp(spec, init_feature_params(spec, init_scale, rng)), gamma};
}

double airl_loss(const AirlDiscriminator& disc, std::span<const DiscSample> expert,
                 std::span<const DiscSample> agent, std::span<double> grad_g,
                 std::span<double> grad_h, std::size_t* skipped) {
  check_batches(expert, agent);
  const bool want_grad = !grad_g.empty();
  std::size_t n_skipped = 0;
  std::size_t n_used = 0;
  double loss = 0.0;
  auto visit = [&](std::span<const DiscSample> samples, bool expert_label,
                   double* partial, std::vector<double>* dz) {
    for (const DiscSample& x : samples) {
      if (!std::isfinite(x.log_pi)) {
        ++n_skipped;
        dz->push_back(0.0);
        continue;
      }
      const double z = disc.logit(x);
      *partial += expert_label ? softplus(-z) : softplus(z);
      dz->push_back(expert_label ? sigmoid(z) - 1.0 : sigmoid(z));
      ++n_used;
    }
  };
  double partial = 0.0;
  std::vector<double> dz_expert, dz_agent;
  visit(expert, true, &partial, &dz_expert);
  visit(agent, false, &partial, &dz_agent);
  if (skipped) *skipped = n_skipped;
  if (n_used == 0) throw NumericError("airl: no finite samples");
  loss = partial / n_used;
  if (want_grad) {
    auto backprop = [&](std::span<const DiscSample> samples, const std::vector<double>& dz) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (dz[i] == 0.0) continue;
        const double c = dz[i] / n_used;
        const double up_g[1] = {c};
        const double up_next[1] = {c * disc.gamma};
        const double up_prev[1] = {-c};
        disc.g.backward(samples[i].next_state, up_g, grad_g);
        disc.h.backward(samples[i].next_state, up_next, grad_h);
        disc.h.backward(samples[i].state, up_prev, grad_h);
      }
    };
    backprop(expert, dz_expert);
    backprop(agent, dz_agent);
  }
  return loss;
}

DiscUpdateStats airl_update(AirlDiscriminator& disc, AirlOptimizer& opt,
                            std::span<const DiscSample> expert,
                            std::span<const DiscSample> agent, double lr) {
  FlatParams grad_g(disc.g.spec().param_count(), 0.0);
  FlatParams grad_h(disc.h.spec().param_count(), 0.0);
  DiscUpdateStats stats;
  stats.loss = airl_loss(disc, expert, agent, grad_g, grad_h, &stats.skipped);
  adam_step(disc.g.params(), grad_g, opt.g, lr);
  adam_step(disc.h.params(), grad_h, opt.h, lr);
  return stats;
}

double airl_policy_reward(const AirlDiscriminator& disc, const DiscSample& x) {
  return disc.logit(x);
}

double GailDiscriminator::logit(const Vec2& s, const Vec2& a) const {
  const double x[4] = {s[0], s[1], a[0], a[1]};
  return net.forward_scalar(x);
}

GailDiscriminator make_gail_discriminator(std::size_t hidden_dim, double init_scale,
                                          std::uint64_t seed) {
  Rng rng = derive_stream(seed, Stream::kRewardInit);
  const MlpSpec spec{4, hidden_dim, 1};
  return GailDiscriminator{Mlp(spec, init_feature_params(spec, init_scale, rng))};
}

double gail_loss(const GailDiscriminator& disc, std::span<const DiscSample> expert,
                 std::span<const DiscSample> agent, std::span<double> grad) {
  check_batches(expert, agent);
  const double n = static_cast<double>(expert.size() + agent.size());
  double loss = 0.0;
  auto visit = [&](std::span<const DiscSample> samples, bool expert_label) {
    for (const DiscSample& x : samples) {
      const double z = disc.logit(x.state, x.action);
      loss += expert_label ? softplus(-z) : softplus(z);
      if (!grad.empty()) {
        const double up[1] = {(expert_label ? sigmoid(z) - 1.0 : sigmoid(z)) / n};
        const double in[4] = {x.state[0], x.state[1], x.action[0], x.action[1]};
        disc.net.backward(in, up, grad);
      }
    }
  };
  visit(expert, true);
  visit(agent, false);
  return loss / n;
}

DiscUpdateStats gail_update(GailDiscriminator& disc, AdamState& opt,
                            std::span<const DiscSample> expert,
                            std::span<const DiscSample> agent, double lr) {
  FlatParams grad(disc.net.spec().param_count(), 0.0);
  DiscUpdateStats stats;
  stats.loss = gail_loss(disc, expert, agent, grad);
  adam_step(disc.net.params(), grad, opt, lr);
  return stats;
}

double gail_reward(const GailDiscriminator& disc, const Vec2& s, const Vec2& a) {
  return std::clamp(softplus(disc.logit(s, a)), 0.0, kGailRewardMax);
}

RewardFn gail_step_reward(GailDiscriminator disc, const PointMassConfig& config) {
  return [disc = std::move(disc), config](const StepRecord& step) {
    return gail_reward(disc, step.state, clamp_action(config, step.action));
  };
}

void AdversarialConfig::validate() const {
  if (!(reward_lr > 0.0)) throw ConfigError("adversarial: reward_lr must be positive");
  if (reward_batch_size == 0) {
    throw ConfigError("adversarial: reward_batch_size must be positive");
  }
}

AirlRun airl_train(const PointMassConfig& env, const StartDistribution& dist,
                   const DemoSet& demos, const AdversarialConfig& config,
                   const PpoConfig& ppo, std::size_t hidden_dim, double init_scale,
                   std::size_t budget_steps, std::uint64_t seed) {
  config.validate();
  if (demos.trajectories.empty()) throw ConfigError("airl: no demonstrations");
  AirlDiscriminator disc = make_airl_discriminator(hidden_dim, init_scale, ppo.gamma, seed);
  AirlOptimizer opt{AdamState(disc.g.spec().param_count()),
                    AdamState(disc.h.spec().param_count())};
  Rng rng = derive_stream(seed, Stream::kDemoBatch);
  const std::vector<DemoTransition> pool = flatten_demos(demos);
  auto reward_of = [&disc]() -> RewardFn {
    return [d = disc](const StepRecord& s) {
      return airl_policy_reward(d, {s.state, s.action, s.next_state, s.log_prob_old});
    };
  };
  RewardRefit refit = [&](const RolloutBatch& batch, const GaussianPolicy& policy) {
    discriminator_pass(batch, policy, pool, config.reward_batch_size, rng,
                       [&](const std::vector<DiscSample>& expert,
                           const std::vector<DiscSample>& agent) {
                         airl_update(disc, opt, expert, agent, config.reward_lr);
                       });
    return reward_of();
  };
  PpoRun run = train_ppo_refit(env, dist, reward_of(), refit, ppo, budget_steps, seed);
  return AirlRun{std::move(disc), std::move(run)};
}

GailRun gail_train(const PointMassConfig& env, const StartDistribution& dist,
                   const DemoSet& demos, const AdversarialConfig& config,
                   const PpoConfig& ppo, std::size_t hidden_dim, double init_scale,
                   std::size_t budget_steps, std::uint64_t seed) {
  config.validate();
  if (demos.trajectories.empty()) throw ConfigError("gail: no demonstrations");
  GailDiscriminator disc = make_gail_discriminator(hidden_dim, init_scale, seed);
  AdamState opt(disc.net.spec().param_count());
  Rng rng = derive_stream(seed, Stream::kDemoBatch);
  const std::vector<DemoTransition> pool = flatten_demos(demos);
  RewardRefit refit = [&](const RolloutBatch& batch, const GaussianPolicy& policy) {
    discriminator_pass(batch, policy, pool, config.reward_batch_size, rng,
                       [&](const std::vector<DiscSample>& expert,
                           std::vector<DiscSample> agent) {
                         for (DiscSample& x : agent) x.action = clamp_action(env, x.action);
                         gail_update(disc, opt, expert, agent, config.reward_lr);
                       });
    return gail_step_reward(disc, env);
  };
  PpoRun run = train_ppo_refit(env, dist, gail_step_reward(disc, env), refit, ppo,
                               budget_steps, seed);
  return GailRun{std::move(disc), std::move(run)};
}

}  // namespace mirl
