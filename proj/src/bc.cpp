#include "mirl/bc.hpp"

#include "mirl/error.hpp"

namespace mirl {

void BcConfig::validate() const {
  if (epochs < 0) throw ConfigError("bc: epochs must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("bc: lr must be positive");
}

std::vector<double> bc_train(GaussianPolicy& policy, const DemoSet& demos,
                             const BcConfig& config) {
  config.validate();
  const std::vector<DemoTransition> pool = flatten_demos(demos);
  if (pool.empty()) throw ConfigError("bc: no demonstrations");
  AdamState opt(policy.param_count());
  std::vector<double> losses;
  losses.reserve(config.epochs);
  for (int e = 0; e < config.epochs; ++e) {
    double loss = 0.0;
    const FlatParams grad = bc_loss_grad(policy, pool, &loss);
    FlatParams theta = policy.flat();
    adam_step(theta, grad, opt, config.lr);
    policy.set_flat(theta);
    losses.push_back(loss);
  }
  return losses;
}

BcRun bc_baseline(const DemoSet& demos, const BcConfig& config, const PpoConfig& ppo,
                  std::uint64_t seed) {
  BcRun run{make_policy(ppo, seed), {}};
  run.losses = bc_train(run.policy, demos, config);
  return run;
}

}  // namespace mirl
