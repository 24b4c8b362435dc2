#ifndef MIRL_BCIRL_HPP_
#define MIRL_BCIRL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mirl/env.hpp"
#include "mirl/net.hpp"
#include "mirl/ppo.hpp"

namespace mirl {

struct DemoTransition {
  Vec2 state{};
  Vec2 action{};
  Vec2 next_state{};
};

std::vector<DemoTransition> flatten_demos(const DemoSet& demos);

// Uniform with replacement over all demo transitions.
std::vector<DemoTransition> sample_demo_batch(std::span<const DemoTransition> pool,
                                              std::size_t n, Rng& rng);

// mean_i || mu_theta(s_i) - a_i ||^2
double bc_loss(const GaussianPolicy& policy, std::span<const DemoTransition> batch);
FlatParams bc_loss_grad(const GaussianPolicy& policy,
                        std::span<const DemoTransition> batch,
                        double* loss = nullptr);

enum class MetaMode { kAnalytic, kFiniteDifference };

struct BcIrlConfig {
  double inner_lr = 1e-2;
  double reward_lr = 1e-3;
  std::size_t reward_batch_size = 20;
  int inner_steps = 1;
  MetaMode mode = MetaMode::kAnalytic;
  double fd_step = 1e-5;
  std::size_t reward_hidden = 128;
  double reward_init_scale = 5.0;

  void validate() const;
};

struct MetaGradient {
  FlatParams grad;                  // over reward parameters
  std::vector<double> state_coeffs; // d_k
  double bc_loss = 0.0;             // at the updated policy
};

// Gradient of bc_loss(theta') with respect to the reward parameters, where
// theta' is the inner step. Advantages are affine in the per-step rewards
// with the value net held fixed, so
//   dL/dpsi = (alpha/N) sum_k d_k grad_psi R(s'_k),
//   d = W^T c,  c_t = v . grad_theta log pi(a_t|s_t),  v = dL/dtheta'.
MetaGradient meta_gradient_analytic(const GaussianPolicy& policy,
                                    const Mlp& reward_net,
                                    const RolloutBatch& batch,
                                    const AdvantageDecomposition& adv,
                                    const InnerStep& step,
                                    std::span<const DemoTransition> demo_batch,
                                    double alpha);

MetaGradient meta_gradient_analytic(const GaussianPolicy& policy,
                                    const Mlp& reward_net,
                                    const RolloutBatch& batch,
                                    const AdvantageDecomposition& adv,
                                    std::span<const DemoTransition> demo_batch,
                                    double alpha);

// Bundle of everything the finite-difference path re-evaluates.
struct FrozenInnerProblem {
  const GaussianPolicy* policy = nullptr;
  const Mlp* value_net = nullptr;
  const RolloutBatch* batch = nullptr;
  double gamma = 0.99;
  double lambda = 0.95;
  double alpha = 1e-3;
};

// bc_loss(theta'(psi)) with rollouts, value net and demo batch frozen.
double meta_objective(const FrozenInnerProblem& problem, const Mlp& reward_net,
                      std::span<const DemoTransition> demo_batch);

// Central differences over every reward coordinate.
MetaGradient meta_gradient_fd(const FrozenInnerProblem& problem,
                              const Mlp& reward_net,
                              std::span<const DemoTransition> demo_batch,
                              double h = 1e-5);

struct BcIrlCurvePoint {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double bc_loss = 0.0;
  double mean_final_distance = 0.0;
};

struct BcIrlResult {
  Mlp reward_net;
  GaussianPolicy policy;
  Mlp value_net;
  std::vector<BcIrlCurvePoint> curve;
  std::size_t env_steps = 0;
};

// State-only reward R(s) with a zero initial output.
Mlp make_reward_net(std::size_t hidden_dim, double init_scale, std::uint64_t seed);

// Reward learning loop: rollouts under R_psi, inner step (committed, warm
// started), value refit, meta-gradient, Adam on psi.
BcIrlResult bcirl_train(const PointMassConfig& env, const StartDistribution& dist,
                        const DemoSet& demos, const BcIrlConfig& config,
                        const PpoConfig& ppo, std::size_t budget_steps,
                        std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_BCIRL_HPP_
