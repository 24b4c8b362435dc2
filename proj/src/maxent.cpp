#include "mirl/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mirl/bcirl.hpp"
#include "mirl/error.hpp"

namespace mirl {
namespace {

constexpr int kMoves[GridDiscretization::kActions][2] = {
    {0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

double logsumexp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

GridDiscretization::GridDiscretization(const PointMassConfig& config,
                                       int cells_per_axis, int move_cells)
    : g_(cells_per_axis), move_(move_cells), horizon_(config.horizon),
      half_(config.arena_half_extent) {
  config.validate();
  if (g_ < 1) throw ConfigError("grid: cells_per_axis must be positive");
  if (move_ < 1) throw ConfigError("grid: move_cells must be positive");
  cell_ = g_ > 1 ? 2.0 * half_ / (g_ - 1) : 0.0;
  masked_.assign(cell_count(), false);
  for (std::size_t c = 0; c < cell_count(); ++c) {
    masked_[c] = config.inside_obstacle(center(c));
  }
  next_.assign(cell_count() * kActions, 0);
  for (int i = 0; i < g_; ++i) {
    for (int j = 0; j < g_; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * g_ + j;
      for (int a = 0; a < kActions; ++a) {
        const int ni = std::clamp(i + kMoves[a][0] * move_, 0, g_ - 1);
        const int nj = std::clamp(j + kMoves[a][1] * move_, 0, g_ - 1);
        const std::size_t n = static_cast<std::size_t>(ni) * g_ + nj;
        next_[c * kActions + a] = masked_[n] ? c : n;
      }
    }
  }
}

GridDiscretization GridDiscretization::matching(const PointMassConfig& config,
                                                int cells_per_axis) {
  const double cell = cells_per_axis > 1
                          ? 2.0 * config.arena_half_extent / (cells_per_axis - 1)
                          : 1.0;
  const int move = std::max(1, static_cast<int>(std::lround(config.max_step / cell)));
  return GridDiscretization(config, cells_per_axis, move);
}

Vec2 GridDiscretization::center(std::size_t cell) const {
  const int i = static_cast<int>(cell / g_);
  const int j = static_cast<int>(cell % g_);
  return {-half_ + i * cell_, -half_ + j * cell_};
}

std::size_t GridDiscretization::cell_of(const Vec2& p) const {
  if (g_ == 1) return 0;
  auto index = [&](double v) {
    const long k = std::lround((v + half_) / cell_);
    return static_cast<std::size_t>(std::clamp<long>(k, 0, g_ - 1));
  };
  return index(p[0]) * g_ + index(p[1]);
}

std::vector<double> anchor_cell_distribution(const GridDiscretization& grid,
                                             const std::vector<Vec2>& anchors) {
  if (anchors.empty()) throw ConfigError("maxent: no start anchors");
  std::vector<double> rho(grid.cell_count(), 0.0);
  for (const Vec2& a : anchors) rho[grid.cell_of(a)] += 1.0 / anchors.size();
  return rho;
}

std::vector<double> cell_rewards(const GridDiscretization& grid, const Mlp& reward_net) {
  std::vector<double> r(grid.cell_count());
  for (std::size_t c = 0; c < r.size(); ++c) r[c] = reward_net.forward_scalar(grid.center(c));
  return r;
}

SoftSolution soft_value_iteration(const GridDiscretization& grid,
                                  const std::vector<double>& rewards,
                                  const std::vector<double>& initial) {
  const std::size_t n = grid.cell_count();
  const int horizon = grid.horizon();
  constexpr int kA = GridDiscretization::kActions;
  if (rewards.size() != n || initial.size() != n) {
    throw ConfigError("maxent: reward or initial distribution size mismatch");
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (initial[c] > 0.0 && grid.masked(c)) {
      throw ConfigError("maxent: initial distribution covers a masked cell");
    }
  }
  SoftSolution sol;
  sol.beta.assign(horizon + 1, std::vector<double>(n));
  sol.policy.assign(horizon, std::vector<double>(n * kA));
  sol.beta[horizon] = rewards;
  double q[kA];
  for (int t = horizon - 1; t >= 0; --t) {
    const auto& next_beta = sol.beta[t + 1];
    for (std::size_t c = 0; c < n; ++c) {
      for (int a = 0; a < kA; ++a) q[a] = next_beta[grid.next(c, a)];
      const double v = logsumexp(q, kA);
      sol.beta[t][c] = rewards[c] + v;
      for (int a = 0; a < kA; ++a) sol.policy[t][c * kA + a] = std::exp(q[a] - v);
    }
  }
  std::vector<double> terms;
  for (std::size_t c = 0; c < n; ++c) {
    if (initial[c] > 0.0) terms.push_back(std::log(initial[c]) + sol.beta[0][c]);
  }
  if (terms.empty()) throw ConfigError("maxent: empty initial distribution");
  sol.log_z = logsumexp(terms.data(), terms.size());
  if (!std::isfinite(sol.log_z)) throw NumericError("maxent: log partition is not finite");

  sol.visitation.assign(horizon + 1, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    if (initial[c] > 0.0) {
      sol.visitation[0][c] = std::exp(std::log(initial[c]) + sol.beta[0][c] - sol.log_z);
    }
  }
  for (int t = 0; t < horizon; ++t) {
    for (std::size_t c = 0; c < n; ++c) {
      const double mass = sol.visitation[t][c];
      if (mass == 0.0) continue;
      for (int a = 0; a < kA; ++a) {
        sol.visitation[t + 1][grid.next(c, a)] += mass * sol.policy[t][c * kA + a];
      }
    }
  }
  return sol;
}

SoftSolution soft_value_iteration(const GridDiscretization& grid,
                                  const Mlp& reward_net,
                                  const std::vector<double>& initial) {
  return soft_value_iteration(grid, cell_rewards(grid, reward_net), initial);
}

namespace {

// Demo cell counts divided by the number of demos.
std::vector<double> demo_cell_weights(const GridDiscretization& grid, const DemoSet& demos) {
  if (demos.trajectories.empty()) throw ConfigError("maxent: no demonstrations");
  std::vector<double> w(grid.cell_count(), 0.0);
  const double inv = 1.0 / demos.trajectories.size();
  for (const Trajectory& traj : demos.trajectories) {
    for (const Vec2& s : traj.states) w[grid.cell_of(s)] += inv;
  }
  return w;
}

}  // namespace

double maxent_loss(const GridDiscretization& grid, const Mlp& reward_net,
                   const DemoSet& demos, const std::vector<double>& initial) {
  const std::vector<double> r = cell_rewards(grid, reward_net);
  const std::vector<double> w = demo_cell_weights(grid, demos);
  double demo_reward = 0.0;
  for (std::size_t c = 0; c < r.size(); ++c) demo_reward += w[c] * r[c];
  return -demo_reward + soft_value_iteration(grid, r, initial).log_z;
}

FlatParams maxent_gradient(const GridDiscretization& grid, const Mlp& reward_net,
                           const DemoSet& demos, const std::vector<double>& initial,
                           double* loss) {
  const std::vector<double> r = cell_rewards(grid, reward_net);
  const std::vector<double> demo_w = demo_cell_weights(grid, demos);
  const SoftSolution sol = soft_value_iteration(grid, r, initial);
  FlatParams grad(reward_net.spec().param_count(), 0.0);
  double demo_reward = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    double w = -demo_w[c];
    for (const auto& d : sol.visitation) w += d[c];
    demo_reward += demo_w[c] * r[c];
    if (w == 0.0) continue;
    const double upstream[1] = {w};
    reward_net.backward(grid.center(c), upstream, grad);
  }
  if (loss) *loss = -demo_reward + sol.log_z;
  return grad;
}

void MaxEntConfig::validate() const {
  if (!(reward_lr > 0.0)) throw ConfigError("maxent: reward_lr must be positive");
  if (iterations < 0) throw ConfigError("maxent: iterations must be non-negative");
  if (cells_per_axis < 2) throw ConfigError("maxent: cells_per_axis must be at least 2");
}

MaxEntResult maxent_train(const PointMassConfig& env, const StartDistribution& dist,
                          const DemoSet& demos, const MaxEntConfig& config,
                          std::size_t reward_hidden, double reward_init_scale,
                          std::uint64_t seed) {
  config.validate();
  const GridDiscretization grid = GridDiscretization::matching(env, config.cells_per_axis);
  const std::vector<double> initial = anchor_cell_distribution(grid, dist.anchors);
  MaxEntResult result{make_reward_net(reward_hidden, reward_init_scale, seed), {}};
  AdamState opt(result.reward_net.spec().param_count());
  for (int it = 0; it < config.iterations; ++it) {
    double loss = 0.0;
    const FlatParams grad = maxent_gradient(grid, result.reward_net, demos, initial, &loss);
    adam_step(result.reward_net.params(), grad, opt, config.reward_lr);
    result.losses.push_back(loss);
  }
  return result;
}

}  // namespace mirl
