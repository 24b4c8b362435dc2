#ifndef MIRL_MAXENT_HPP_
#define MIRL_MAXENT_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mirl/env.hpp"
#include "mirl/net.hpp"

namespace mirl {

// Tabular view of the point mass: G x G cell centers over the arena, nine
// moves (eight compass directions of move_cells cells, plus stay). Moves are
// clamped to the grid; moves into masked cells stay in place.
class GridDiscretization {
 public:
  GridDiscretization(const PointMassConfig& config, int cells_per_axis = 61,
                     int move_cells = 1);
  // Move size matching the environment's per-axis step clamp.
  static GridDiscretization matching(const PointMassConfig& config,
                                     int cells_per_axis = 61);

  static constexpr int kActions = 9;

  int cells_per_axis() const { return g_; }
  int move_cells() const { return move_; }
  int horizon() const { return horizon_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(g_) * g_; }
  double cell_size() const { return cell_; }
  bool masked(std::size_t cell) const { return masked_[cell]; }
  Vec2 center(std::size_t cell) const;
  // Nearest cell center.
  std::size_t cell_of(const Vec2& p) const;
  std::size_t next(std::size_t cell, int action) const { return next_[cell * kActions + action]; }

 private:
  int g_;
  int move_;
  int horizon_;
  double half_;
  double cell_;
  std::vector<bool> masked_;
  std::vector<std::size_t> next_;
};

struct SoftSolution {
  std::vector<std::vector<double>> beta;        // [t][cell], t = 0..T
  double log_z = 0.0;
  std::vector<std::vector<double>> visitation;  // [t][cell]
  // [t][cell * 9 + a], t = 0..T-1
  std::vector<std::vector<double>> policy;
};

// Initial distribution over cells: equal mass on the cells of the anchors.
std::vector<double> anchor_cell_distribution(const GridDiscretization& grid,
                                             const std::vector<Vec2>& anchors);

// Backward soft Bellman recursion with trajectory reward sum_{t=0}^{T} R(s_t),
// then the forward visitation pass.
SoftSolution soft_value_iteration(const GridDiscretization& grid,
                                  const std::vector<double>& cell_rewards,
                                  const std::vector<double>& initial);
SoftSolution soft_value_iteration(const GridDiscretization& grid,
                                  const Mlp& reward_net,
                                  const std::vector<double>& initial);

std::vector<double> cell_rewards(const GridDiscretization& grid, const Mlp& reward_net);

// -mean_demo sum_t R(s_t) + log Z.
double maxent_loss(const GridDiscretization& grid, const Mlp& reward_net,
                   const DemoSet& demos, const std::vector<double>& initial);

FlatParams maxent_gradient(const GridDiscretization& grid, const Mlp& reward_net,
                           const DemoSet& demos, const std::vector<double>& initial,
                           double* loss = nullptr);

struct MaxEntConfig {
  double reward_lr = 1e-3;
  int iterations = 300;
  int cells_per_axis = 61;

  void validate() const;
};

struct MaxEntResult {
  Mlp reward_net;
  std::vector<double> losses;
};

MaxEntResult maxent_train(const PointMassConfig& env, const StartDistribution& dist,
                          const DemoSet& demos, const MaxEntConfig& config,
                          std::size_t reward_hidden, double reward_init_scale,
                          std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_MAXENT_HPP_
