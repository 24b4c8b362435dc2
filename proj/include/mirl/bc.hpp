#ifndef MIRL_BC_HPP_
#define MIRL_BC_HPP_

#include <cstdint>
#include <vector>

#include "mirl/bcirl.hpp"
#include "mirl/env.hpp"
#include "mirl/net.hpp"
#include "mirl/ppo.hpp"

namespace mirl {

struct BcConfig {
  int epochs = 2000;
  double lr = 1e-3;

  void validate() const;
};

// Full-batch Adam on bc_loss over every demo transition. Returns the loss
// before each epoch.
std::vector<double> bc_train(GaussianPolicy& policy, const DemoSet& demos,
                             const BcConfig& config);

struct BcRun {
  GaussianPolicy policy;
  std::vector<double> losses;
};

BcRun bc_baseline(const DemoSet& demos, const BcConfig& config, const PpoConfig& ppo,
                  std::uint64_t seed);

}  // namespace mirl

#endif  // MIRL_BC_HPP_
