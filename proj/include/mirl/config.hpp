#ifndef MIRL_CONFIG_HPP_
#define MIRL_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mirl/adversarial.hpp"
#include "mirl/bc.hpp"
#include "mirl/bcirl.hpp"
#include "mirl/env.hpp"
#include "mirl/gcl.hpp"
#include "mirl/maxent.hpp"
#include "mirl/ppo.hpp"

namespace mirl {

enum class Algo { kBcIrl, kAirl, kGcl, kMaxEnt, kGail, kBc };
enum class Phase { kTrain, kEvalTrain, kEvalTest };

std::string to_string(Algo algo);
std::string to_string(Phase phase);
Algo parse_algo(const std::string& name);
Phase parse_phase(const std::string& name);

struct EnvSettings {
  std::string task = "open";
  PointMassConfig config = PointMassConfig::open_task();
  std::size_t n_demos = 4;
  double start_jitter = 0.05;
};

struct IrlSettings {
  Algo algo = Algo::kBcIrl;
  std::size_t reward_hidden = 128;
  double reward_init_scale = 5.0;
  BcIrlConfig bcirl;
  double bcirl_policy_lr = 1e-4;
  AdversarialConfig airl{1e-3, 20};
  double airl_policy_lr = 1e-4;
  GclConfig gcl;
  double gcl_policy_lr = 3e-4;
  MaxEntConfig maxent;
  AdversarialConfig gail{1e-3, 20};
  double gail_policy_lr = 3e-4;
  BcConfig bc;
};

struct SuiteSettings {
  std::vector<Algo> algos{Algo::kBcIrl, Algo::kAirl, Algo::kGcl, Algo::kMaxEnt};
  std::vector<Phase> phases{Phase::kTrain, Phase::kEvalTrain, Phase::kEvalTest};
  std::size_t train_budget = 200000;
  std::size_t eval_budget = 200000;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t n_eval_episodes = 100;
  int field_resolution = 101;
  bool record_wall_time = false;
};

struct IoSettings {
  std::string out_dir = "runs";
  std::string demo_path;  // empty: scripted demos
};

struct RunConfig {
  EnvSettings env;
  // Reward transfer trains fresh policies with ppo.lr.
  PpoConfig ppo = [] {
    PpoConfig p;
    p.lr = 1e-3;
    return p;
  }();
  IrlSettings irl;
  SuiteSettings suite;
  IoSettings io;

  void validate() const;
  // Applies the obstacle-task geometry, horizon and demo count.
  void select_task(const std::string& task);
  // 5M steps (open) or 15M train / 5M eval (obstacle).
  void apply_full_scale();
  StartDistribution train_distribution() const;
  StartDistribution test_distribution() const;
  // Policy learning rate used while the algorithm learns its reward.
  double train_policy_lr(Algo algo) const;
};

// INI-style text: [section] headers, key = value, '#' comments. Unknown
// sections or keys are rejected with the line number. env.task resets the
// task-dependent fields, so it is expected before any override.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Fully resolved config in the same format; parse_config(serialize_config(c))
// reproduces c.
std::string serialize_config(const RunConfig& config);
// Hash of the resolved config without the [io] section.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace mirl

#endif  // MIRL_CONFIG_HPP_
