#ifndef MIRL_HARNESS_HPP_
#define MIRL_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mirl/adversarial.hpp"
#include "mirl/config.hpp"
#include "mirl/env.hpp"
#include "mirl/io.hpp"
#include "mirl/net.hpp"

namespace mirl {

struct MetricRow {
  std::string algo;
  std::string phase;
  std::uint64_t seed = 0;
  bool available = true;  // false renders NA
  double mean_final_distance = 0.0;
  double stderr_value = 0.0;  // over evaluation episodes
  std::size_t env_steps = 0;
  double wall_time_s = 0.0;
  std::string error;
};

inline constexpr const char* kMetricsHeader =
    "algo,phase,seed,mean_final_distance,stderr,env_steps,wall_time_s";

std::string format_metric_row(const MetricRow& row);
// Sorted by (algo, phase, seed).
std::string format_metrics_csv(std::vector<MetricRow> rows);

// Learned reward in a form the eval phases can train against.
struct LearnedReward {
  Algo algo = Algo::kBcIrl;
  std::optional<Mlp> state_reward;          // R(s')
  std::optional<GailDiscriminator> gail;    // reward on (s, a)

  bool empty() const { return !state_reward && !gail; }
  RewardFn reward_fn(const PointMassConfig& env) const;
};

struct CurveRow {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double loss = 0.0;
  double mean_final_distance = 0.0;
};

struct TrainOutcome {
  MetricRow row;
  LearnedReward reward;
  std::optional<GaussianPolicy> policy;
  std::vector<CurveRow> curve;
};

DemoSet demos_for_seed(const RunConfig& config, std::uint64_t seed);

// Reward learning on the train distribution, then deterministic evaluation
// of the learned policy there (NA for MaxEnt, which learns no policy).
TrainOutcome run_train(const RunConfig& config, Algo algo, std::uint64_t seed,
                       const DemoSet& demos);

struct EvalOutcome {
  MetricRow row;
  GaussianPolicy initial_policy;
  GaussianPolicy policy;
};

// Fresh PPO policy trained on the frozen reward from the phase's start
// distribution, evaluated with mean actions.
EvalOutcome run_eval(const RunConfig& config, const LearnedReward& reward, Phase phase,
                     std::uint64_t seed);

struct RewardField {
  int resolution = 0;
  double half_extent = 1.5;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> values;  // values[i * resolution + j] at (xs[i], ys[j])
  double min = 0.0;
  double max = 0.0;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * resolution + j]; }
  Vec2 argmax() const;
};

RewardField export_reward_field(const Mlp& reward_net, int resolution, double half_extent);
std::string field_csv(const RewardField& field);
// ASCII P2, maxval 255, row 0 at the top of the arena. A flat field maps
// to 127 and sets *degenerate.
std::string field_pgm(const RewardField& field, bool* degenerate = nullptr);

// Fraction of rays from the center along which the reward never increases
// between consecutive radii.
double radial_decrease_fraction(const std::function<double(const Vec2&)>& reward,
                                const Vec2& center, int n_rays, double r_min, double r_max,
                                int n_radii);

struct SuiteSummaryRow {
  std::string algo;
  std::string phase;
  std::size_t n = 0;
  bool available = false;
  double mean = 0.0;
  double stderr_value = 0.0;  // sample std of per-seed means / sqrt(n)
};

std::vector<SuiteSummaryRow> summarize(const std::vector<MetricRow>& rows);
std::string format_summary_csv(const std::vector<SuiteSummaryRow>& rows);

struct SuiteResult {
  std::vector<MetricRow> rows;
  std::vector<SuiteSummaryRow> summary;
  std::size_t failures = 0;
};

// Runs every (algo, phase, seed) cell. A failing cell is recorded as NA and
// the suite continues. Outputs: config.ini, manifest.json, metrics.csv,
// summary.csv, curves.csv, checkpoints/, fields/.
SuiteResult run_suite(const RunConfig& config, const std::filesystem::path& out_dir,
                      int jobs = 1);

std::string version_string();

}  // namespace mirl

#endif  // MIRL_HARNESS_HPP_
