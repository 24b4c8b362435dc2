#include "mirl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "mirl/bc.hpp"
#include "mirl/bcirl.hpp"
#include "mirl/error.hpp"
#include "mirl/gcl.hpp"
#include "mirl/maxent.hpp"

#ifndef MIRL_VERSION
#define MIRL_VERSION "0.0.0"
#endif

namespace mirl {
namespace {

int phase_index(Phase phase) { return static_cast<int>(phase); }

MetricRow make_row(Algo algo, Phase phase, std::uint64_t seed) {
  MetricRow row;
  row.algo = to_string(algo);
  row.phase = to_string(phase);
  row.seed = seed;
  return row;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

MetricRow evaluated_row(const RunConfig& config, Algo algo, Phase phase, std::uint64_t seed,
                        const GaussianPolicy& policy, const StartDistribution& dist,
                        std::size_t env_steps) {
  Rng rng = derive_stream(seed, Stream::kEvaluation, phase_index(phase));
  const EvalResult ev =
      evaluate_policy(policy, config.env.config, dist, config.suite.n_eval_episodes, rng);
  MetricRow row = make_row(algo, phase, seed);
  row.mean_final_distance = ev.mean;
  row.stderr_value = ev.std_error;
  row.env_steps = env_steps;
  return row;
}

PpoConfig with_lr(PpoConfig ppo, double lr) {
  ppo.lr = lr;
  return ppo;
}

std::vector<CurveRow> ppo_curve(const PpoRun& run) {
  std::vector<CurveRow> out;
  for (const CurvePoint& p : run.curve) {
    out.push_back({p.iteration, p.env_steps, p.value, p.mean_final_distance});
  }
  return out;
}

std::string ckpt_name(Algo algo, std::uint64_t seed, const std::string& what) {
  return to_string(algo) + "_s" + std::to_string(seed) + "_" + what + ".ckpt";
}

}  // namespace

std::string version_string() { return MIRL_VERSION; }

std::string format_metric_row(const MetricRow& row) {
  std::ostringstream out;
  out << row.algo << ',' << row.phase << ',' << row.seed << ',';
  if (row.available) {
    out << format_double(row.mean_final_distance) << ',' << format_double(row.stderr_value);
  } else {
    out << "NA,NA";
  }
  out << ',' << row.env_steps << ',' << format_double(row.wall_time_s);
  return out.str();
}

std::string format_metrics_csv(std::vector<MetricRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.algo, a.phase, a.seed) < std::tie(b.algo, b.phase, b.seed);
  });
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricRow& r : rows) out += format_metric_row(r) + "\n";
  return out;
}

RewardFn LearnedReward::reward_fn(const PointMassConfig& env) const {
  if (state_reward) return mirl::state_reward(*state_reward);
  if (gail) return gail_step_reward(*gail, env);
  throw ConfigError("eval: algorithm " + to_string(algo) + " has no learned reward");
}

DemoSet demos_for_seed(const RunConfig& config, std::uint64_t seed) {
  if (!config.io.demo_path.empty()) return read_demos(config.io.demo_path);
  Rng rng = derive_stream(seed, Stream::kDemos);
  return generate_demos(config.env.config, config.env.n_demos, rng);
}

TrainOutcome run_train(const RunConfig& config, Algo algo, std::uint64_t seed,
                       const DemoSet& demos) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const PointMassConfig& env = config.env.config;
  const StartDistribution dist = config.train_distribution();
  const PpoConfig ppo = with_lr(config.ppo, config.train_policy_lr(algo));
  const std::size_t budget = config.suite.train_budget;
  const IrlSettings& irl = config.irl;
  TrainOutcome out;
  out.reward.algo = algo;
  std::size_t env_steps = 0;
  switch (algo) {
    case Algo::kBcIrl: {
      BcIrlConfig bc = irl.bcirl;
      bc.reward_hidden = irl.reward_hidden;
      bc.reward_init_scale = irl.reward_init_scale;
      BcIrlResult r = bcirl_train(env, dist, demos, bc, ppo, budget, seed);
      for (const BcIrlCurvePoint& p : r.curve) {
        out.curve.push_back({p.iteration, p.env_steps, p.bc_loss, p.mean_final_distance});
      }
      out.reward.state_reward = std::move(r.reward_net);
      out.policy = std::move(r.policy);
      env_steps = r.env_steps;
      break;
    }
    case Algo::kAirl: {
      AirlRun r = airl_train(env, dist, demos, irl.airl, ppo, irl.reward_hidden,
                             irl.reward_init_scale, budget, seed);
      out.curve = ppo_curve(r.ppo);
      out.reward.state_reward = std::move(r.disc.g);
      out.policy = std::move(r.ppo.policy);
      env_steps = r.ppo.env_steps;
      break;
    }
    case Algo::kGcl: {
      IrlRun r = gcl_train(env, dist, demos, irl.gcl, ppo, irl.reward_hidden,
                           irl.reward_init_scale, budget, seed);
      out.curve = ppo_curve(r.ppo);
      out.reward.state_reward = std::move(r.reward_net);
      out.policy = std::move(r.ppo.policy);
      env_steps = r.ppo.env_steps;
      break;
    }
    case Algo::kMaxEnt: {
      MaxEntResult r = maxent_train(env, dist, demos, irl.maxent, irl.reward_hidden,
                                    irl.reward_init_scale, seed);
      for (std::size_t i = 0; i < r.losses.size(); ++i) {
        out.curve.push_back({i, 0, r.losses[i], 0.0});
      }
      out.reward.state_reward = std::move(r.reward_net);
      break;
    }
    case Algo::kGail: {
      GailRun r = gail_train(env, dist, demos, irl.gail, ppo, irl.reward_hidden,
                             irl.reward_init_scale, budget, seed);
      out.curve = ppo_curve(r.ppo);
      out.reward.gail = std::move(r.disc);
      out.policy = std::move(r.ppo.policy);
      env_steps = r.ppo.env_steps;
      break;
    }
    case Algo::kBc: {
      BcRun r = bc_baseline(demos, irl.bc, ppo, seed);
      for (std::size_t i = 0; i < r.losses.size(); ++i) {
        out.curve.push_back({i, 0, r.losses[i], 0.0});
      }
      out.policy = std::move(r.policy);
      break;
    }
  }
  if (out.policy) {
    out.row = evaluated_row(config, algo, Phase::kTrain, seed, *out.policy, dist, env_steps);
  } else {
    out.row = make_row(algo, Phase::kTrain, seed);
    out.row.available = false;
    out.row.env_steps = env_steps;
  }
  if (config.suite.record_wall_time) out.row.wall_time_s = seconds_since(start);
  return out;
}

EvalOutcome run_eval(const RunConfig& config, const LearnedReward& reward, Phase phase,
                     std::uint64_t seed) {
  config.validate();
  if (phase == Phase::kTrain) throw ConfigError("eval: the train phase is not an eval phase");
  const auto start = std::chrono::steady_clock::now();
  const RewardFn fn = reward.reward_fn(config.env.config);
  const StartDistribution dist =
      phase == Phase::kEvalTrain ? config.train_distribution() : config.test_distribution();
  PpoRun run = train_ppo(config.env.config, dist, fn, config.ppo, config.suite.eval_budget, seed);
  EvalOutcome out{evaluated_row(config, reward.algo, phase, seed, run.policy, dist, run.env_steps),
                  make_policy(config.ppo, seed), std::move(run.policy)};
  if (config.suite.record_wall_time) out.row.wall_time_s = seconds_since(start);
  return out;
}

Vec2 RewardField::argmax() const {
  const auto it = std::max_element(values.begin(), values.end());
  const std::size_t k = static_cast<std::size_t>(it - values.begin());
  return {xs[k / resolution], ys[k % resolution]};
}

RewardField export_reward_field(const Mlp& reward_net, int resolution, double half_extent) {
  if (resolution < 2) throw ConfigError("field: resolution must be at least 2");
  RewardField f;
  f.resolution = resolution;
  f.half_extent = half_extent;
  const double step = 2.0 * half_extent / (resolution - 1);
  for (int i = 0; i < resolution; ++i) {
    f.xs.push_back(-half_extent + i * step);
    f.ys.push_back(-half_extent + i * step);
  }
  f.values.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double v = reward_net.forward_scalar(Vec2{f.xs[i], f.ys[j]});
      if (!std::isfinite(v)) throw NumericError("field: non-finite reward");
      f.values.push_back(v);
    }
  }
  f.min = *std::min_element(f.values.begin(), f.values.end());
  f.max = *std::max_element(f.values.begin(), f.values.end());
  return f;
}

std::string field_csv(const RewardField& field) {
  std::string out = "x,y,reward\n";
  for (int i = 0; i < field.resolution; ++i) {
    for (int j = 0; j < field.resolution; ++j) {
      out += format_double(field.xs[i]) + "," + format_double(field.ys[j]) + "," +
             format_double(field.at(i, j)) + "\n";
    }
  }
  return out;
}

std::string field_pgm(const RewardField& field, bool* degenerate) {
  const bool flat = !(field.max > field.min);
  if (degenerate) *degenerate = flat;
  std::ostringstream out;
  out << "P2\n" << field.resolution << ' ' << field.resolution << "\n255\n";
  for (int row = 0; row < field.resolution; ++row) {
    const int j = field.resolution - 1 - row;
    for (int i = 0; i < field.resolution; ++i) {
      int px = 127;
      if (!flat) {
        px = static_cast<int>(
            std::lround(255.0 * (field.at(i, j) - field.min) / (field.max - field.min)));
      }
      out << px << (i + 1 < field.resolution ? ' ' : '\n');
    }
  }
  return out.str();
}

double radial_decrease_fraction(const std::function<double(const Vec2&)>& reward,
                                const Vec2& center, int n_rays, double r_min, double r_max,
                                int n_radii) {
  if (n_rays < 1 || n_radii < 2) throw ConfigError("field: need rays and at least two radii");
  int decreasing = 0;
  for (int k = 0; k < n_rays; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / n_rays;
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    bool ok = true;
    double prev = 0.0;
    for (int m = 0; m < n_radii; ++m) {
      const double r = r_min + (r_max - r_min) * m / (n_radii - 1);
      const double v = reward(center + r * dir);
      if (m > 0 && v > prev) {
        ok = false;
        break;
      }
      prev = v;
    }
    if (ok) ++decreasing;
  }
  return static_cast<double>(decreasing) / n_rays;
}

std::vector<SuiteSummaryRow> summarize(const std::vector<MetricRow>& rows) {
  std::vector<SuiteSummaryRow> out;
  std::vector<MetricRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.algo, a.phase, a.seed) < std::tie(b.algo, b.phase, b.seed);
  });
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::vector<double> means;
    while (j < sorted.size() && sorted[j].algo == sorted[i].algo &&
           sorted[j].phase == sorted[i].phase) {
      if (sorted[j].available) means.push_back(sorted[j].mean_final_distance);
      ++j;
    }
    SuiteSummaryRow s{sorted[i].algo, sorted[i].phase, means.size(), !means.empty()};
    if (!means.empty()) {
      s.mean = mean_of(means);
      if (means.size() > 1) {
        double ss = 0.0;
        for (double m : means) ss += (m - s.mean) * (m - s.mean);
        s.stderr_value = std::sqrt(ss / (means.size() - 1)) / std::sqrt(double(means.size()));
      }
    }
    out.push_back(s);
    i = j;
  }
  return out;
}

std::string format_summary_csv(const std::vector<SuiteSummaryRow>& rows) {
  std::string out = "algo,phase,n_seeds,mean_final_distance,stderr\n";
  for (const SuiteSummaryRow& r : rows) {
    out += r.algo + "," + r.phase + "," + std::to_string(r.n) + ",";
    out += r.available ? format_double(r.mean) + "," + format_double(r.stderr_value) : "NA,NA";
    out += "\n";
  }
  return out;
}

namespace {

struct UnitResult {
  std::vector<MetricRow> rows;
  std::vector<std::string> curve_lines;
  nlohmann::json cells = nlohmann::json::array();
  std::vector<std::string> failures;
};

UnitResult run_unit(const RunConfig& config, Algo algo, std::uint64_t seed,
                    const std::filesystem::path& out_dir) {
  UnitResult u;
  const std::uint64_t hash = config_hash(config);
  const std::filesystem::path ckpt_dir = out_dir / "checkpoints";
  const std::filesystem::path field_dir = out_dir / "fields";
  const auto& phases = config.suite.phases;
  auto wants = [&](Phase p) { return std::find(phases.begin(), phases.end(), p) != phases.end(); };
  auto failed_row = [&](Phase p, const std::string& what) {
    MetricRow row = make_row(algo, p, seed);
    row.available = false;
    row.error = what;
    u.failures.push_back(to_string(algo) + "/" + to_string(p) + "/seed " +
                         std::to_string(seed) + ": " + what);
    return row;
  };
  std::cerr << "[suite] " << to_string(algo) << " seed " << seed << ": train\n";
  TrainOutcome train;
  try {
    train = run_train(config, algo, seed, demos_for_seed(config, seed));
  } catch (const std::exception& e) {
    for (Phase p : phases) u.rows.push_back(failed_row(p, e.what()));
    return u;
  }
  nlohmann::json cell = {{"algo", to_string(algo)}, {"phase", "train"}, {"seed", seed}};
  if (train.reward.state_reward) {
    const std::string name = ckpt_name(algo, seed, "reward");
    save_checkpoint(ckpt_dir / name, to_checkpoint(*train.reward.state_reward, hash));
    cell["reward_checkpoint"] = "checkpoints/" + name;
    const RewardField field = export_reward_field(*train.reward.state_reward,
                                                  config.suite.field_resolution,
                                                  config.env.config.arena_half_extent);
    const std::string stem = to_string(algo) + "_s" + std::to_string(seed);
    write_text_file(field_dir / (stem + ".csv"), field_csv(field));
    bool degenerate = false;
    write_text_file(field_dir / (stem + ".pgm"), field_pgm(field, &degenerate));
    if (degenerate) std::cerr << "[suite] warning: flat reward field for " << stem << "\n";
    cell["field"] = "fields/" + stem + ".pgm";
  }
  if (train.reward.gail) {
    const std::string name = ckpt_name(algo, seed, "discriminator");
    save_checkpoint(ckpt_dir / name, to_checkpoint(train.reward.gail->net, hash));
    cell["reward_checkpoint"] = "checkpoints/" + name;
  }
  if (train.policy) {
    const std::string name = ckpt_name(algo, seed, "policy");
    save_checkpoint(ckpt_dir / name, to_checkpoint(*train.policy, hash));
    cell["policy_checkpoint"] = "checkpoints/" + name;
  }
  for (const CurveRow& c : train.curve) {
    u.curve_lines.push_back(to_string(algo) + "," + std::to_string(seed) + "," +
                            std::to_string(c.iteration) + "," + std::to_string(c.env_steps) +
                            "," + format_double(c.loss) + "," +
                            format_double(c.mean_final_distance));
  }
  if (wants(Phase::kTrain)) {
    u.rows.push_back(train.row);
    u.cells.push_back(cell);
  }
  for (Phase p : {Phase::kEvalTrain, Phase::kEvalTest}) {
    if (!wants(p)) continue;
    if (train.reward.empty()) {
      MetricRow row = make_row(algo, p, seed);
      row.available = false;
      u.rows.push_back(row);
      continue;
    }
    std::cerr << "[suite] " << to_string(algo) << " seed " << seed << ": " << to_string(p)
              << "\n";
    try {
      EvalOutcome ev = run_eval(config, train.reward, p, seed);
      const std::string name = ckpt_name(algo, seed, to_string(p) + "_policy");
      save_checkpoint(ckpt_dir / name, to_checkpoint(ev.policy, hash));
      u.rows.push_back(ev.row);
      u.cells.push_back({{"algo", to_string(algo)},
                         {"phase", to_string(p)},
                         {"seed", seed},
                         {"policy_checkpoint", "checkpoints/" + name}});
    } catch (const std::exception& e) {
      u.rows.push_back(failed_row(p, e.what()));
    }
  }
  return u;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

}  // namespace

SuiteResult run_suite(const RunConfig& config, const std::filesystem::path& out_dir, int jobs) {
  config.validate();
  if (jobs < 1) throw ConfigError("suite: jobs must be at least 1");
  std::filesystem::create_directories(out_dir / "checkpoints");
  std::filesystem::create_directories(out_dir / "fields");
  write_text_file(out_dir / "config.ini", serialize_config(config));

  std::vector<std::pair<Algo, std::uint64_t>> units;
  for (Algo a : config.suite.algos) {
    for (std::uint64_t s : config.suite.seeds) units.emplace_back(a, s);
  }
  std::vector<UnitResult> results(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < units.size(); k = next++) {
      results[k] = run_unit(config, units[k].first, units[k].second, out_dir);
    }
  };
  const int n_threads = std::min<int>(jobs, static_cast<int>(units.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  SuiteResult suite;
  std::string curves = "algo,seed,iteration,env_steps,loss,mean_final_distance\n";
  nlohmann::json cells = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const UnitResult& u : results) {
    suite.rows.insert(suite.rows.end(), u.rows.begin(), u.rows.end());
    for (const auto& line : u.curve_lines) curves += line + "\n";
    for (const auto& c : u.cells) cells.push_back(c);
    for (const auto& f : u.failures) failures.push_back(f);
  }
  suite.failures = failures.size();
  suite.summary = summarize(suite.rows);
  write_text_file(out_dir / "metrics.csv", format_metrics_csv(suite.rows));
  write_text_file(out_dir / "summary.csv", format_summary_csv(suite.summary));
  write_text_file(out_dir / "curves.csv", curves);

  nlohmann::json manifest;
  manifest["version"] = version_string();
  manifest["config_hash"] = hex64(config_hash(config));
  manifest["config"] = "config.ini";
  manifest["seeds"] = config.suite.seeds;
  std::vector<std::string> algos, phases;
  for (Algo a : config.suite.algos) algos.push_back(to_string(a));
  for (Phase p : config.suite.phases) phases.push_back(to_string(p));
  manifest["algos"] = algos;
  manifest["phases"] = phases;
  manifest["seed_streams"] = "stream seed = seed XOR purpose tag + index (xoshiro256**)";
  manifest["rerun"] = "mirl train --config config.ini --algo <algo> --seed <seed> --out <dir>";
  manifest["cells"] = cells;
  manifest["failures"] = failures;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return suite;
}

}  // namespace mirl
