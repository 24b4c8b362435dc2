#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mirl/config.hpp"
#include "mirl/error.hpp"
#include "mirl/harness.hpp"
#include "mirl/io.hpp"

namespace fs = std::filesystem;
using namespace mirl;

namespace {

// --out, then MIRL_OUT, then the config's io.out_dir.
fs::path resolve_out(const std::string& flag, const RunConfig& config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MIRL_OUT"); env && *env) return env;
  return config.io.out_dir;
}

RunConfig config_from(const std::string& path) {
  RunConfig config = path.empty() ? RunConfig{} : load_config(path);
  config.validate();
  return config;
}

LearnedReward reward_from_checkpoint(const fs::path& path, Algo algo) {
  const Checkpoint ckpt = load_checkpoint(path);
  const Mlp net = mlp_from_checkpoint(ckpt);
  LearnedReward reward;
  reward.algo = algo;
  if (net.spec().in_dim == 2 && net.spec().out_dim == 1) {
    reward.state_reward = net;
  } else if (net.spec().in_dim == 4 && net.spec().out_dim == 1) {
    reward.gail = GailDiscriminator{net};
  } else {
    throw ConfigError("checkpoint " + path.string() + " is not a reward network");
  }
  return reward;
}

void write_run_files(const fs::path& out, const RunConfig& config,
                     const std::vector<MetricRow>& rows, const std::string& command) {
  write_text_file(out / "config.ini", serialize_config(config));
  write_text_file(out / "metrics.csv", format_metrics_csv(rows));
  std::string manifest = "{\n  \"version\": \"" + version_string() + "\",\n  \"command\": \"" +
                         command + "\",\n  \"config\": \"config.ini\"\n}\n";
  write_text_file(out / "manifest.json", manifest);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse reinforcement learning on point-mass navigation"};
  app.require_subcommand(1);

  std::string config_path, out, algo_name = "bcirl", reward_path, phase_name = "eval_test";
  std::size_t n_demos = 0;
  std::uint64_t seed = 0;
  int resolution = 101;
  int jobs = 1;
  bool full_scale = false;

  auto* gen = app.add_subcommand("gen-demos", "Write scripted expert demonstrations");
  gen->add_option("--config", config_path, "Config file");
  gen->add_option("--n", n_demos, "Number of demonstrations (default from config)");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", out, "Demo CSV path")->required();

  auto* train = app.add_subcommand("train", "Learn a reward (and policy) for one seed");
  train->add_option("--config", config_path, "Config file");
  train->add_option("--algo", algo_name, "bcirl|airl|gcl|maxent|gail|bc");
  train->add_option("--seed", seed, "Seed");
  train->add_option("--out", out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Train a fresh policy on a frozen reward");
  eval->add_option("--config", config_path, "Config file");
  eval->add_option("--reward", reward_path, "Reward checkpoint")->required();
  eval->add_option("--phase", phase_name, "eval_train|eval_test");
  eval->add_option("--seed", seed, "Seed");
  eval->add_option("--algo", algo_name, "Algorithm label for the metric row");
  eval->add_option("--out", out, "Output directory for metrics and the policy checkpoint");

  auto* field = app.add_subcommand("export-field", "Export a reward field as CSV and PGM");
  field->add_option("--reward", reward_path, "Reward checkpoint")->required();
  field->add_option("--out", out, "Output path stem")->required();
  field->add_option("--resolution", resolution, "Cells per axis");
  field->add_option("--config", config_path, "Config file (arena extent)");

  auto* suite = app.add_subcommand("suite", "Run every (algo, phase, seed) cell");
  suite->add_option("--config", config_path, "Config file");
  suite->add_option("--out", out, "Output directory");
  suite->add_flag("--paper-scale", full_scale, "Use the full-length budgets");
  suite->add_option("--jobs", jobs, "Parallel cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      RunConfig config = config_from(config_path);
      if (n_demos > 0) config.env.n_demos = n_demos;
      Rng rng = derive_stream(seed, Stream::kDemos);
      write_demos(fs::path(out), generate_demos(config.env.config, config.env.n_demos, rng));
      std::cout << "wrote " << config.env.n_demos << " demonstrations to " << out << "\n";
    } else if (*train) {
      const RunConfig config = config_from(config_path);
      const Algo algo = parse_algo(algo_name);
      const fs::path dir = resolve_out(out, config);
      const TrainOutcome result = run_train(config, algo, seed, demos_for_seed(config, seed));
      const std::uint64_t hash = config_hash(config);
      fs::create_directories(dir);
      if (result.reward.state_reward) {
        save_checkpoint(dir / "reward.ckpt", to_checkpoint(*result.reward.state_reward, hash));
      }
      if (result.reward.gail) {
        save_checkpoint(dir / "reward.ckpt", to_checkpoint(result.reward.gail->net, hash));
      }
      if (result.policy) save_checkpoint(dir / "policy.ckpt", to_checkpoint(*result.policy, hash));
      write_run_files(dir, config, {result.row},
                      "train --algo " + algo_name + " --seed " + std::to_string(seed));
      std::cout << kMetricsHeader << "\n" << format_metric_row(result.row) << "\n";
    } else if (*eval) {
      const RunConfig config = config_from(config_path);
      const Phase phase = parse_phase(phase_name);
      const EvalOutcome result =
          run_eval(config, reward_from_checkpoint(reward_path, parse_algo(algo_name)), phase, seed);
      if (!out.empty() || std::getenv("MIRL_OUT")) {
        const fs::path dir = resolve_out(out, config);
        fs::create_directories(dir);
        save_checkpoint(dir / (phase_name + "_policy.ckpt"),
                        to_checkpoint(result.policy, config_hash(config)));
        write_run_files(dir, config, {result.row},
                        "eval --phase " + phase_name + " --seed " + std::to_string(seed));
      }
      std::cout << kMetricsHeader << "\n" << format_metric_row(result.row) << "\n";
    } else if (*field) {
      const RunConfig config = config_from(config_path);
      const LearnedReward reward = reward_from_checkpoint(reward_path, Algo::kBcIrl);
      if (!reward.state_reward) throw ConfigError("export-field needs a state reward checkpoint");
      const RewardField f = export_reward_field(*reward.state_reward, resolution,
                                                config.env.config.arena_half_extent);
      fs::path stem(out);
      if (stem.extension() == ".csv" || stem.extension() == ".pgm") stem.replace_extension();
      write_text_file(stem.string() + ".csv", field_csv(f));
      bool degenerate = false;
      write_text_file(stem.string() + ".pgm", field_pgm(f, &degenerate));
      if (degenerate) std::cerr << "warning: flat reward field, image is uniform gray\n";
      const Vec2 peak = f.argmax();
      std::cout << "argmax " << format_double(peak[0]) << " " << format_double(peak[1])
                << " min " << format_double(f.min) << " max " << format_double(f.max) << "\n";
    } else if (*suite) {
      RunConfig config = config_from(config_path);
      if (full_scale) config.apply_full_scale();
      const fs::path dir = resolve_out(out, config);
      const SuiteResult result = run_suite(config, dir, jobs);
      std::cout << format_summary_csv(result.summary);
      if (result.failures > 0) {
        std::cerr << result.failures << " cell(s) failed; see " << (dir / "manifest.json") << "\n";
      }
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
