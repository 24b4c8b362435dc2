#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>

#include "mirl/config.hpp"
#include "mirl/error.hpp"
#include "mirl/harness.hpp"
#include "mirl/io.hpp"
#include "test_util.hpp"

namespace mirl {
namespace {

namespace fs = std::filesystem;

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

MetricRow row(const std::string& algo, const std::string& phase, std::uint64_t seed) {
  MetricRow r;
  r.algo = algo;
  r.phase = phase;
  r.seed = seed;
  return r;
}

RunConfig tiny_config() {
  RunConfig c;
  c.ppo.batch_size = 256;
  c.ppo.hidden_dim = 8;
  c.irl.reward_hidden = 8;
  c.irl.maxent.iterations = 3;
  c.irl.maxent.cells_per_axis = 11;
  c.irl.bc.epochs = 5;
  c.suite.train_budget = 512;
  c.suite.eval_budget = 512;
  c.suite.n_eval_episodes = 4;
  c.suite.field_resolution = 5;
  c.suite.seeds = {0};
  return c;
}

TEST(RewardField, GridLayoutAndCsv) {
  Rng rng(1);
  const Mlp net = Mlp::initialized(MlpSpec{2, 4, 1}, rng);
  const RewardField f = export_reward_field(net, 7, 1.5);
  EXPECT_EQ(f.values.size(), 49u);
  EXPECT_EQ(f.xs.front(), -1.5);
  EXPECT_EQ(f.xs.back(), 1.5);
  EXPECT_EQ(f.at(2, 5), net.forward_scalar(Vec2{f.xs[2], f.ys[5]}));
  const std::string csv = field_csv(f);
  EXPECT_EQ(count_lines(csv), 1u + 49u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,y,reward");
  EXPECT_THROW(export_reward_field(net, 1, 1.5), ConfigError);
}

TEST(RewardField, ArgmaxOfMonotoneField) {
  // R = -tanh(x - 0.5).
  Mlp net(MlpSpec{2, 1, 1});
  auto p = net.params();
  p[0] = 1.0;   // w1 x
  p[2] = -0.5;  // b1
  p[3] = -1.0;  // w2
  const RewardField f = export_reward_field(net, 61, 1.5);
  const Vec2 peak = f.argmax();
  EXPECT_NEAR(peak[0], -1.5, 1e-12);
  EXPECT_EQ(f.max, net.forward_scalar(Vec2{-1.5, 0.0}));
}

TEST(RewardField, ConstantNetGivesGrayImage) {
  Mlp net(MlpSpec{2, 3, 1});
  net.params()[net.spec().param_count() - 1] = 0.7;
  const RewardField f = export_reward_field(net, 4, 1.5);
  bool degenerate = false;
  const std::string pgm = field_pgm(f, &degenerate);
  EXPECT_TRUE(degenerate);
  std::istringstream in(pgm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 4);
  EXPECT_EQ(h, 4);
  EXPECT_EQ(maxval, 255);
  int px = 0, n = 0;
  while (in >> px) {
    EXPECT_EQ(px, 127);
    ++n;
  }
  EXPECT_EQ(n, 16);
}

TEST(RewardField, PgmTopRowIsLargestY) {
  Mlp net(MlpSpec{2, 1, 1});
  auto p = net.params();
  p[1] = 0.5;  // hidden unit reads y
  p[3] = 1.0;
  const RewardField f = export_reward_field(net, 3, 1.5);
  bool degenerate = true;
  std::istringstream in(field_pgm(f, &degenerate));
  EXPECT_FALSE(degenerate);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  int first = -1;
  in >> first;
  EXPECT_EQ(first, 255);
}

TEST(RadialDecrease, BowlAndRidge) {
  auto bowl = [](const Vec2& s) { return -norm(s); };
  EXPECT_EQ(radial_decrease_fraction(bowl, {0.0, 0.0}, 36, 0.05, 1.4, 20), 1.0);
  auto ridge = [](const Vec2& s) { return s[0]; };
  const double frac = radial_decrease_fraction(ridge, {0.0, 0.0}, 36, 0.05, 1.4, 20);
  EXPECT_GT(frac, 0.4);
  EXPECT_LT(frac, 0.6);
}

TEST(Metrics, RowFormatting) {
  MetricRow r{"bcirl", "eval_test", 2, true, 0.125, 0.01, 1000, 0.0, ""};
  EXPECT_EQ(format_metric_row(r), "bcirl,eval_test,2,0.125,0.01,1000,0");
  r.available = false;
  EXPECT_EQ(format_metric_row(r), "bcirl,eval_test,2,NA,NA,1000,0");
}

TEST(Metrics, CsvSortedByAlgoPhaseSeed) {
  std::vector<MetricRow> rows{row("gcl", "train", 1), row("airl", "train", 2), row("airl", "train", 0)};
  const std::string csv = format_metrics_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("airl,train,0,", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("airl,train,2,", 0), 0u);
}

TEST(Summary, MeanAndStandardError) {
  std::vector<MetricRow> rows;
  for (std::uint64_t s = 0; s < 3; ++s) {
    MetricRow r = row("bcirl", "eval_test", s);
    r.mean_final_distance = 0.1 * (s + 1);
    rows.push_back(r);
  }
  MetricRow na = row("maxent", "train", 0);
  na.available = false;
  rows.push_back(na);
  const auto summary = summarize(rows);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0].algo, "bcirl");
  EXPECT_EQ(summary[0].n, 3u);
  EXPECT_NEAR(summary[0].mean, 0.2, 1e-15);
  EXPECT_NEAR(summary[0].stderr_value, 0.1 / std::sqrt(3.0), 1e-15);
  EXPECT_FALSE(summary[1].available);
  const std::string csv = format_summary_csv(summary);
  EXPECT_NE(csv.find("maxent,train,0,NA,NA"), std::string::npos);
}

TEST(Summary, SingleSeedHasZeroStderr) {
  MetricRow r = row("airl", "train", 0);
  r.mean_final_distance = 0.3;
  const auto summary = summarize({r});
  EXPECT_EQ(summary[0].stderr_value, 0.0);
}

TEST(Demos, SeedStreamAndFile) {
  const RunConfig c;
  const DemoSet a = demos_for_seed(c, 3);
  const DemoSet b = demos_for_seed(c, 3);
  EXPECT_EQ(a.trajectories[1].states, b.trajectories[1].states);
  const fs::path dir = fs::temp_directory_path() / "mirl_test_demos";
  fs::create_directories(dir);
  write_demos(dir / "d.csv", a);
  RunConfig d = c;
  d.io.demo_path = (dir / "d.csv").string();
  EXPECT_EQ(demos_for_seed(d, 99).trajectories[2].states, a.trajectories[2].states);
}

TEST(RunTrain, MaxEntHasNoTrainMetric) {
  const RunConfig c = tiny_config();
  const TrainOutcome t = run_train(c, Algo::kMaxEnt, 0, demos_for_seed(c, 0));
  EXPECT_FALSE(t.row.available);
  EXPECT_TRUE(t.reward.state_reward.has_value());
  EXPECT_FALSE(t.policy.has_value());
}

TEST(RunEval, TrainPhaseRejectedAndBcHasNoReward) {
  const RunConfig c = tiny_config();
  LearnedReward r;
  r.algo = Algo::kBc;
  EXPECT_THROW(run_eval(c, r, Phase::kEvalTest, 0), ConfigError);
  r.state_reward = Mlp(MlpSpec{2, 3, 1});
  EXPECT_THROW(run_eval(c, r, Phase::kTrain, 0), ConfigError);
}

TEST(RunTrain, Deterministic) {
  const RunConfig c = tiny_config();
  const auto a = run_train(c, Algo::kBcIrl, 1, demos_for_seed(c, 1));
  const auto b = run_train(c, Algo::kBcIrl, 1, demos_for_seed(c, 1));
  EXPECT_EQ(format_metric_row(a.row), format_metric_row(b.row));
  EXPECT_EQ(encode_checkpoint(to_checkpoint(*a.reward.state_reward, 0)),
            encode_checkpoint(to_checkpoint(*b.reward.state_reward, 0)));
}

TEST(Suite, OneCellWritesOutputs) {
  RunConfig c = tiny_config();
  c.suite.algos = {Algo::kGcl};
  c.suite.phases = {Phase::kEvalTest};
  const fs::path dir = fs::temp_directory_path() / "mirl_test_suite";
  fs::remove_all(dir);
  const SuiteResult r = run_suite(c, dir);
  EXPECT_EQ(r.failures, 0u);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].phase, "eval_test");
  for (const char* f :
       {"config.ini", "manifest.json", "metrics.csv", "summary.csv", "curves.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(count_lines(read_text_file(dir / "metrics.csv")), 2u);
  EXPECT_EQ(count_lines(read_text_file(dir / "summary.csv")), 2u);
  EXPECT_TRUE(fs::exists(dir / "fields" / "gcl_s0.pgm"));
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "gcl_s0_reward.ckpt"));
  EXPECT_EQ(parse_config(read_text_file(dir / "config.ini")).suite.train_budget, 512u);
}

TEST(Suite, AllAlgorithmsRunAtTinyScale) {
  RunConfig c = tiny_config();
  c.suite.algos = {Algo::kBcIrl, Algo::kAirl, Algo::kGcl, Algo::kMaxEnt, Algo::kGail, Algo::kBc};
  const fs::path dir = fs::temp_directory_path() / "mirl_test_suite_all";
  fs::remove_all(dir);
  const SuiteResult r = run_suite(c, dir);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.rows.size(), 18u);
  for (const MetricRow& row : r.rows) {
    const bool na = (row.algo == "maxent" && row.phase == "train") ||
                    (row.algo == "bc" && row.phase != "train");
    EXPECT_EQ(row.available, !na) << row.algo << " " << row.phase;
  }
}

}  // namespace
}  // namespace mirl
