#include "mirl/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <system_error>

#include "mirl/error.hpp"
#include "mirl/io.hpp"

namespace mirl {
namespace {

struct AlgoName {
  Algo algo;
  const char* name;
};

constexpr AlgoName kAlgoNames[] = {{Algo::kBcIrl, "bcirl"}, {Algo::kAirl, "airl"},
                                   {Algo::kGcl, "gcl"},     {Algo::kMaxEnt, "maxent"},
                                   {Algo::kGail, "gail"},   {Algo::kBc, "bc"}};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

Field num(const char* section, const char* key, double& ref) {
  return {section, key, [&ref](const std::string& v) { ref = to_double(v); },
          [&ref] { return format_double(ref); }};
}

Field size(const char* section, const char* key, std::size_t& ref) {
  return {section, key, [&ref](const std::string& v) { ref = to_u64(v); },
          [&ref] { return std::to_string(ref); }};
}

Field integer(const char* section, const char* key, int& ref) {
  return {section, key, [&ref](const std::string& v) { ref = to_int(v); },
          [&ref] { return std::to_string(ref); }};
}

Field flag(const char* section, const char* key, bool& ref) {
  return {section, key, [&ref](const std::string& v) { ref = to_bool(v); },
          [&ref] { return from_bool(ref); }};
}

Field text(const char* section, const char* key, std::string& ref) {
  return {section, key, [&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}

Obstacle& require_obstacle(PointMassConfig& c) {
  if (!c.obstacle) throw ConfigError("obstacle geometry given for a task without an obstacle");
  return *c.obstacle;
}

std::vector<Field> fields(RunConfig& c) {
  PointMassConfig& e = c.env.config;
  PpoConfig& p = c.ppo;
  IrlSettings& irl = c.irl;
  SuiteSettings& s = c.suite;
  std::vector<Field> f;
  f.push_back({"env", "task", [&c](const std::string& v) { c.select_task(v); },
               [&c] { return c.env.task; }});
  f.push_back(integer("env", "horizon", e.horizon));
  f.push_back(num("env", "arena_half_extent", e.arena_half_extent));
  f.push_back(num("env", "max_step", e.max_step));
  f.push_back(num("env", "goal_x", e.goal[0]));
  f.push_back(num("env", "goal_y", e.goal[1]));
  f.push_back({"env", "obstacle_x",
               [&e](const std::string& v) { require_obstacle(e).center[0] = to_double(v); },
               [&e] { return e.obstacle ? format_double(e.obstacle->center[0]) : ""; }});
  f.push_back({"env", "obstacle_y",
               [&e](const std::string& v) { require_obstacle(e).center[1] = to_double(v); },
               [&e] { return e.obstacle ? format_double(e.obstacle->center[1]) : ""; }});
  f.push_back({"env", "obstacle_radius",
               [&e](const std::string& v) { require_obstacle(e).radius = to_double(v); },
               [&e] { return e.obstacle ? format_double(e.obstacle->radius) : ""; }});
  f.push_back(size("env", "n_demos", c.env.n_demos));
  f.push_back(num("env", "start_jitter", c.env.start_jitter));

  f.push_back(num("ppo", "clip", p.clip));
  f.push_back(num("ppo", "gamma", p.gamma));
  f.push_back(num("ppo", "lambda", p.lambda));
  f.push_back(integer("ppo", "epochs", p.epochs));
  f.push_back(integer("ppo", "minibatches", p.minibatches));
  f.push_back(num("ppo", "entropy_coef", p.entropy_coef));
  f.push_back(num("ppo", "value_coef", p.value_coef));
  f.push_back(flag("ppo", "normalize_advantages", p.normalize_advantages));
  f.push_back(num("ppo", "lr", p.lr));
  f.push_back(flag("ppo", "lr_decay", p.lr_decay));
  f.push_back(size("ppo", "batch_size", p.batch_size));
  f.push_back(size("ppo", "hidden_dim", p.hidden_dim));
  f.push_back(num("ppo", "log_std_init", p.log_std_init));
  f.push_back(num("ppo", "mean_scale", p.mean_scale));

  f.push_back({"irl", "algo", [&irl](const std::string& v) { irl.algo = parse_algo(v); },
               [&irl] { return to_string(irl.algo); }});
  f.push_back(size("irl", "reward_hidden", irl.reward_hidden));
  f.push_back(num("irl", "reward_init_scale", irl.reward_init_scale));
  f.push_back(num("irl", "bcirl_inner_lr", irl.bcirl.inner_lr));
  f.push_back(num("irl", "bcirl_reward_lr", irl.bcirl.reward_lr));
  f.push_back(size("irl", "bcirl_reward_batch_size", irl.bcirl.reward_batch_size));
  f.push_back(integer("irl", "bcirl_inner_steps", irl.bcirl.inner_steps));
  f.push_back({"irl", "bcirl_meta_mode",
               [&irl](const std::string& v) {
                 if (v == "analytic") {
                   irl.bcirl.mode = MetaMode::kAnalytic;
                 } else if (v == "finite_difference") {
                   irl.bcirl.mode = MetaMode::kFiniteDifference;
                 } else {
                   throw ConfigError("expected analytic or finite_difference, got '" + v + "'");
                 }
               },
               [&irl] {
                 return std::string(irl.bcirl.mode == MetaMode::kAnalytic ? "analytic"
                                                                          : "finite_difference");
               }});
  f.push_back(num("irl", "bcirl_fd_step", irl.bcirl.fd_step));
  f.push_back(num("irl", "bcirl_policy_lr", irl.bcirl_policy_lr));
  f.push_back(num("irl", "airl_reward_lr", irl.airl.reward_lr));
  f.push_back(size("irl", "airl_reward_batch_size", irl.airl.reward_batch_size));
  f.push_back(num("irl", "airl_policy_lr", irl.airl_policy_lr));
  f.push_back(num("irl", "gcl_reward_lr", irl.gcl.reward_lr));
  f.push_back(size("irl", "gcl_reward_batch_size", irl.gcl.reward_batch_size));
  f.push_back(num("irl", "gcl_policy_lr", irl.gcl_policy_lr));
  f.push_back(num("irl", "maxent_reward_lr", irl.maxent.reward_lr));
  f.push_back(integer("irl", "maxent_iterations", irl.maxent.iterations));
  f.push_back(integer("irl", "maxent_cells", irl.maxent.cells_per_axis));
  f.push_back(num("irl", "gail_reward_lr", irl.gail.reward_lr));
  f.push_back(size("irl", "gail_reward_batch_size", irl.gail.reward_batch_size));
  f.push_back(num("irl", "gail_policy_lr", irl.gail_policy_lr));
  f.push_back(integer("irl", "bc_epochs", irl.bc.epochs));
  f.push_back(num("irl", "bc_lr", irl.bc.lr));

  f.push_back({"suite", "algos",
               [&s](const std::string& v) {
                 s.algos.clear();
                 for (const auto& a : split_list(v)) s.algos.push_back(parse_algo(a));
               },
               [&s] {
                 std::string out;
                 for (std::size_t i = 0; i < s.algos.size(); ++i) {
                   out += (i ? "," : "") + to_string(s.algos[i]);
                 }
                 return out;
               }});
  f.push_back({"suite", "phases",
               [&s](const std::string& v) {
                 s.phases.clear();
                 for (const auto& a : split_list(v)) s.phases.push_back(parse_phase(a));
               },
               [&s] {
                 std::string out;
                 for (std::size_t i = 0; i < s.phases.size(); ++i) {
                   out += (i ? "," : "") + to_string(s.phases[i]);
                 }
                 return out;
               }});
  f.push_back(size("suite", "train_budget", s.train_budget));
  f.push_back(size("suite", "eval_budget", s.eval_budget));
  f.push_back({"suite", "seeds",
               [&s](const std::string& v) {
                 s.seeds.clear();
                 for (const auto& a : split_list(v)) s.seeds.push_back(to_u64(a));
               },
               [&s] {
                 std::string out;
                 for (std::size_t i = 0; i < s.seeds.size(); ++i) {
                   out += (i ? "," : "") + std::to_string(s.seeds[i]);
                 }
                 return out;
               }});
  f.push_back(size("suite", "n_eval_episodes", s.n_eval_episodes));
  f.push_back(integer("suite", "field_resolution", s.field_resolution));
  f.push_back(flag("suite", "record_wall_time", s.record_wall_time));

  f.push_back(text("io", "out_dir", c.io.out_dir));
  f.push_back(text("io", "demo_path", c.io.demo_path));
  return f;
}

}  // namespace

std::string to_string(Algo algo) {
  for (const auto& a : kAlgoNames) {
    if (a.algo == algo) return a.name;
  }
  return "unknown";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kTrain:
      return "train";
    case Phase::kEvalTrain:
      return "eval_train";
    case Phase::kEvalTest:
      return "eval_test";
  }
  return "unknown";
}

Algo parse_algo(const std::string& name) {
  for (const auto& a : kAlgoNames) {
    if (name == a.name) return a.algo;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

Phase parse_phase(const std::string& name) {
  if (name == "train") return Phase::kTrain;
  if (name == "eval_train") return Phase::kEvalTrain;
  if (name == "eval_test") return Phase::kEvalTest;
  throw ConfigError("unknown phase '" + name + "'");
}

void RunConfig::select_task(const std::string& task) {
  if (task == "open") {
    env.config = PointMassConfig::open_task();
    env.n_demos = 4;
    ppo.batch_size = 1280;
    for (std::size_t* b : {&irl.bcirl.reward_batch_size, &irl.airl.reward_batch_size,
                           &irl.gcl.reward_batch_size, &irl.gail.reward_batch_size}) {
      *b = 20;
    }
    irl.bcirl_policy_lr = 1e-4;
    irl.airl_policy_lr = 1e-4;
    suite.train_budget = 200000;
  } else if (task == "obstacle") {
    env.config = PointMassConfig::obstacle_task();
    env.n_demos = 100;
    ppo.batch_size = 6400;
    for (std::size_t* b : {&irl.bcirl.reward_batch_size, &irl.airl.reward_batch_size,
                           &irl.gcl.reward_batch_size, &irl.gail.reward_batch_size}) {
      *b = 256;
    }
    irl.bcirl_policy_lr = 3e-4;
    irl.airl_policy_lr = 3e-4;
    suite.train_budget = 600000;
  } else {
    throw ConfigError("unknown task '" + task + "' (expected open or obstacle)");
  }
  env.task = task;
  suite.eval_budget = 200000;
}

void RunConfig::apply_full_scale() {
  if (env.task == "obstacle") {
    suite.train_budget = 15000000;
  } else {
    suite.train_budget = 5000000;
  }
  suite.eval_budget = 5000000;
}

StartDistribution RunConfig::train_distribution() const {
  return StartDistribution::train_corners(env.start_jitter);
}

StartDistribution RunConfig::test_distribution() const {
  return StartDistribution::test_rotated(env.start_jitter);
}

double RunConfig::train_policy_lr(Algo algo) const {
  switch (algo) {
    case Algo::kBcIrl:
      return irl.bcirl_policy_lr;
    case Algo::kAirl:
      return irl.airl_policy_lr;
    case Algo::kGcl:
      return irl.gcl_policy_lr;
    case Algo::kGail:
      return irl.gail_policy_lr;
    case Algo::kMaxEnt:
    case Algo::kBc:
      return ppo.lr;
  }
  return ppo.lr;
}

void RunConfig::validate() const {
  env.config.validate();
  if (env.n_demos == 0) throw ConfigError("env: n_demos must be positive");
  if (!(env.start_jitter >= 0.0)) throw ConfigError("env: start_jitter must be non-negative");
  ppo.validate();
  irl.bcirl.validate();
  irl.airl.validate();
  irl.gcl.validate();
  irl.maxent.validate();
  irl.gail.validate();
  irl.bc.validate();
  if (irl.reward_hidden == 0) throw ConfigError("irl: reward_hidden must be positive");
  if (!(irl.reward_init_scale > 0.0)) throw ConfigError("irl: reward_init_scale must be positive");
  if (suite.algos.empty()) throw ConfigError("suite: empty algorithm list");
  if (suite.phases.empty()) throw ConfigError("suite: empty phase list");
  if (suite.seeds.empty()) throw ConfigError("suite: empty seed list");
  if (suite.n_eval_episodes == 0) throw ConfigError("suite: n_eval_episodes must be positive");
  if (suite.field_resolution < 2) throw ConfigError("suite: field_resolution must be at least 2");
  if (io.out_dir.empty()) throw ConfigError("io: out_dir must not be empty");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::vector<Field> table = fields(config);
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "env" && section != "ppo" && section != "irl" && section != "suite" &&
          section != "io") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (Field& f : table) {
      if (f.section == section && f.key == key) {
        try {
          f.set(value);
        } catch (const ConfigError& e) {
          fail(key + ": " + e.what());
        }
        found = true;
        break;
      }
    }
    if (!found) fail("unknown key '" + key + "' in [" + section + "]");
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

std::string serialize_config(const RunConfig& config) {
  RunConfig copy = config;
  std::vector<Field> table = fields(copy);
  std::ostringstream out;
  std::string section;
  for (const Field& f : table) {
    const std::string value = f.get();
    if (f.section == "env" && !config.env.config.obstacle && f.key.rfind("obstacle_", 0) == 0) {
      continue;
    }
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      out << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << value << '\n';
  }
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  RunConfig copy = config;
  copy.io = IoSettings{};
  return fnv1a(serialize_config(copy));
}

}  // namespace mirl
