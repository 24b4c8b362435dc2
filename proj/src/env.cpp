#include "mirl/env.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "mirl/error.hpp"

namespace mirl {

namespace {

constexpr double kContactPushback = 1e-3;
constexpr int kResetTries = 100;
constexpr double kWaypointClearance = 0.1;
constexpr double kGoalTolerance = 1e-9;

std::uint64_t fnv_mix(std::uint64_t h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vec2 clamp_to_arena(const PointMassConfig& config, const Vec2& p) {
  const double e = config.arena_half_extent;
  return {std::clamp(p[0], -e, e), std::clamp(p[1], -e, e)};
}

// Scales d uniformly until both components satisfy the clamp.
Vec2 scale_to_step(const PointMassConfig& config, const Vec2& d) {
  const double m = std::max(std::abs(d[0]), std::abs(d[1]));
  if (m <= config.max_step) return d;
  return (config.max_step / m) * d;
}

// Smallest t in [0, 1] where p + t d meets the circle, if any.
std::optional<double> first_contact(const Vec2& p, const Vec2& d,
                                    const Vec2& center, double radius) {
  const Vec2 f = p - center;
  const double a = dot(d, d);
  if (a == 0.0) return std::nullopt;
  const double b = 2.0 * dot(f, d);
  const double c = dot(f, f) - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  if (t < 0.0 || t > 1.0) return std::nullopt;
  return t;
}

bool segment_hits_circle(const Vec2& p, const Vec2& q, const Vec2& center,
                         double radius) {
  const Vec2 d = q - p;
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? dot(center - p, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p + t * d - center) < radius;
}

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace

PointMassConfig PointMassConfig::open_task() { return PointMassConfig{}; }

PointMassConfig PointMassConfig::obstacle_task() {
  PointMassConfig c;
  c.horizon = 50;
  c.obstacle = Obstacle{};
  return c;
}

void PointMassConfig::validate() const {
  if (!(arena_half_extent > 0.0)) throw ConfigError("env: arena_half_extent must be positive");
  if (!(max_step > 0.0)) throw ConfigError("env: max_step must be positive");
  if (horizon < 1) throw ConfigError("env: horizon must be at least 1");
  if (std::abs(goal[0]) > arena_half_extent || std::abs(goal[1]) > arena_half_extent) {
    throw ConfigError("env: goal outside arena");
  }
  if (obstacle) {
    const auto& o = *obstacle;
    if (!(o.radius > 0.0)) throw ConfigError("env: obstacle radius must be positive");
    if (std::abs(o.center[0]) + o.radius >= arena_half_extent ||
        std::abs(o.center[1]) + o.radius >= arena_half_extent) {
      throw ConfigError("env: obstacle must lie strictly inside the arena");
    }
    if (norm(goal - o.center) <= o.radius) {
      throw ConfigError("env: obstacle contains the goal");
    }
  }
}

std::uint64_t PointMassConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv_mix(h, arena_half_extent);
  h = fnv_mix(h, goal[0]);
  h = fnv_mix(h, goal[1]);
  h = fnv_mix(h, max_step);
  h = fnv_mix(h, static_cast<double>(horizon));
  if (obstacle) {
    h = fnv_mix(h, obstacle->center[0]);
    h = fnv_mix(h, obstacle->center[1]);
    h = fnv_mix(h, obstacle->radius);
  }
  return h;
}

bool PointMassConfig::inside_obstacle(const Vec2& p) const {
  return obstacle && norm(p - obstacle->center) < obstacle->radius;
}

StartDistribution StartDistribution::train_corners(double jitter) {
  return {Kind::kTrainCorners, {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}, jitter};
}

StartDistribution StartDistribution::test_rotated(double jitter) {
  constexpr double r = std::numbers::sqrt2;
  return {Kind::kTestRotated, {{r, 0.0}, {0.0, r}, {-r, 0.0}, {0.0, -r}}, jitter};
}

std::size_t DemoSet::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.actions.size();
  return n;
}

Vec2 env_reset_at(const PointMassConfig& config, const Vec2& anchor,
                  double jitter, Rng& rng) {
  for (int attempt = 0; attempt < kResetTries; ++attempt) {
    Vec2 s = anchor;
    if (jitter > 0.0) {
      s[0] += jitter * rng.normal();
      s[1] += jitter * rng.normal();
    }
    s = clamp_to_arena(config, s);
    if (!config.inside_obstacle(s)) return s;
  }
  throw ConfigError("env: could not sample a start state outside the obstacle");
}

Vec2 env_reset(const PointMassConfig& config, const StartDistribution& dist,
               Rng& rng) {
  if (dist.anchors.empty()) throw ConfigError("env: start distribution has no anchors");
  const Vec2& anchor = dist.anchors[rng.index(dist.anchors.size())];
  return env_reset_at(config, anchor, dist.jitter, rng);
}

Vec2 clamp_action(const PointMassConfig& config, const Vec2& a) {
  const double m = config.max_step;
  auto clamp1 = [m](double v) { return std::isfinite(v) ? std::clamp(v, -m, m) : 0.0; };
  return {clamp1(a[0]), clamp1(a[1])};
}

Vec2 env_step(const PointMassConfig& config, const Vec2& s, const Vec2& a) {
  const Vec2 candidate = clamp_to_arena(config, s + clamp_action(config, a));
  if (!config.obstacle) return candidate;
  const Vec2 d = candidate - s;
  const auto t = first_contact(s, d, config.obstacle->center, config.obstacle->radius);
  if (!t) return candidate;
  const double len = norm(d);
  const double travel = std::max(0.0, *t * len - kContactPushback);
  return s + (travel / len) * d;
}

ScriptedExpert::ScriptedExpert(const PointMassConfig& config, const Vec2& start)
    : config_(config) {
  const Vec2 goal = config.goal;
  if (config.obstacle) {
    const Vec2 c = config.obstacle->center;
    const double radius = config.obstacle->radius + kWaypointClearance;
    if (segment_hits_circle(start, goal, c, radius) && norm(start - c) > radius &&
        norm(goal - c) > radius) {
      auto angle_of = [&](const Vec2& p) { return std::atan2(p[1] - c[1], p[0] - c[0]); };
      auto half_width = [&](const Vec2& p) { return std::acos(radius / norm(p - c)); };
      const double a_start = angle_of(start);
      const double a_goal = angle_of(goal);
      double best_len = 0.0;
      std::vector<Vec2> best;
      for (double side : {1.0, -1.0}) {
        // Leave the circle on the tangent facing the direction of travel.
        const double enter = a_start + side * half_width(start);
        const double leave = a_goal - side * half_width(goal);
        double sweep = wrap_angle(leave - enter);
        if (side * sweep < 0.0) sweep += side * 2.0 * std::numbers::pi;
        const int n_arc = std::max(1, static_cast<int>(std::ceil(std::abs(sweep) / 0.2)));
        std::vector<Vec2> path;
        for (int k = 0; k <= n_arc; ++k) {
          const double ang = enter + sweep * k / n_arc;
          path.push_back({c[0] + radius * std::cos(ang), c[1] + radius * std::sin(ang)});
        }
        const double len = norm(path.front() - start) + std::abs(sweep) * radius +
                           norm(goal - path.back());
        if (best.empty() || len < best_len) {
          best_len = len;
          best = std::move(path);
        }
      }
      waypoints_ = std::move(best);
    }
  }
  waypoints_.push_back(goal);
}

Vec2 ScriptedExpert::act(const Vec2& s) {
  while (next_ + 1 < waypoints_.size() && norm(waypoints_[next_] - s) < kGoalTolerance) {
    ++next_;
  }
  const Vec2 d = waypoints_[next_] - s;
  if (norm(d) < kGoalTolerance) return {0.0, 0.0};
  return scale_to_step(config_, d);
}

DemoSet generate_demos(const PointMassConfig& config, std::size_t n_demos,
                       Rng& rng) {
  config.validate();
  if (n_demos == 0) throw ConfigError("gen-demos: need at least one demonstration");
  const StartDistribution dist = StartDistribution::train_corners();
  DemoSet demos;
  demos.env_fingerprint = config.fingerprint();
  for (std::size_t i = 0; i < n_demos; ++i) {
    const Vec2& anchor = dist.anchors[i % dist.anchors.size()];
    Trajectory traj;
    traj.states.push_back(env_reset_at(config, anchor, dist.jitter, rng));
    ScriptedExpert expert(config, traj.states.front());
    for (int t = 0; t < config.horizon; ++t) {
      const Vec2 a = expert.act(traj.states.back());
      traj.actions.push_back(a);
      traj.states.push_back(env_step(config, traj.states.back(), a));
    }
    const double final_dist = norm(traj.states.back() - config.goal);
    if (final_dist > 0.05) {
      throw ConfigError("gen-demos: scripted expert ended " +
                        std::to_string(final_dist) + " from the goal");
    }
    demos.trajectories.push_back(std::move(traj));
  }
  return demos;
}

}  // namespace mirl
