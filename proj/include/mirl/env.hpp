#ifndef MIRL_ENV_HPP_
#define MIRL_ENV_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "mirl/rng.hpp"

namespace mirl {

using Vec2 = std::array<double, 2>;

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double k, const Vec2& a) { return {k * a[0], k * a[1]}; }
inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

struct Obstacle {
  Vec2 center{0.5, 0.3};
  double radius = 0.4;
};

// Kinematic point mass: the action is a per-axis clamped displacement.
struct PointMassConfig {
  double arena_half_extent = 1.5;
  Vec2 goal{0.0, 0.0};
  double max_step = 0.2 * std::numbers::sqrt2;
  int horizon = 5;
  std::optional<Obstacle> obstacle;

  static PointMassConfig open_task();
  static PointMassConfig obstacle_task();

  // Throws ConfigError on inconsistent geometry.
  void validate() const;
  std::uint64_t fingerprint() const;
  bool inside_obstacle(const Vec2& p) const;
};

struct StartDistribution {
  enum class Kind { kTrainCorners, kTestRotated, kCustom };

  Kind kind = Kind::kCustom;
  std::vector<Vec2> anchors;
  double jitter = 0.05;

  // (+-1, +-1).
  static StartDistribution train_corners(double jitter = 0.05);
  // (+-sqrt2, 0), (0, +-sqrt2).
  static StartDistribution test_rotated(double jitter = 0.05);
};

struct Trajectory {
  std::vector<Vec2> states;   // horizon + 1 entries
  std::vector<Vec2> actions;  // horizon entries
};

struct DemoSet {
  std::vector<Trajectory> trajectories;
  std::uint64_t env_fingerprint = 0;

  std::size_t transition_count() const;
};

// Uniform anchor plus isotropic Gaussian jitter, clamped to the arena and
// resampled (at most 100 times) while inside the obstacle.
Vec2 env_reset(const PointMassConfig& config, const StartDistribution& dist,
               Rng& rng);

// As env_reset, with the anchor fixed.
Vec2 env_reset_at(const PointMassConfig& config, const Vec2& anchor,
                  double jitter, Rng& rng);

Vec2 clamp_action(const PointMassConfig& config, const Vec2& a);

// Deterministic transition. Motion stops 1e-3 short of the first contact
// with the obstacle disk.
Vec2 env_step(const PointMassConfig& config, const Vec2& s, const Vec2& a);

// Scripted expert action toward the goal (straight line, or around the
// obstacle via tangent waypoints on an inflated circle).
class ScriptedExpert {
 public:
  ScriptedExpert(const PointMassConfig& config, const Vec2& start);
  Vec2 act(const Vec2& s);

 private:
  const PointMassConfig& config_;
  std::vector<Vec2> waypoints_;
  std::size_t next_ = 0;
};

// Demo i starts from anchor i mod |anchors| of the training distribution.
DemoSet generate_demos(const PointMassConfig& config, std::size_t n_demos,
                       Rng& rng);

}  // namespace mirl

#endif  // MIRL_ENV_HPP_
