#pragma once

#include <memory>
#include <string>

#include "mgrl/mlp.hpp"
#include "mgrl/rng.hpp"

namespace mgrl {

struct GoalEnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int goal_dim = 0;
  Vector action_low, action_high;
  double epsilon = 0.0;  // success radius of the sparse reward
  int horizon = 100;
};

struct EnvState {
  Vector state;
  Vector goal;
  int t = 0;
};

// Goal-conditioned environment with a fixed horizon and a sparse reward.
// Instances hold no mutable state; the episode lives in EnvState values.
class GoalEnv {
 public:
  virtual ~GoalEnv() = default;

  const GoalEnvSpec& spec() const { return spec_; }

  EnvState reset(Rng& rng) const;

  // Applies one action: validates the box, advances the dynamics, increments
  // t. The goal is unchanged.
  EnvState step(const EnvState& s, const Vector& action) const;

  // Raw dynamics, no bookkeeping.
  virtual Vector transition(const Vector& state, const Vector& action) const = 0;

  // Achieved-goal projection.
  virtual Vector phi(const Vector& state) const = 0;

  virtual Vector sample_start(Rng& rng) const = 0;
  virtual Vector sample_goal(Rng& rng) const = 0;

  // 0 when the achieved goal lies strictly inside the epsilon ball around
  // goal, otherwise -1.
  double sparse_reward(const Vector& achieved, const Vector& goal) const;

  bool is_success(const Vector& state, const Vector& goal) const {
    return sparse_reward(phi(state), goal) == 0.0;
  }

 protected:
  explicit GoalEnv(GoalEnvSpec spec) : spec_(std::move(spec)) {}
  GoalEnvSpec spec_;
};

// Point mass in [-5,5]^2; actions are displacements in [-1,1]^2, positions
// clamp to the box per axis.
class Point2dLarge : public GoalEnv {
 public:
  Point2dLarge();
  Vector transition(const Vector& state, const Vector& action) const override;
  Vector phi(const Vector& state) const override { return state; }
  Vector sample_start(Rng& rng) const override;
  Vector sample_goal(Rng& rng) const override;

 protected:
  explicit Point2dLarge(std::string name);
};

// Point mass with two axis-aligned walls (x=0 and y=0), each pierced by a
// width-1 door centered at +-2.5. Motion stops 1e-3 short of the first wall
// hit along the motion direction.
class Point2dFourRoom : public Point2dLarge {
 public:
  Point2dFourRoom();
  Vector transition(const Vector& state, const Vector& action) const override;
  Vector sample_start(Rng& rng) const override;

  // True when the coordinate lies on a solid stretch of a wall line
  // (doors are the open intervals (-3,-2) and (2,3)).
  static bool on_solid_wall(double coord);
};

// Two-link arm driven by torques, integrated with one damped Euler step per
// action; the goal is a tip position inside the reachable disk.
class PlanarReacher : public GoalEnv {
 public:
  PlanarReacher();
  Vector transition(const Vector& state, const Vector& action) const override;
  Vector phi(const Vector& state) const override { return state.segment(4, 2); }
  Vector sample_start(Rng& rng) const override;
  Vector sample_goal(Rng& rng) const override;

  static constexpr double kLink1 = 0.10;
  static constexpr double kLink2 = 0.11;
  static constexpr double kDt = 0.05;
  static constexpr double kDamping = 0.9;

  static Vector tip_position(double theta1, double theta2);
};

std::unique_ptr<GoalEnv> make_env(const std::string& name);

}  // namespace mgrl
