#include "mgrl/envs.hpp"

#include <cmath>
#include <limits>

namespace mgrl {

namespace {
constexpr double kBox = 5.0;
constexpr double kWallMargin = 1e-3;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

EnvState GoalEnv::reset(Rng& rng) const {
  EnvState s;
  s.state = sample_start(rng);
  s.goal = sample_goal(rng);
  s.t = 0;
  return s;
}

EnvState GoalEnv::step(const EnvState& s, const Vector& action) const {
  if (action.size() != spec_.action_dim) throw std::invalid_argument("action dim mismatch");
  if (s.t >= spec_.horizon) throw std::invalid_argument("episode already at horizon");
  if (!action.allFinite()) throw NumericalError("non-finite action");
  if ((action.array() < spec_.action_low.array()).any() ||
      (action.array() > spec_.action_high.array()).any())
    throw std::invalid_argument("action outside the action box");
  EnvState next;
  next.state = transition(s.state, action);
  next.goal = s.goal;
  next.t = s.t + 1;
  return next;
}

double GoalEnv::sparse_reward(const Vector& achieved, const Vector& goal) const {
  if (achieved.size() != spec_.goal_dim || goal.size() != spec_.goal_dim)
    throw std::invalid_argument("goal dim mismatch");
  return (achieved - goal).norm() < spec_.epsilon ? 0.0 : -1.0;
}

Point2dLarge::Point2dLarge() : Point2dLarge("point2d-large") {}

Point2dLarge::Point2dLarge(std::string name) : GoalEnv({}) {
  spec_.name = std::move(name);
  spec_.state_dim = 2;
  spec_.action_dim = 2;
  spec_.goal_dim = 2;
  spec_.action_low = Vector::Constant(2, -1.0);
  spec_.action_high = Vector::Constant(2, 1.0);
  spec_.epsilon = 1.0;
  spec_.horizon = 100;
}

Vector Point2dLarge::transition(const Vector& state, const Vector& action) const {
  return (state + action).cwiseMax(-kBox).cwiseMin(kBox);
}

Vector Point2dLarge::sample_start(Rng& rng) const {
  Vector s(2);
  s(0) = rng.uniform(-kBox, kBox);
  s(1) = rng.uniform(-kBox, kBox);
  return s;
}

Vector Point2dLarge::sample_goal(Rng& rng) const {
  Vector g(2);
  g(0) = rng.uniform(-kBox, kBox);
  g(1) = rng.uniform(-kBox, kBox);
  return g;
}

Point2dFourRoom::Point2dFourRoom() : Point2dLarge("point2d-fourroom") {}

bool Point2dFourRoom::on_solid_wall(double coord) {
  return (coord >= -kBox && coord <= -3.0) || (coord >= -2.0 && coord <= 2.0) ||
         (coord >= 3.0 && coord <= kBox);
}

namespace {

// Earliest parameter t in (0, 1] at which the segment p0 + t*d crosses a
// solid stretch of the line axis=0, or infinity. `axis` selects the
// coordinate that hits zero; the other coordinate must land on a wall.
double wall_hit(const Vector& p0, const Vector& d, int axis) {
  const double a0 = p0(axis);
  const double a1 = a0 + d(axis);
  // Starting on the line counts as no crossing; ending exactly on it does.
  if (a0 == 0.0) return std::numeric_limits<double>::infinity();
  const bool crosses = (a0 > 0.0) ? (a1 <= 0.0) : (a1 >= 0.0);
  if (!crosses) return std::numeric_limits<double>::infinity();
  const double t = a0 / (a0 - a1);
  const double other = p0(1 - axis) + t * d(1 - axis);
  return Point2dFourRoom::on_solid_wall(other) ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

Vector Point2dFourRoom::transition(const Vector& state, const Vector& action) const {
  const Vector target = Point2dLarge::transition(state, action);
  const Vector d = target - state;
  const double len = d.norm();
  if (len == 0.0) return target;
  const double t_hit = std::min(wall_hit(state, d, 0), wall_hit(state, d, 1));
  if (!std::isfinite(t_hit)) return target;
  const double t_stop = std::max(0.0, t_hit - kWallMargin / len);
  return state + t_stop * d;
}

Vector Point2dFourRoom::sample_start(Rng& rng) const {
  for (;;) {
    Vector s = Point2dLarge::sample_start(rng);
    const bool on_wall = (s(0) == 0.0 && on_solid_wall(s(1))) || (s(1) == 0.0 && on_solid_wall(s(0)));
    if (!on_wall) return s;
  }
}

PlanarReacher::PlanarReacher() : GoalEnv({}) {
  spec_.name = "planar-reacher";
  spec_.state_dim = 6;
  spec_.action_dim = 2;
  spec_.goal_dim = 2;
  spec_.action_low = Vector::Constant(2, -1.0);
  spec_.action_high = Vector::Constant(2, 1.0);
  spec_.epsilon = 0.02;
  spec_.horizon = 100;
}

Vector PlanarReacher::tip_position(double theta1, double theta2) {
  Vector tip(2);
  tip(0) = kLink1 * std::cos(theta1) + kLink2 * std::cos(theta1 + theta2);
  tip(1) = kLink1 * std::sin(theta1) + kLink2 * std::sin(theta1 + theta2);
  return tip;
}

Vector PlanarReacher::transition(const Vector& state, const Vector& action) const {
  // Damped Euler step: v' = damping * v + dt * torque, theta' = theta + dt * v'.
  // Velocities stay inside [-0.5, 0.5] (the fixed point of the recursion).
  Vector next(6);
  next(2) = kDamping * state(2) + kDt * action(0);
  next(3) = kDamping * state(3) + kDt * action(1);
  next(0) = state(0) + kDt * next(2);
  next(1) = state(1) + kDt * next(3);
  next.segment(4, 2) = tip_position(next(0), next(1));
  return next;
}

Vector PlanarReacher::sample_start(Rng& rng) const {
  Vector s = Vector::Zero(6);
  s(0) = rng.uniform(-kPi, kPi);
  s(1) = rng.uniform(-kPi, kPi);
  s.segment(4, 2) = tip_position(s(0), s(1));
  return s;
}

Vector PlanarReacher::sample_goal(Rng& rng) const {
  // Area-uniform over the disk of radius 0.95 * (L1 + L2).
  const double radius = 0.95 * (kLink1 + kLink2) * std::sqrt(rng.uniform());
  const double angle = rng.uniform(0.0, 2.0 * kPi);
  Vector g(2);
  g(0) = radius * std::cos(angle);
  g(1) = radius * std::sin(angle);
  return g;
}

std::unique_ptr<GoalEnv> make_env(const std::string& name) {
  if (name == "point2d-large") return std::make_unique<Point2dLarge>();
  if (name == "point2d-fourroom") return std::make_unique<Point2dFourRoom>();
  if (name == "planar-reacher") return std::make_unique<PlanarReacher>();
  throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace mgrl
