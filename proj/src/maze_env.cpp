#include "csac/maze_env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace csac {

double wrapAngle(double a) {
  constexpr double twoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, twoPi);
  if (a < 0.0) a += twoPi;
  a -= std::numbers::pi;
  return a >= std::numbers::pi ? -std::numbers::pi : a;
}

namespace {

double castRay(const MazeSpec& spec, Vec2 origin, double angle, double maxRange) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  double best = maxRange;
  for (const auto& w : spec.walls) {
    if (auto t = rayHit(origin, dir, w)) best = std::min(best, *t);
  }
  return best;
}

}  // namespace

double raycast(const MazeSpec& spec, Vec2 origin, double angle, double maxRange) {
  if (!spec.roomAt(origin)) {
    throw std::invalid_argument("raycast: origin (" + std::to_string(origin.x) + ", " +
                                std::to_string(origin.y) + ") is outside free space");
  }
  for (const auto& w : spec.walls) {
    if (pointSegmentDistance(origin, w) < 1e-12) throw std::invalid_argument("raycast: origin lies on a wall");
  }
  return castRay(spec, origin, angle, maxRange);
}

std::vector<double> computeRewards(const AgentState& previous, const AgentState& next,
                                   const MazeSpec& spec, const EnvConfig& config) {
  const std::size_t n = spec.roomCount();
  std::vector<double> r(n, 0.0);
  const std::size_t j = previous.subtask;
  if (j >= n) return r;
  const bool finalRoom = j + 1 == n;
  const bool exited = finalRoom ? (spec.goalArea.contains(next.position) &&
                                   !spec.goalArea.contains(previous.position))
                                : next.subtask == j + 1;
  r[j] = exited ? config.exitBonus : -config.livingCost;
  return r;
}

UnicycleAction scaleAction(double linear, double angular, const EnvConfig& config) {
  return {linear * config.maxLinearVelocity, angular * config.maxAngularVelocity};
}

MazeEnv::MazeEnv(MazeSpec spec, EnvConfig config)
    : spec_(std::move(spec)), config_(config), bounds_(spec_.bounds()) {
  if (spec_.rooms.empty()) throw std::invalid_argument("MazeEnv: maze has no rooms");
  if (config_.beamCount == 0) throw std::invalid_argument("MazeEnv: need at least one laser beam");
  state_.position = spec_.startArea.center();
  state_.subtask = spec_.roomAt(state_.position).value_or(0);
}

bool MazeEnv::spawnable(Vec2 p) const {
  if (!spec_.roomAt(p) || spec_.goalArea.contains(p)) return false;
  for (const auto& w : spec_.walls) {
    if (pointSegmentDistance(p, w) < config_.spawnClearance) return false;
  }
  return true;
}

Observation MazeEnv::reset(ResetMode mode, Rng& rng) {
  Vec2 p;
  if (mode == ResetMode::evaluation) {
    const Rect& s = spec_.startArea;
    p = {rng.uniform(s.xMin, s.xMax), rng.uniform(s.yMin, s.yMax)};
  } else {
    do {
      p = {rng.uniform(bounds_.xMin, bounds_.xMax), rng.uniform(bounds_.yMin, bounds_.yMax)};
    } while (!spawnable(p));
  }
  const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  steps_ = 0;
  return setState(p, heading);
}

Observation MazeEnv::setState(Vec2 position, double heading) {
  auto room = spec_.roomAt(position);
  if (!room) throw std::invalid_argument("MazeEnv::setState: position outside free space");
  state_ = {position, wrapAngle(heading), *room};
  return observe();
}

Vec2 MazeEnv::moveWithCollision(Vec2 from, Vec2 to) const {
  double first = 2.0;
  for (const auto& w : spec_.walls) {
    if (auto t = sweepHit(from, to, w)) first = std::min(first, *t);
  }
  if (first > 1.0) return to;
  const double length = distance(from, to);
  const double travel = std::max(0.0, first * length - config_.collisionGap);
  return from + (travel / length) * (to - from);
}

StepResult MazeEnv::step(const UnicycleAction& action) {
  if (!std::isfinite(action.linear) || !std::isfinite(action.angular)) {
    throw std::invalid_argument("MazeEnv::step: non-finite action");
  }
  if (std::abs(action.linear) > config_.maxLinearVelocity * (1.0 + 1e-12) ||
      std::abs(action.angular) > config_.maxAngularVelocity * (1.0 + 1e-12)) {
    throw std::invalid_argument("MazeEnv::step: action outside velocity limits");
  }
  const AgentState previous = state_;
  const double th = state_.heading;
  const Vec2 target = state_.position +
                      Vec2{action.linear * std::cos(th) * config_.dt, action.linear * std::sin(th) * config_.dt};
  state_.position = moveWithCollision(state_.position, target);
  state_.heading = wrapAngle(th + action.angular * config_.dt);
  // A stop just short of a wall can leave the point on a room boundary only
  // through a door, so membership is always defined.
  state_.subtask = spec_.roomAt(state_.position).value_or(previous.subtask);
  ++steps_;

  StepResult result;
  result.rewards = computeRewards(previous, state_, spec_, config_);
  result.nextSubtask = state_.subtask;
  result.reachedGoal = spec_.goalArea.contains(state_.position);
  result.done = result.reachedGoal || steps_ >= config_.maxEpisodeSteps;
  result.observation = observe();
  return result;
}

Observation MazeEnv::observe() const {
  Observation obs;
  obs.position = state_.position;
  obs.sinHeading = std::sin(state_.heading);
  obs.cosHeading = std::cos(state_.heading);
  obs.laserRanges.resize(config_.beamCount);
  const double spacing = 2.0 * std::numbers::pi / static_cast<double>(config_.beamCount);
  for (std::size_t k = 0; k < config_.beamCount; ++k) {
    obs.laserRanges[k] = castRay(spec_, state_.position, state_.heading + spacing * static_cast<double>(k),
                                 config_.maxRange);
  }
  return obs;
}

std::vector<double> MazeEnv::features(const Observation& obs) const {
  std::vector<double> f;
  f.reserve(featureDim());
  for (double r : obs.laserRanges) f.push_back(r / config_.maxRange);
  const Vec2 c = bounds_.center();
  f.push_back(2.0 * (obs.position.x - c.x) / bounds_.width());
  f.push_back(2.0 * (obs.position.y - c.y) / bounds_.height());
  f.push_back(obs.sinHeading);
  f.push_back(obs.cosHeading);
  return f;
}

}  // namespace csac
