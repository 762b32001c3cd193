#pragma once

#include "csac/maze.hpp"
#include "csac/rng.hpp"

#include <cstddef>
#include <numbers>
#include <vector>

namespace csac {

struct EnvConfig {
  double dt = 0.1;
  double maxLinearVelocity = 1.0;
  double maxAngularVelocity = std::numbers::pi;
  std::size_t beamCount = 16;
  double maxRange = 10.0;
  double exitBonus = 10.0;
  double livingCost = 0.01;
  std::size_t maxEpisodeSteps = 1000;
  double collisionGap = 1e-3;
  double spawnClearance = 0.05;  // minimum wall distance for random spawns
};

struct AgentState {
  Vec2 position;
  double heading = 0.0;     // radians, [-pi, pi)
  std::size_t subtask = 0;  // zero-based room index
};

struct Observation {
  std::vector<double> laserRanges;  // beamCount entries in (0, maxRange]
  Vec2 position;
  double sinHeading = 0.0;
  double cosHeading = 1.0;
};

struct UnicycleAction {
  double linear = 0.0;   // world units / s
  double angular = 0.0;  // rad / s
};

struct StepResult {
  Observation observation;
  std::vector<double> rewards;  // one entry per subtask
  std::size_t nextSubtask = 0;
  bool done = false;         // goal reached or step limit hit
  bool reachedGoal = false;  // terminal in the MDP sense
};

enum class ResetMode { evaluation, exploration };

double wrapAngle(double a);

// Distance along the ray to the nearest wall, capped at maxRange. Throws
// std::invalid_argument if the origin is outside free space or on a wall.
double raycast(const MazeSpec& spec, Vec2 origin, double angle, double maxRange);

// Per-subtask rewards for one move: the subtask that was active before the
// move earns exitBonus when the move leaves its room forward (into the next
// room, or into the goal area for the final room) and pays livingCost
// otherwise; every other subtask gets 0.
std::vector<double> computeRewards(const AgentState& previous, const AgentState& next,
                                   const MazeSpec& spec, const EnvConfig& config);

// Maps a squashed policy output in (-1, 1)^2 to velocity limits.
UnicycleAction scaleAction(double linear, double angular, const EnvConfig& config);

class MazeEnv {
 public:
  MazeEnv(MazeSpec spec, EnvConfig config = {});

  Observation reset(ResetMode mode, Rng& rng);
  // Throws on non-finite or out-of-limit actions.
  StepResult step(const UnicycleAction& action);

  // Places the agent directly (tests, trajectory tools).
  Observation setState(Vec2 position, double heading);

  Observation observe() const;
  // Network input: ranges / maxRange, position scaled to [-1, 1] over the
  // maze bounds, then sin and cos of the heading.
  std::vector<double> features(const Observation& obs) const;
  std::size_t featureDim() const { return config_.beamCount + 4; }

  const AgentState& state() const { return state_; }
  const MazeSpec& spec() const { return spec_; }
  const EnvConfig& config() const { return config_; }
  std::size_t stepsTaken() const { return steps_; }
  std::size_t subtaskCount() const { return spec_.roomCount(); }

  // Point in free space at least spawnClearance from every wall and outside
  // the goal area.
  bool spawnable(Vec2 p) const;

 private:
  Vec2 moveWithCollision(Vec2 from, Vec2 to) const;

  MazeSpec spec_;
  EnvConfig config_;
  Rect bounds_;
  AgentState state_;
  std::size_t steps_ = 0;
};

}  // namespace csac
