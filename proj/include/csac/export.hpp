#pragma once

// Rollouts of a trained checkpoint written out for plotting.

#include "csac/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace csac {

struct TrajectoryRequest {
  std::size_t episodes = 20;
  std::size_t criticIndex = 1;  // zero-based bundle whose critic colours the rows
  std::uint64_t seed = 0;
  // Replacement layout; must match the checkpoint's room count and state size.
  std::optional<MazeSpec> maze;
};

// CSV columns: episode, step, x, y, heading, subtask, linear, angular,
// critic_value, reward_1..N, success. One group of rows per episode, from
// deterministic rollouts with start-area resets. Throws ConfigError on an
// incompatible maze or critic index.
std::string exportTrajectories(Trainer& trainer, const TrajectoryRequest& request);

}  // namespace csac
