#include "csac/export.hpp"

#include <cmath>
#include <cstdio>

namespace csac {

namespace {

constexpr std::uint64_t kTrajectoryStream = 300;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string exportTrajectories(Trainer& trainer, const TrajectoryRequest& request) {
  const std::size_t n = trainer.env().subtaskCount();
  MazeEnv env = trainer.env();
  if (request.maze) {
    if (request.maze->roomCount() != n) {
      throw ConfigError("layout has " + std::to_string(request.maze->roomCount()) +
                        " rooms, the checkpoint was trained on " + std::to_string(n));
    }
    env = MazeEnv(*request.maze, trainer.env().config());
  }
  auto& bundles = trainer.bundles();
  if (request.criticIndex >= bundles.size()) {
    throw ConfigError("critic index " + std::to_string(request.criticIndex + 1) + " out of range; run has " +
                      std::to_string(bundles.size()) + " critic(s)");
  }
  const auto& critic = bundles[request.criticIndex].agent.critic.online;

  std::string out = "episode,step,x,y,heading,subtask,linear,angular,critic_value";
  for (std::size_t j = 1; j <= n; ++j) out += ",reward_" + std::to_string(j);
  out += ",success\n";

  Rng rng = Rng::derived(request.seed, kTrajectoryStream);
  const Method method = trainer.config().method;
  for (std::size_t e = 0; e < request.episodes; ++e) {
    const EpisodeLog log =
        gatherEpisode(bundles, method, env, ResetMode::evaluation, rng, env.config().maxEpisodeSteps);
    // Rows show the pose before each action, so replay the features we kept.
    Matrix states(static_cast<Index>(log.records.size()), static_cast<Index>(env.featureDim()));
    Matrix actions(states.rows(), 2);
    for (std::size_t t = 0; t < log.records.size(); ++t) {
      const auto& r = log.records[t];
      for (std::size_t k = 0; k < r.state.size(); ++k) states(static_cast<Index>(t), static_cast<Index>(k)) = r.state[k];
      actions(static_cast<Index>(t), 0) = r.action[0];
      actions(static_cast<Index>(t), 1) = r.action[1];
    }
    const Matrix values =
        states.rows() > 0 ? twinMin(critic, Tensor(states), Tensor(actions), true).value() : Matrix();
    const Rect box = env.spec().bounds();
    const std::size_t beams = env.config().beamCount;
    for (std::size_t t = 0; t < log.records.size(); ++t) {
      const auto& r = log.records[t];
      // Undo the [-1, 1] position scaling of the feature vector.
      const double x = box.xMin + (r.state[beams] + 1.0) * 0.5 * (box.xMax - box.xMin);
      const double y = box.yMin + (r.state[beams + 1] + 1.0) * 0.5 * (box.yMax - box.yMin);
      const double heading = std::atan2(r.state[beams + 2], r.state[beams + 3]);
      const UnicycleAction u = scaleAction(r.action[0], r.action[1], env.config());
      out += std::to_string(e) + "," + std::to_string(t) + "," + num(x) + "," + num(y) + "," +
             num(heading) + "," + std::to_string(r.subtask + 1) + "," + num(u.linear) + "," +
             num(u.angular) + "," + num(values(static_cast<Index>(t), 0));
      for (double rew : r.rewards) out += "," + num(rew);
      out += std::string(",") + (log.success ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace csac
