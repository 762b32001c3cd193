#pragma once

// Run configuration: JSON file keys, desk/paper presets and the objects built
// from them.

#include "csac/csac.hpp"
#include "csac/maze.hpp"
#include "csac/maze_env.hpp"
#include "csac/sac.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace csac {

// Anything wrong with what the user asked for. The CLI maps it to exit 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scale { desk, paper };

std::string scaleName(Scale s);
Scale parseScale(const std::string& name);  // throws ConfigError

struct TrainConfig {
  Scale scale = Scale::desk;
  Method method = Method::csac;

  // Built-in layout by room count, unless `layout` names a JSON layout file.
  int rooms = 2;
  std::string layout;
  double mazeScale = 1.0;  // geometric factor for built-in layouts

  // One value is broadcast to every cooperative policy. Ignored unless
  // method is csac.
  std::vector<double> coopRatios{0.1};

  double gamma = 0.95;
  double tau = 0.005;
  double learningRate = 3e-4;
  std::size_t bufferCapacity = 1000000;
  std::size_t batchSize = 256;
  std::size_t maxEpisodeLength = 1000;
  std::size_t evalStepsPerEpoch = 5000;
  std::size_t exploreStepsPerEpoch = 5000;
  std::size_t trainLoopsPerEpoch = 1000;
  std::size_t epochs = 3000;
  std::size_t warmup = 0;  // 0: max(batch, 1000)

  std::vector<std::size_t> hidden{256, 256};
  bool autoAlpha = true;
  double initialAlpha = 1.0;
  std::optional<double> targetEntropy;
  TargetForm targetForm = TargetForm::standard;
  CriticScaling policyCritic = CriticScaling::batchNormalized;

  double dt = 0.1;
  double maxLinearVelocity = 1.0;
  double maxAngularVelocity = std::numbers::pi;
  std::size_t beamCount = 16;
  double maxRange = 10.0;
  double exitBonus = 10.0;
  double livingCost = 0.01;

  std::uint64_t seed = 0;
  std::size_t checkpointEvery = 1;  // epochs between checkpoints
  std::size_t keepCheckpoints = 1;  // older checkpoint files are deleted
  // Off by default so metrics files are reproducible byte for byte; the
  // measured times always go to timing.csv.
  bool wallClockSeconds = false;
};

TrainConfig presetConfig(Scale scale);

// Preset for the file's (or the forced) scale, then every key in the file on
// top. Unknown keys and wrong types are ConfigErrors.
TrainConfig parseConfig(const std::string& jsonText, std::optional<Scale> forcedScale = {});
TrainConfig loadConfig(const std::filesystem::path& path, std::optional<Scale> forcedScale = {});
std::string dumpConfig(const TrainConfig& config);

// `key=value` override with the same key names as the file; value is read as
// JSON when possible, else as a string.
void applyOverride(TrainConfig& config, const std::string& assignment);

// Throws ConfigError. The first form loads the layout itself.
void validateConfig(const TrainConfig& config);
void validateConfig(const TrainConfig& config, const MazeSpec& spec);

MazeSpec buildMaze(const TrainConfig& config);
EnvConfig envConfig(const TrainConfig& config);
SacConfig sacConfig(const TrainConfig& config);
// Ratios expanded to subtaskCount - 1 entries (empty unless csac).
std::vector<double> resolvedCoopRatios(const TrainConfig& config, std::size_t subtaskCount);
CoopSettings coopSettings(const TrainConfig& config, std::size_t subtaskCount);

}  // namespace csac
