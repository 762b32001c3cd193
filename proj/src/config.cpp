#include "csac/config.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace csac {

using nlohmann::json;

std::string scaleName(Scale s) { return s == Scale::paper ? "paper" : "desk"; }

Scale parseScale(const std::string& name) {
  if (name == "desk") return Scale::desk;
  if (name == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + name + "' (expected desk or paper)");
}

TrainConfig presetConfig(Scale scale) {
  TrainConfig c;
  c.scale = scale;
  if (scale == Scale::paper) return c;
  // Desk scale: small rooms, short episodes and few, narrow updates so one
  // run fits in minutes on a single core. With 30k updates instead of 3M the
  // paper's tau and learning rate never carry value back from the doors, and
  // alpha starting at 1 keeps the policies near random for much of the run.
  c.mazeScale = 0.6;
  c.maxEpisodeLength = 150;
  c.tau = 0.02;
  c.learningRate = 1e-3;
  c.initialAlpha = 0.1;
  c.evalStepsPerEpoch = 1000;
  c.exploreStepsPerEpoch = 1000;
  c.trainLoopsPerEpoch = 200;
  c.epochs = 150;
  c.hidden = {64, 64};
  return c;
}

namespace {

std::string targetFormName(TargetForm f) { return f == TargetForm::literal ? "literal" : "standard"; }
std::string scalingName(CriticScaling s) { return s == CriticScaling::raw ? "raw" : "normalized"; }

double number(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number, got " + v.dump());
  return v.get<double>();
}

std::size_t count(const json& v) {
  if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer, got " + v.dump());
  return v.get<std::size_t>();
}

bool flag(const json& v) {
  if (!v.is_boolean()) throw ConfigError("expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string text(const json& v) {
  if (!v.is_string()) throw ConfigError("expected a string, got " + v.dump());
  return v.get<std::string>();
}

using Setter = std::function<void(TrainConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"method",
       [](TrainConfig& c, const json& v) {
         try {
           c.method = parseMethod(text(v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       }},
      {"rooms",
       [](TrainConfig& c, const json& v) {
         c.rooms = static_cast<int>(count(v));
         c.layout.clear();
       }},
      {"layout", [](TrainConfig& c, const json& v) { c.layout = text(v); }},
      {"maze_scale", [](TrainConfig& c, const json& v) { c.mazeScale = number(v); }},
      {"coop_ratios",
       [](TrainConfig& c, const json& v) {
         c.coopRatios.clear();
         if (v.is_array()) {
           for (const auto& x : v) c.coopRatios.push_back(number(x));
         } else {
           c.coopRatios.push_back(number(v));
         }
       }},
      {"gamma", [](TrainConfig& c, const json& v) { c.gamma = number(v); }},
      {"tau", [](TrainConfig& c, const json& v) { c.tau = number(v); }},
      {"learning_rate", [](TrainConfig& c, const json& v) { c.learningRate = number(v); }},
      {"buffer_capacity", [](TrainConfig& c, const json& v) { c.bufferCapacity = count(v); }},
      {"batch_size", [](TrainConfig& c, const json& v) { c.batchSize = count(v); }},
      {"max_episode_length", [](TrainConfig& c, const json& v) { c.maxEpisodeLength = count(v); }},
      {"eval_steps_per_epoch", [](TrainConfig& c, const json& v) { c.evalStepsPerEpoch = count(v); }},
      {"explore_steps_per_epoch",
       [](TrainConfig& c, const json& v) { c.exploreStepsPerEpoch = count(v); }},
      {"train_loops_per_epoch",
       [](TrainConfig& c, const json& v) { c.trainLoopsPerEpoch = count(v); }},
      {"epochs", [](TrainConfig& c, const json& v) { c.epochs = count(v); }},
      {"warmup", [](TrainConfig& c, const json& v) { c.warmup = count(v); }},
      {"hidden",
       [](TrainConfig& c, const json& v) {
         if (!v.is_array()) throw ConfigError("expected an array of layer widths");
         c.hidden.clear();
         for (const auto& x : v) c.hidden.push_back(count(x));
       }},
      {"auto_alpha", [](TrainConfig& c, const json& v) { c.autoAlpha = flag(v); }},
      {"initial_alpha", [](TrainConfig& c, const json& v) { c.initialAlpha = number(v); }},
      {"target_entropy",
       [](TrainConfig& c, const json& v) {
         if (v.is_null()) {
           c.targetEntropy.reset();
         } else {
           c.targetEntropy = number(v);
         }
       }},
      {"target_form",
       [](TrainConfig& c, const json& v) {
         const std::string s = text(v);
         if (s == "standard") {
           c.targetForm = TargetForm::standard;
         } else if (s == "literal") {
           c.targetForm = TargetForm::literal;
         } else {
           throw ConfigError("unknown target_form '" + s + "' (expected standard or literal)");
         }
       }},
      {"policy_critic",
       [](TrainConfig& c, const json& v) {
         const std::string s = text(v);
         if (s == "raw") {
           c.policyCritic = CriticScaling::raw;
         } else if (s == "normalized") {
           c.policyCritic = CriticScaling::batchNormalized;
         } else {
           throw ConfigError("unknown policy_critic '" + s + "' (expected raw or normalized)");
         }
       }},
      {"dt", [](TrainConfig& c, const json& v) { c.dt = number(v); }},
      {"max_linear_velocity", [](TrainConfig& c, const json& v) { c.maxLinearVelocity = number(v); }},
      {"max_angular_velocity",
       [](TrainConfig& c, const json& v) { c.maxAngularVelocity = number(v); }},
      {"beam_count", [](TrainConfig& c, const json& v) { c.beamCount = count(v); }},
      {"max_range", [](TrainConfig& c, const json& v) { c.maxRange = number(v); }},
      {"exit_bonus", [](TrainConfig& c, const json& v) { c.exitBonus = number(v); }},
      {"living_cost", [](TrainConfig& c, const json& v) { c.livingCost = number(v); }},
      {"seed", [](TrainConfig& c, const json& v) { c.seed = count(v); }},
      {"checkpoint_every", [](TrainConfig& c, const json& v) { c.checkpointEvery = count(v); }},
      {"keep_checkpoints", [](TrainConfig& c, const json& v) { c.keepCheckpoints = count(v); }},
      {"wall_clock_seconds", [](TrainConfig& c, const json& v) { c.wallClockSeconds = flag(v); }},
  };
  return table;
}

void applyKey(TrainConfig& config, const std::string& key, const json& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

TrainConfig parseConfig(const std::string& jsonText, std::optional<Scale> forcedScale) {
  json doc;
  try {
    doc = json::parse(jsonText);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  Scale scale = Scale::desk;
  if (doc.contains("scale")) scale = parseScale(text(doc["scale"]));
  if (forcedScale) scale = *forcedScale;
  TrainConfig config = presetConfig(scale);
  // "rooms" clears "layout", so apply it first whatever the file order.
  if (doc.contains("rooms")) applyKey(config, "rooms", doc["rooms"]);
  for (const auto& [key, value] : doc.items()) {
    if (key == "scale" || key == "rooms") continue;
    applyKey(config, key, value);
  }
  return config;
}

TrainConfig loadConfig(const std::filesystem::path& path, std::optional<Scale> forcedScale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parseConfig(ss.str(), forcedScale);
}

std::string dumpConfig(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["scale"] = scaleName(c.scale);
  j["method"] = methodName(c.method);
  if (c.layout.empty()) {
    j["rooms"] = c.rooms;
  } else {
    j["layout"] = c.layout;
  }
  j["maze_scale"] = c.mazeScale;
  j["coop_ratios"] = c.coopRatios;
  j["gamma"] = c.gamma;
  j["tau"] = c.tau;
  j["learning_rate"] = c.learningRate;
  j["buffer_capacity"] = c.bufferCapacity;
  j["batch_size"] = c.batchSize;
  j["max_episode_length"] = c.maxEpisodeLength;
  j["eval_steps_per_epoch"] = c.evalStepsPerEpoch;
  j["explore_steps_per_epoch"] = c.exploreStepsPerEpoch;
  j["train_loops_per_epoch"] = c.trainLoopsPerEpoch;
  j["epochs"] = c.epochs;
  j["warmup"] = c.warmup;
  j["hidden"] = c.hidden;
  j["auto_alpha"] = c.autoAlpha;
  j["initial_alpha"] = c.initialAlpha;
  j["target_entropy"] = c.targetEntropy ? json(*c.targetEntropy) : json(nullptr);
  j["target_form"] = targetFormName(c.targetForm);
  j["policy_critic"] = scalingName(c.policyCritic);
  j["dt"] = c.dt;
  j["max_linear_velocity"] = c.maxLinearVelocity;
  j["max_angular_velocity"] = c.maxAngularVelocity;
  j["beam_count"] = c.beamCount;
  j["max_range"] = c.maxRange;
  j["exit_bonus"] = c.exitBonus;
  j["living_cost"] = c.livingCost;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpointEvery;
  j["keep_checkpoints"] = c.keepCheckpoints;
  j["wall_clock_seconds"] = c.wallClockSeconds;
  return j.dump(2);
}

void applyOverride(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  if (key == "scale") throw ConfigError("use --scale to change the scale preset");
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  applyKey(config, key, value);
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void validateScalars(const TrainConfig& c) {
  require(c.gamma > 0.0 && c.gamma < 1.0, "gamma must lie in (0, 1)");
  require(c.tau > 0.0 && c.tau <= 1.0, "tau must lie in (0, 1]");
  require(c.learningRate > 0.0, "learning_rate must be positive");
  require(c.batchSize > 0, "batch_size must be positive");
  require(c.bufferCapacity >= c.batchSize, "buffer_capacity must hold at least one batch");
  require(c.maxEpisodeLength > 0, "max_episode_length must be positive");
  require(!c.hidden.empty(), "hidden needs at least one layer");
  for (std::size_t w : c.hidden) require(w > 0, "hidden layer widths must be positive");
  require(c.initialAlpha > 0.0 || (!c.autoAlpha && c.initialAlpha == 0.0),
          "initial_alpha must be positive (or 0 with auto_alpha off)");
  require(c.mazeScale > 0.0, "maze_scale must be positive");
  require(c.dt > 0.0 && c.maxLinearVelocity > 0.0 && c.maxAngularVelocity > 0.0,
          "dt and velocity limits must be positive");
  require(c.beamCount > 0 && c.maxRange > 0.0, "laser needs at least one beam and a positive range");
  require(c.checkpointEvery > 0, "checkpoint_every must be positive");
  require(c.keepCheckpoints > 0, "keep_checkpoints must be positive");
}

}  // namespace

void validateConfig(const TrainConfig& c) {
  validateScalars(c);
  if (c.layout.empty()) require(c.rooms >= 2 && c.rooms <= 4, "rooms must be 2, 3 or 4");
  validateConfig(c, buildMaze(c));
}

void validateConfig(const TrainConfig& c, const MazeSpec& spec) {
  validateScalars(c);
  const MazeReport report = validateMaze(spec);
  if (!report.valid) {
    std::string message = "maze layout is invalid:";
    for (const auto& p : report.problems) message += " " + p + ";";
    throw ConfigError(message);
  }
  if (c.method == Method::csac) {
    const std::size_t n = spec.roomCount();
    require(c.coopRatios.size() == 1 || c.coopRatios.size() + 1 == n,
            "coop_ratios needs 1 or " + std::to_string(n - 1) + " values for " +
                std::to_string(n) + " rooms");
    for (double eta : c.coopRatios) {
      require(eta >= 0.0 && eta <= 1.0, "coop_ratios values must lie in [0, 1]");
    }
  }
}

MazeSpec buildMaze(const TrainConfig& c) {
  if (!c.layout.empty()) {
    try {
      return loadMazeLayout(c.layout);
    } catch (const std::exception& e) {
      throw ConfigError("cannot load layout " + c.layout + ": " + e.what());
    }
  }
  try {
    return builtinMaze(c.rooms, MazeGeometry{}.scaled(c.mazeScale));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

EnvConfig envConfig(const TrainConfig& c) {
  EnvConfig e;
  e.dt = c.dt;
  e.maxLinearVelocity = c.maxLinearVelocity;
  e.maxAngularVelocity = c.maxAngularVelocity;
  e.beamCount = c.beamCount;
  e.maxRange = c.maxRange;
  e.exitBonus = c.exitBonus;
  e.livingCost = c.livingCost;
  e.maxEpisodeSteps = c.maxEpisodeLength;
  return e;
}

SacConfig sacConfig(const TrainConfig& c) {
  SacConfig s;
  s.hidden = c.hidden;
  s.gamma = c.gamma;
  s.tau = c.tau;
  s.learningRate = c.learningRate;
  s.autoAlpha = c.autoAlpha;
  s.initialAlpha = c.initialAlpha;
  s.targetEntropy = c.targetEntropy;
  s.targetForm = c.targetForm;
  s.policyCritic = c.policyCritic;
  return s;
}

std::vector<double> resolvedCoopRatios(const TrainConfig& c, std::size_t subtaskCount) {
  if (c.method != Method::csac || subtaskCount < 2) return {};
  if (c.coopRatios.size() == 1) return std::vector<double>(subtaskCount - 1, c.coopRatios[0]);
  return c.coopRatios;
}

CoopSettings coopSettings(const TrainConfig& c, std::size_t subtaskCount) {
  CoopSettings s;
  s.method = c.method;
  s.coopRatios = resolvedCoopRatios(c, subtaskCount);
  s.batchSize = c.batchSize;
  s.warmup = c.warmup == 0 ? warmupThreshold(c.batchSize) : c.warmup;
  return s;
}

}  // namespace csac
