#include "csac/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

namespace csac {

namespace fs = std::filesystem;

#ifndef CSAC_CODE_VERSION
#define CSAC_CODE_VERSION "unknown"
#endif

std::string codeVersion() { return CSAC_CODE_VERSION; }

namespace {

constexpr const char* kCheckpointFormat = "csac-checkpoint/1";
constexpr std::uint64_t kEvalStream = 200;
constexpr std::uint64_t kExploreStream = 201;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string num(const std::optional<double>& v) {
  return v ? num(*v) : "nan";
}

}  // namespace

double successRate(std::size_t successes, std::size_t episodes) {
  if (episodes == 0) return 0.0;
  return static_cast<double>(successes) / static_cast<double>(episodes);
}

std::string metricsHeader(std::size_t n) {
  std::string h = "epoch,env_steps,eval_success_rate";
  for (const char* name : {"return_sub", "q_loss_", "pi_loss_", "alpha_"}) {
    for (std::size_t j = 1; j <= n; ++j) h += "," + std::string(name) + std::to_string(j);
  }
  return h + ",seconds";
}

std::string metricsRow(const EpochStats& s, bool wallClock) {
  std::string row = std::to_string(s.epoch) + "," + std::to_string(s.envSteps) + "," +
                    num(s.evalSuccessRate);
  for (double r : s.meanReturns) row += "," + num(r);
  for (const auto& v : s.criticLoss) row += "," + num(v);
  for (const auto& v : s.policyLoss) row += "," + num(v);
  for (const auto& v : s.alpha) row += "," + num(v);
  return row + "," + (wallClock ? num(s.seconds) : "0");
}

EvalSummary evaluateEpisodes(std::vector<AgentBundle>& bundles, Method method, MazeEnv& env,
                             std::size_t episodes, Rng& rng) {
  EvalSummary out;
  out.meanReturns.assign(env.subtaskCount(), 0.0);
  for (std::size_t i = 0; i < episodes; ++i) {
    const EpisodeLog log = gatherEpisode(bundles, method, env, ResetMode::evaluation, rng,
                                         env.config().maxEpisodeSteps);
    out.episodes += 1;
    out.successes += log.success ? 1 : 0;
    for (std::size_t j = 0; j < log.returns.size(); ++j) out.meanReturns[j] += log.returns[j];
  }
  if (out.episodes > 0) {
    out.successRate = successRate(out.successes, out.episodes);
    for (double& r : out.meanReturns) r /= static_cast<double>(out.episodes);
  }
  return out;
}

Trainer::Trainer(TrainConfig config, std::optional<MazeSpec> maze)
    : config_(std::move(config)),
      env_(maze ? std::move(*maze) : buildMaze(config_), envConfig(config_)),
      settings_(coopSettings(config_, env_.subtaskCount())),
      evalRng_(Rng::derived(config_.seed, kEvalStream)),
      exploreRng_(Rng::derived(config_.seed, kExploreStream)) {
  validateConfig(config_, env_.spec());
  try {
    validateSettings(settings_, env_.subtaskCount());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bundles_ = makeBundles(config_.method, env_.subtaskCount(), env_.featureDim(), 2,
                         sacConfig(config_), config_.bufferCapacity, config_.seed);
  audit_ = TrainAudit(bundles_.size());
}

EpochStats Trainer::runEpoch() {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = env_.subtaskCount();
  EpochStats stats;
  stats.meanReturns.assign(n, 0.0);

  // Evaluation: deterministic actions, nothing stored. An episode still
  // running when the budget ends is left out of the success rate.
  std::size_t remaining = config_.evalStepsPerEpoch;
  while (remaining > 0) {
    const EpisodeLog log =
        gatherEpisode(bundles_, config_.method, env_, ResetMode::evaluation, evalRng_, remaining);
    remaining -= log.steps;
    if (!log.finished) continue;
    stats.evalEpisodes += 1;
    stats.evalSuccesses += log.success ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) stats.meanReturns[j] += log.returns[j];
  }
  stats.evalSuccessRate = successRate(stats.evalSuccesses, stats.evalEpisodes);
  if (stats.evalEpisodes > 0) {
    for (double& r : stats.meanReturns) r /= static_cast<double>(stats.evalEpisodes);
  } else {
    stats.meanReturns.assign(n, std::numeric_limits<double>::quiet_NaN());
  }

  std::uint64_t pushedBefore = 0;
  for (const auto& b : bundles_) pushedBefore += b.buffer.totalPushed();
  remaining = config_.exploreStepsPerEpoch;
  while (remaining > 0) {
    remaining -= gatherEpisode(bundles_, config_.method, env_, ResetMode::exploration,
                               exploreRng_, remaining)
                     .steps;
  }
  for (const auto& b : bundles_) stats.bufferWrites += b.buffer.totalPushed();
  stats.bufferWrites -= pushedBefore;

  LossTotals totals(bundles_.size());
  for (std::size_t i = 0; i < config_.trainLoopsPerEpoch; ++i) {
    trainLoop(bundles_, settings_, &audit_, &totals);
  }

  epoch_ += 1;
  envSteps_ += config_.evalStepsPerEpoch + config_.exploreStepsPerEpoch;
  stats.epoch = epoch_;
  stats.envSteps = envSteps_;
  stats.criticLoss.assign(n, std::nullopt);
  stats.policyLoss.assign(n, std::nullopt);
  stats.alpha.assign(n, std::nullopt);
  for (std::size_t b = 0; b < bundles_.size(); ++b) {
    stats.criticLoss[b] = totals.meanCritic(b);
    stats.policyLoss[b] = totals.meanPolicy(b);
    stats.alpha[b] = bundles_[b].agent.alpha();
  }
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return stats;
}

namespace {

Matrix countsMatrix(const std::vector<std::vector<std::uint64_t>>& counts) {
  const Index n = static_cast<Index>(counts.size());
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) m(i, j) = static_cast<double>(counts[i][j]);
  }
  return m;
}

void countsFrom(const Matrix& m, std::vector<std::vector<std::uint64_t>>& counts) {
  if (m.rows() != static_cast<Index>(counts.size())) {
    throw std::runtime_error("checkpoint audit has the wrong bundle count");
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) counts[i][j] = static_cast<std::uint64_t>(m(i, j));
  }
}

}  // namespace

Archive Trainer::checkpoint() const {
  Archive a;
  a.put("format", std::string(kCheckpointFormat));
  a.put("code_version", codeVersion());
  a.put("config", dumpConfig(config_));
  a.put("maze", dumpMazeLayout(env_.spec()));
  a.put("epoch", static_cast<std::uint64_t>(epoch_));
  a.put("env_steps", envSteps_);
  a.put("rng/eval", evalRng_.serialize());
  a.put("rng/explore", exploreRng_.serialize());
  a.put("audit/loops", audit_.loops);
  a.put("audit/critic_updates", countsMatrix(audit_.criticUpdates));
  a.put("audit/policy_reads", countsMatrix(audit_.policyCriticReads));
  saveBundles(a, bundles_);
  return a;
}

TrainConfig checkpointConfig(const Archive& archive) {
  if (!archive.contains("format") || archive.text("format") != kCheckpointFormat) {
    throw std::runtime_error("not a training checkpoint (missing or unknown format tag)");
  }
  return parseConfig(archive.text("config"));
}

MazeSpec checkpointMaze(const Archive& archive) { return parseMazeLayout(archive.text("maze")); }

void Trainer::restore(const Archive& a) {
  checkpointConfig(a);
  loadBundles(a, bundles_);
  epoch_ = static_cast<std::size_t>(a.integer("epoch"));
  envSteps_ = a.integer("env_steps");
  evalRng_.deserialize(a.text("rng/eval"));
  exploreRng_.deserialize(a.text("rng/explore"));
  audit_.loops = a.integer("audit/loops");
  countsFrom(a.matrix("audit/critic_updates"), audit_.criticUpdates);
  countsFrom(a.matrix("audit/policy_reads"), audit_.policyCriticReads);
}

Trainer Trainer::fromCheckpoint(const Archive& archive) {
  Trainer t(checkpointConfig(archive), checkpointMaze(archive));
  t.restore(archive);
  return t;
}

Trainer Trainer::fromCheckpoint(const fs::path& path) { return fromCheckpoint(Archive::load(path)); }

namespace {

fs::path checkpointPath(const fs::path& outDir, std::size_t epoch) {
  char name[40];
  std::snprintf(name, sizeof name, "epoch_%06zu.ckpt", epoch);
  return outDir / "checkpoints" / name;
}

std::vector<fs::path> checkpointFiles(const fs::path& outDir) {
  std::vector<fs::path> files;
  const fs::path dir = outDir / "checkpoints";
  if (!fs::is_directory(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("epoch_") && name.ends_with(".ckpt")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

fs::path writeCheckpoint(const Trainer& trainer, const fs::path& outDir) {
  const fs::path path = checkpointPath(outDir, trainer.epoch());
  fs::path tmp = path;
  tmp += ".tmp";
  trainer.checkpoint().save(tmp);
  fs::rename(tmp, path);
  auto files = checkpointFiles(outDir);
  const std::size_t keep = trainer.config().keepCheckpoints;
  for (std::size_t i = 0; i + keep < files.size(); ++i) fs::remove(files[i]);
  return path;
}

// Fields that may change between a run and its resumption.
TrainConfig withoutRunControls(TrainConfig c) {
  c.epochs = 0;
  c.checkpointEvery = 1;
  c.keepCheckpoints = 1;
  c.wallClockSeconds = false;
  return c;
}

void keepLeadingRows(const fs::path& csv, std::size_t epochs) {
  if (!fs::exists(csv)) return;
  std::ifstream in(csv);
  std::string line;
  std::string kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    const std::size_t epoch = std::stoull(line.substr(0, line.find(',')));
    if (epoch <= epochs) kept += line + "\n";
  }
  in.close();
  std::ofstream(csv, std::ios::trunc) << kept;
}

void appendLine(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  out << line << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string utcNow() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void writeManifest(const Trainer& trainer, const fs::path& outDir, std::size_t startEpoch) {
  using nlohmann::ordered_json;
  const TrainConfig& c = trainer.config();
  const MazeReport maze = validateMaze(trainer.env().spec());
  ordered_json m;
  m["code_version"] = codeVersion();
  m["created_utc"] = utcNow();
  m["resumed_from_epoch"] = startEpoch;
  m["config"] = ordered_json::parse(dumpConfig(c));
  m["seeds"] = {{"run", c.seed},
                {"streams",
                 {{"bundle_n", "derived(seed, n)"},
                  {"bundle_init_n", "derived(seed, 1000 + n)"},
                  {"evaluation", "derived(seed, 200)"},
                  {"exploration", "derived(seed, 201)"}}}};
  m["maze"] = {{"rooms", maze.rooms},
               {"transitions", maze.transitions},
               {"dead_end_pockets", maze.deadEndPockets}};
  const auto& settings = trainer.settings();
  const auto& agent = trainer.bundles().front().agent;
  m["constants"] = {{"state_dim", agent.stateDim()},
                    {"action_dim", agent.actionDim()},
                    {"bundles", trainer.bundles().size()},
                    {"coop_ratios", settings.coopRatios},
                    {"warmup", settings.warmup},
                    {"target_entropy", agent.targetEntropy()},
                    {"normalize_epsilon", kNormalizeEpsilon},
                    {"log_std_bounds", {agent.config().logStdBounds.lo, agent.config().logStdBounds.hi}},
                    {"checkpoint_format", kCheckpointFormat}};
  std::ofstream(outDir / "manifest.json", std::ios::trunc) << m.dump(2) << "\n";
}

}  // namespace

std::optional<fs::path> latestCheckpoint(const fs::path& outDir) {
  auto files = checkpointFiles(outDir);
  if (files.empty()) return std::nullopt;
  return files.back();
}

RunResult runTraining(const TrainConfig& config, const fs::path& outDir, const RunOptions& options) {
  validateConfig(config);
  fs::create_directories(outDir / "checkpoints");
  const fs::path metrics = outDir / "metrics.csv";
  const fs::path timing = outDir / "timing.csv";

  RunResult result;
  std::optional<Trainer> trainer;
  const auto existing = options.resume ? latestCheckpoint(outDir) : std::nullopt;
  if (existing) {
    const Archive archive = Archive::load(*existing);
    if (dumpConfig(withoutRunControls(checkpointConfig(archive))) !=
        dumpConfig(withoutRunControls(config))) {
      throw ConfigError("out-dir " + outDir.string() +
                        " holds a run with a different config; pick another directory or start fresh");
    }
    trainer.emplace(config, checkpointMaze(archive));
    trainer->restore(archive);
    result.startEpoch = trainer->epoch();
    result.lastCheckpoint = *existing;
    keepLeadingRows(metrics, result.startEpoch);
    keepLeadingRows(timing, result.startEpoch);
  } else {
    for (const auto& f : checkpointFiles(outDir)) fs::remove(f);
    trainer.emplace(config);
    std::ofstream(metrics, std::ios::trunc) << metricsHeader(trainer->env().subtaskCount()) << "\n";
    std::ofstream(timing, std::ios::trunc) << "epoch,seconds\n";
    result.lastCheckpoint = writeCheckpoint(*trainer, outDir);
  }
  writeManifest(*trainer, outDir, result.startEpoch);

  while (trainer->epoch() < config.epochs) {
    EpochStats stats = trainer->runEpoch();
    appendLine(metrics, metricsRow(stats, config.wallClockSeconds));
    appendLine(timing, std::to_string(stats.epoch) + "," + num(stats.seconds));
    if (stats.epoch % config.checkpointEvery == 0 || stats.epoch == config.epochs) {
      result.lastCheckpoint = writeCheckpoint(*trainer, outDir);
    }
    if (options.onEpoch) options.onEpoch(stats);
    result.epochs.push_back(std::move(stats));
  }
  return result;
}

std::vector<double> readSuccessRates(const fs::path& metricsCsv) {
  std::ifstream in(metricsCsv);
  if (!in) throw std::runtime_error("cannot read " + metricsCsv.string());
  std::string line;
  std::getline(in, line);
  std::size_t column = 0;
  {
    std::stringstream header(line);
    std::string cell;
    bool found = false;
    for (std::size_t i = 0; std::getline(header, cell, ','); ++i) {
      if (cell == "eval_success_rate") {
        column = i;
        found = true;
      }
    }
    if (!found) throw std::runtime_error(metricsCsv.string() + " has no eval_success_rate column");
  }
  std::vector<double> rates;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    for (std::size_t i = 0; i <= column; ++i) std::getline(row, cell, ',');
    rates.push_back(std::stod(cell));
  }
  return rates;
}

}  // namespace csac
