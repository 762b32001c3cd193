#pragma once

// Grids of cooperative-ratio settings, each trained over several seeds.

#include "csac/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace csac {

struct SweepSpec {
  TrainConfig base;
  // One list for a shared ratio, or one list per cooperative policy whose
  // cartesian product forms the grid.
  std::vector<std::vector<double>> axes;
  bool shared = true;
  std::vector<std::uint64_t> seeds{0};
  std::size_t window = 50;  // trailing epochs averaged per run
  std::size_t jobs = 1;     // concurrent runs

  std::size_t pointCount() const;
  std::size_t runCount() const { return pointCount() * seeds.size(); }
  // Ratio vector of grid point i in row-major order over the axes.
  std::vector<double> point(std::size_t i) const;
};

// JSON: {"config": {...} or "path", "shared": [...] | "per_policy": [[...], ...],
//        "seeds": [...] | "seed_count": k, "window": w, "jobs": j}
// Relative config paths resolve against `baseDir`. Throws ConfigError.
SweepSpec parseSweepSpec(const std::string& jsonText, const std::filesystem::path& baseDir,
                         std::optional<Scale> forcedScale = {});

struct SweepRow {
  std::vector<double> ratios;
  std::vector<std::optional<double>> perSeed;  // trailing mean, empty if the run failed
  std::size_t failed = 0;
  std::optional<double> mean;  // over seeds that finished
  double stddev = 0.0;
  std::vector<std::string> errors;
};

struct RunJob {
  TrainConfig config;
  std::filesystem::path dir;
};

// Trains each job in its own child process, at most `width` at a time.
// Returns one entry per job: empty on success, else the error.
std::vector<std::string> runJobs(const std::vector<RunJob>& jobs, std::size_t width, bool resume);

// Runs every point x seed in out/point_PPP/seed_S and writes out/sweep.csv.
// A run that throws marks its cell failed; the sweep carries on.
std::vector<SweepRow> runSweep(const SweepSpec& spec, const std::filesystem::path& outDir,
                               bool resume = true);

std::string sweepTable(const SweepSpec& spec, const std::vector<SweepRow>& rows);

// Mean of the last `window` entries (all of them if fewer).
double trailingMean(const std::vector<double>& values, std::size_t window);

}  // namespace csac
