#include "csac/sweep.hpp"

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace csac {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t SweepSpec::pointCount() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.size();
  return n;
}

std::vector<double> SweepSpec::point(std::size_t i) const {
  std::vector<double> ratios(axes.size());
  for (std::size_t k = axes.size(); k-- > 0;) {
    ratios[k] = axes[k][i % axes[k].size()];
    i /= axes[k].size();
  }
  return ratios;
}

namespace {

std::vector<double> numbers(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(what + " must hold numbers only");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

SweepSpec parseSweepSpec(const std::string& jsonText, const fs::path& baseDir,
                         std::optional<Scale> forcedScale) {
  json doc = json::parse(jsonText, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("sweep spec must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    static const char* known[] = {"config", "shared", "per_policy", "seeds", "seed_count", "window", "jobs"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown sweep key '" + key + "'");
  }
  SweepSpec spec;
  if (!doc.contains("config")) {
    spec.base = presetConfig(forcedScale.value_or(Scale::desk));
  } else if (doc["config"].is_string()) {
    fs::path p = doc["config"].get<std::string>();
    if (p.is_relative()) p = baseDir / p;
    spec.base = loadConfig(p, forcedScale);
  } else {
    spec.base = parseConfig(doc["config"].dump(), forcedScale);
  }
  if (doc.contains("shared") == doc.contains("per_policy")) {
    throw ConfigError("sweep spec needs exactly one of 'shared' or 'per_policy'");
  }
  if (doc.contains("shared")) {
    spec.shared = true;
    spec.axes = {numbers(doc["shared"], "shared")};
  } else {
    spec.shared = false;
    if (!doc["per_policy"].is_array() || doc["per_policy"].empty()) {
      throw ConfigError("per_policy must be an array of value lists");
    }
    for (const auto& axis : doc["per_policy"]) spec.axes.push_back(numbers(axis, "per_policy entry"));
  }
  for (const auto& axis : spec.axes) {
    for (double eta : axis) {
      if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("sweep ratios must lie in [0, 1]");
    }
  }
  if (doc.contains("seeds") && doc.contains("seed_count")) {
    throw ConfigError("give either 'seeds' or 'seed_count', not both");
  }
  if (doc.contains("seeds")) {
    spec.seeds.clear();
    if (!doc["seeds"].is_array() || doc["seeds"].empty()) throw ConfigError("seeds must be a non-empty array");
    for (const auto& s : doc["seeds"]) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds must be non-negative integers");
      spec.seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (doc.contains("seed_count")) {
    if (!doc["seed_count"].is_number_unsigned() || doc["seed_count"].get<std::size_t>() == 0) {
      throw ConfigError("seed_count must be a positive integer");
    }
    spec.seeds.clear();
    for (std::size_t i = 0; i < doc["seed_count"].get<std::size_t>(); ++i) {
      spec.seeds.push_back(spec.base.seed + i);
    }
  }
  auto positive = [&](const char* key, std::size_t& field) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_number_unsigned() || doc[key].get<std::size_t>() == 0) {
      throw ConfigError(std::string(key) + " must be a positive integer");
    }
    field = doc[key].get<std::size_t>();
  };
  positive("window", spec.window);
  positive("jobs", spec.jobs);
  return spec;
}

double trailingMean(const std::vector<double>& values, std::size_t window) {
  if (values.empty()) return std::nan("");
  const std::size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

namespace {

fs::path runDir(const fs::path& out, std::size_t point, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "point_%03zu/seed_%llu", point, static_cast<unsigned long long>(seed));
  return out / buf;
}

// Runs one job in a child process so a crash only takes out its own cell.
pid_t launch(const RunJob& job, bool resume) {
  std::fflush(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid > 0) return pid;
  int code = 0;
  try {
    RunOptions options;
    options.resume = resume;
    runTraining(job.config, job.dir, options);
  } catch (const std::exception& e) {
    std::ofstream(job.dir / "error.txt") << e.what() << "\n";
    code = 2;
  }
  std::_Exit(code);
}

}  // namespace

std::vector<std::string> runJobs(const std::vector<RunJob>& jobs, std::size_t width, bool resume) {
  std::map<pid_t, std::size_t> running;
  std::vector<int> status(jobs.size(), -1);
  std::size_t next = 0;
  width = std::max<std::size_t>(width, 1);
  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && running.size() < width) {
      fs::create_directories(jobs[next].dir);
      fs::remove(jobs[next].dir / "error.txt");
      running[launch(jobs[next], resume)] = next;
      ++next;
    }
    int wstatus = 0;
    const pid_t done = waitpid(-1, &wstatus, 0);
    if (done < 0) throw std::runtime_error("waitpid failed");
    const auto it = running.find(done);
    if (it == running.end()) continue;
    status[it->second] = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : 128 + WTERMSIG(wstatus);
    running.erase(it);
  }
  std::vector<std::string> errors(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (status[i] == 0) continue;
    std::ifstream in(jobs[i].dir / "error.txt");
    std::getline(in, errors[i]);
    if (errors[i].empty()) errors[i] = "worker exited with status " + std::to_string(status[i]);
  }
  return errors;
}

std::vector<SweepRow> runSweep(const SweepSpec& spec, const fs::path& outDir, bool resume) {
  if (spec.base.method != Method::csac) throw ConfigError("a ratio sweep needs method csac");
  if (spec.pointCount() == 0 || spec.seeds.empty()) throw ConfigError("sweep grid is empty");

  std::vector<RunJob> jobs;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // point, seed index
  for (std::size_t p = 0; p < spec.pointCount(); ++p) {
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
      RunJob job{spec.base, runDir(outDir, p, spec.seeds[s])};
      job.config.coopRatios = spec.point(p);
      job.config.seed = spec.seeds[s];
      validateConfig(job.config);
      jobs.push_back(std::move(job));
      cells.emplace_back(p, s);
    }
  }

  std::vector<SweepRow> rows(spec.pointCount());
  for (std::size_t p = 0; p < rows.size(); ++p) {
    rows[p].ratios = spec.point(p);
    rows[p].perSeed.assign(spec.seeds.size(), std::nullopt);
  }

  const auto errors = runJobs(jobs, spec.jobs, resume);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto [p, s] = cells[i];
    SweepRow& row = rows[p];
    std::string error = errors[i];
    if (error.empty()) {
      try {
        row.perSeed[s] = trailingMean(readSuccessRates(jobs[i].dir / "metrics.csv"), spec.window);
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
    if (!error.empty()) {
      row.failed += 1;
      row.errors.push_back("seed " + std::to_string(spec.seeds[s]) + ": " + error);
    }
  }
  for (auto& row : rows) {
    std::vector<double> ok;
    for (const auto& v : row.perSeed) {
      if (v) ok.push_back(*v);
    }
    if (ok.empty()) continue;
    double sum = 0.0;
    for (double v : ok) sum += v;
    row.mean = sum / static_cast<double>(ok.size());
    double sq = 0.0;
    for (double v : ok) sq += (v - *row.mean) * (v - *row.mean);
    row.stddev = ok.size() > 1 ? std::sqrt(sq / static_cast<double>(ok.size() - 1)) : 0.0;
  }
  std::ofstream(outDir / "sweep.csv", std::ios::trunc) << sweepTable(spec, rows);
  return rows;
}

std::string sweepTable(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  std::string out = "point";
  if (spec.shared) {
    out += ",eta";
  } else {
    for (std::size_t k = 1; k <= spec.axes.size(); ++k) out += ",eta_" + std::to_string(k);
  }
  out += ",runs,failed,mean_success,std_success";
  for (auto s : spec.seeds) out += ",seed_" + std::to_string(s);
  out += "\n";
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const auto& row = rows[p];
    out += std::to_string(p);
    for (double eta : row.ratios) out += "," + num(eta);
    out += "," + std::to_string(row.perSeed.size()) + "," + std::to_string(row.failed) + ",";
    out += row.mean ? num(*row.mean) : "nan";
    out += "," + num(row.stddev);
    for (const auto& v : row.perSeed) out += "," + (v ? num(*v) : std::string("failed"));
    out += "\n";
  }
  return out;
}

}  // namespace csac
