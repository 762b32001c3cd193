#include "csac/maze.hpp"

#include <json.hpp>

#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csac {

using nlohmann::json;

std::optional<std::size_t> MazeSpec::roomAt(Vec2 p) const {
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    if (rooms[i].contains(p)) return i;
  }
  return std::nullopt;
}

Rect MazeSpec::bounds() const {
  if (rooms.empty()) return {};
  Rect b = rooms.front();
  for (const auto& r : rooms) {
    b.xMin = std::min(b.xMin, r.xMin);
    b.yMin = std::min(b.yMin, r.yMin);
    b.xMax = std::max(b.xMax, r.xMax);
    b.yMax = std::max(b.yMax, r.yMax);
  }
  return b;
}

MazeGeometry MazeGeometry::scaled(double factor) const {
  MazeGeometry g = *this;
  for (double* v : {&g.roomWidth, &g.roomHeight, &g.doorWidth, &g.safeDoorInset, &g.pocketDepth,
                    &g.pocketHeight, &g.goalDepth}) {
    *v *= factor;
  }
  return g;
}

MazeSpec builtinMaze(int roomCount, const MazeGeometry& g) {
  if (roomCount < 2 || roomCount > 4) {
    throw std::invalid_argument("builtinMaze: supported room counts are 2, 3 and 4, got " +
                                std::to_string(roomCount));
  }
  const double w = g.roomWidth;
  const double h = g.roomHeight;
  const double total = w * roomCount;
  const double mid = 0.5 * h;
  const double halfDoor = 0.5 * g.doorWidth;

  MazeSpec spec;
  for (int j = 0; j < roomCount; ++j) spec.rooms.push_back({j * w, 0.0, (j + 1) * w, h});

  spec.walls.push_back({{0.0, 0.0}, {total, 0.0}});
  spec.walls.push_back({{0.0, h}, {total, h}});
  spec.walls.push_back({{0.0, 0.0}, {0.0, h}});
  spec.walls.push_back({{total, 0.0}, {total, h}});

  for (int t = 0; t + 1 < roomCount; ++t) {
    const double x = (t + 1) * w;
    const Segment trap{{x, mid - halfDoor}, {x, mid + halfDoor}};
    const bool safeOnTop = t % 2 == 0;
    const Segment safe = safeOnTop
                             ? Segment{{x, h - g.safeDoorInset - g.doorWidth}, {x, h - g.safeDoorInset}}
                             : Segment{{x, g.safeDoorInset}, {x, g.safeDoorInset + g.doorWidth}};

    // Wall pieces between the two gaps, ordered bottom to top.
    const Segment& lower = safeOnTop ? trap : safe;
    const Segment& upper = safeOnTop ? safe : trap;
    spec.walls.push_back({{x, 0.0}, lower.a});
    spec.walls.push_back({lower.b, upper.a});
    spec.walls.push_back({upper.b, {x, h}});

    RoomTransition tr;
    tr.doors = {Door{trap}, Door{safe}};
    tr.deadEndDoor = 0;
    tr.pocket = {x, mid - 0.5 * g.pocketHeight, x + g.pocketDepth, mid + 0.5 * g.pocketHeight};
    spec.walls.push_back({{x, tr.pocket.yMin}, {tr.pocket.xMax, tr.pocket.yMin}});
    spec.walls.push_back({{x, tr.pocket.yMax}, {tr.pocket.xMax, tr.pocket.yMax}});
    spec.walls.push_back({{tr.pocket.xMax, tr.pocket.yMin}, {tr.pocket.xMax, tr.pocket.yMax}});
    spec.transitions.push_back(tr);
  }

  // Start sits left of centre and a little below the trap door, so the trap
  // is clearly the shorter way out.
  spec.startArea = {0.15 * w, 0.25 * h, 0.4 * w, 0.45 * h};
  spec.goalArea = {total - g.goalDepth, 0.0, total, h};
  return spec;
}

namespace {

class FreeSpaceGrid {
 public:
  FreeSpaceGrid(const MazeSpec& spec, std::vector<Segment> blockers) : spec_(spec), walls_(spec.walls) {
    walls_.insert(walls_.end(), blockers.begin(), blockers.end());
    const Rect b = spec.bounds();
    double minDim = b.width();
    for (const auto& r : spec.rooms) minDim = std::min({minDim, r.width(), r.height()});
    cell_ = minDim / 60.0;
    origin_ = {b.xMin, b.yMin};
    nx_ = static_cast<long>(std::ceil(b.width() / cell_));
    ny_ = static_cast<long>(std::ceil(b.height() / cell_));
  }

  std::optional<long> cellOf(Vec2 p) const {
    const long i = static_cast<long>((p.x - origin_.x) / cell_);
    const long j = static_cast<long>((p.y - origin_.y) / cell_);
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return std::nullopt;
    return j * nx_ + i;
  }

  Vec2 centerOf(long c) const {
    return {origin_.x + (c % nx_ + 0.5) * cell_, origin_.y + (c / nx_ + 0.5) * cell_};
  }

  bool free(long c) const { return spec_.roomAt(centerOf(c)).has_value(); }

  bool passable(Vec2 a, Vec2 b) const {
    for (const auto& w : walls_) {
      if (sweepHit(a, b, w)) return false;
    }
    return true;
  }

  // Cells reachable from `from` without crossing any wall.
  std::vector<char> reach(Vec2 from) const {
    std::vector<char> seen(static_cast<std::size_t>(nx_ * ny_), 0);
    auto start = cellOf(from);
    if (!start || !free(*start)) return seen;
    std::deque<long> queue{*start};
    seen[*start] = 1;
    while (!queue.empty()) {
      const long c = queue.front();
      queue.pop_front();
      const long ci = c % nx_;
      const long cj = c / nx_;
      const long di[] = {1, -1, 0, 0};
      const long dj[] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const long ni = ci + di[k];
        const long nj = cj + dj[k];
        if (ni < 0 || nj < 0 || ni >= nx_ || nj >= ny_) continue;
        const long n = nj * nx_ + ni;
        if (seen[n] || !free(n) || !passable(centerOf(c), centerOf(n))) continue;
        seen[n] = 1;
        queue.push_back(n);
      }
    }
    return seen;
  }

  long cellCount() const { return nx_ * ny_; }

 private:
  const MazeSpec& spec_;
  std::vector<Segment> walls_;
  double cell_ = 0.0;
  Vec2 origin_;
  long nx_ = 0;
  long ny_ = 0;
};

bool onSegment(Vec2 p, const Segment& s, double tol = 1e-9) { return pointSegmentDistance(p, s) <= tol; }

}  // namespace

MazeReport validateMaze(const MazeSpec& spec) {
  MazeReport report;
  auto problem = [&](std::string msg) {
    report.valid = false;
    report.problems.push_back(std::move(msg));
  };
  const std::size_t n = spec.rooms.size();
  report.rooms = n;
  report.transitions = spec.transitions.size();
  if (n == 0) {
    problem("maze has no rooms");
    return report;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Rect& r = spec.rooms[i];
    if (!(r.width() > 0.0 && r.height() > 0.0)) problem("room " + std::to_string(i + 1) + " is degenerate");
    for (std::size_t k = i + 1; k < n; ++k) {
      if (r.overlaps(spec.rooms[k])) {
        problem("rooms " + std::to_string(i + 1) + " and " + std::to_string(k + 1) + " overlap");
      }
    }
    if (i > 0 && spec.rooms[i].xMin < spec.rooms[i - 1].xMax - 1e-9) {
      problem("room " + std::to_string(i + 1) + " is not ordered after room " + std::to_string(i));
    }
  }
  if (spec.transitions.size() + 1 != n) {
    problem("expected " + std::to_string(n - 1) + " room transitions, found " +
            std::to_string(spec.transitions.size()));
    return report;
  }

  for (std::size_t t = 0; t < spec.transitions.size(); ++t) {
    const auto& tr = spec.transitions[t];
    const std::string label = "transition " + std::to_string(t + 1) + "->" + std::to_string(t + 2);
    const Rect& from = spec.rooms[t];
    const Rect& to = spec.rooms[t + 1];
    if (tr.deadEndDoor > 1) {
      problem(label + ": dead-end door index must be 0 or 1");
      continue;
    }
    for (const auto& door : tr.doors) {
      const Vec2 m = door.gap.midpoint();
      if (!from.containsClosed(door.gap.a) || !from.containsClosed(door.gap.b) ||
          !to.containsClosed(door.gap.a) || !to.containsClosed(door.gap.b)) {
        problem(label + ": door is not on the shared wall");
      }
      for (const auto& w : spec.walls) {
        if (onSegment(m, w, 1e-6)) problem(label + ": door gap is covered by a wall");
      }
    }
    if (!to.containsRect(tr.pocket)) problem(label + ": pocket lies outside the next room");
    ++report.deadEndPockets;

    // The trap door must open into the pocket and the pocket must have no
    // other way out.
    const Segment& trap = tr.trapDoor().gap;
    const Vec2 along = trap.b - trap.a;
    const Vec2 normal = (1.0 / along.norm()) * Vec2{-along.y, along.x};
    const double probe = 1e-3 * std::min(to.width(), to.height());
    const Vec2 sideA = trap.midpoint() + probe * normal;
    const Vec2 sideB = trap.midpoint() - probe * normal;
    const Vec2 inside = to.contains(sideA) ? sideA : sideB;
    if (!tr.pocket.contains(inside)) problem(label + ": dead-end door does not open into the pocket");

    FreeSpaceGrid sealed(spec, {trap});
    const auto reached = sealed.reach(tr.pocket.center());
    bool leaks = false;
    for (long c = 0; c < sealed.cellCount(); ++c) {
      if (reached[c] && !tr.pocket.containsClosed(sealed.centerOf(c), 1e-6)) leaks = true;
    }
    if (leaks) problem(label + ": pocket is reachable other than through its door");

    const Vec2 centre = from.center();
    if (distance(centre, tr.trapDoor().gap.midpoint()) >= distance(centre, tr.safeDoor().gap.midpoint())) {
      report.warnings.push_back(label + ": dead-end door is not the nearer exit from the room centre");
    }
  }

  if (!spec.rooms.front().containsRect(spec.startArea)) problem("start area is not inside the first room");
  if (!spec.rooms.back().containsRect(spec.goalArea)) problem("goal area is not inside the last room");

  if (report.valid) {
    FreeSpaceGrid grid(spec, {});
    const auto reached = grid.reach(spec.startArea.center());
    bool goalReached = false;
    for (long c = 0; c < grid.cellCount(); ++c) {
      if (reached[c] && spec.goalArea.contains(grid.centerOf(c))) goalReached = true;
    }
    if (!goalReached) problem("goal area is not reachable from the start area");
  }
  return report;
}

namespace {

json rectJson(const Rect& r) { return json::array({r.xMin, r.yMin, r.xMax, r.yMax}); }
json segmentJson(const Segment& s) { return json::array({s.a.x, s.a.y, s.b.x, s.b.y}); }

std::array<double, 4> quad(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) {
    throw std::runtime_error(std::string("maze layout: ") + what + " must be an array of 4 numbers");
  }
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw std::runtime_error(std::string("maze layout: ") + what + " has a non-number");
    v[i] = j[i].get<double>();
  }
  return v;
}

Rect parseRect(const json& j, const char* what) {
  auto v = quad(j, what);
  return {v[0], v[1], v[2], v[3]};
}

Segment parseSegment(const json& j, const char* what) {
  auto v = quad(j, what);
  return {{v[0], v[1]}, {v[2], v[3]}};
}

const json& field(const json& obj, const char* key) {
  if (!obj.contains(key)) throw std::runtime_error(std::string("maze layout: missing key '") + key + "'");
  return obj.at(key);
}

}  // namespace

MazeSpec parseMazeLayout(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("maze layout: ") + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("maze layout: top level must be an object");
  MazeSpec spec;
  for (const auto& r : field(doc, "rooms")) spec.rooms.push_back(parseRect(r, "room"));
  for (const auto& w : field(doc, "walls")) spec.walls.push_back(parseSegment(w, "wall"));
  for (const auto& t : field(doc, "transitions")) {
    RoomTransition tr;
    const auto& doors = field(t, "doors");
    if (!doors.is_array() || doors.size() != 2) {
      throw std::runtime_error("maze layout: each transition needs exactly two doors");
    }
    tr.doors = {Door{parseSegment(doors[0], "door")}, Door{parseSegment(doors[1], "door")}};
    tr.deadEndDoor = field(t, "deadEndDoor").get<std::size_t>();
    tr.pocket = parseRect(field(t, "pocket"), "pocket");
    spec.transitions.push_back(tr);
  }
  spec.startArea = parseRect(field(doc, "start"), "start");
  spec.goalArea = parseRect(field(doc, "goal"), "goal");
  return spec;
}

std::string dumpMazeLayout(const MazeSpec& spec) {
  // One rect or segment per line keeps the files readable and diffable.
  std::ostringstream os;
  auto list = [&os](const char* key, const auto& items, auto toJson, bool last = false) {
    os << "  \"" << key << "\": [";
    for (std::size_t i = 0; i < items.size(); ++i) {
      os << (i ? ",\n    " : "\n    ") << toJson(items[i]).dump();
    }
    os << (items.empty() ? "]" : "\n  ]") << (last ? "\n" : ",\n");
  };
  os << "{\n";
  list("rooms", spec.rooms, rectJson);
  list("walls", spec.walls, segmentJson);
  list("transitions", spec.transitions, [](const RoomTransition& t) {
    json j;
    j["doors"] = {segmentJson(t.doors[0].gap), segmentJson(t.doors[1].gap)};
    j["deadEndDoor"] = t.deadEndDoor;
    j["pocket"] = rectJson(t.pocket);
    return j;
  });
  os << "  \"start\": " << rectJson(spec.startArea).dump() << ",\n";
  os << "  \"goal\": " << rectJson(spec.goalArea).dump() << "\n";
  os << "}\n";
  return os.str();
}

MazeSpec loadMazeLayout(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("maze layout: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parseMazeLayout(ss.str());
}

void saveMazeLayout(const MazeSpec& spec, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("maze layout: cannot write " + path.string());
  f << dumpMazeLayout(spec);
}

}  // namespace csac
