#pragma once

#include "csac/geometry.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace csac {

// Gap in the wall between room j and room j+1.
struct Door {
  Segment gap;
};

// Connection between consecutive rooms: two doors, one of which opens into
// an enclosed pocket carved out of the next room.
struct RoomTransition {
  std::array<Door, 2> doors;
  std::size_t deadEndDoor = 0;  // index into doors
  Rect pocket;                  // lies inside the next room

  const Door& safeDoor() const { return doors[1 - deadEndDoor]; }
  const Door& trapDoor() const { return doors[deadEndDoor]; }
};

struct MazeSpec {
  std::vector<Rect> rooms;  // ordered along the traversal direction
  std::vector<Segment> walls;
  std::vector<RoomTransition> transitions;  // rooms.size() - 1 entries
  Rect startArea;                           // inside the first room
  Rect goalArea;                            // inside the last room

  std::size_t roomCount() const { return rooms.size(); }
  std::optional<std::size_t> roomAt(Vec2 p) const;
  Rect bounds() const;
};

// Dimensions of the generated layouts. Rooms are stacked along +x.
struct MazeGeometry {
  double roomWidth = 3.0;
  double roomHeight = 3.0;
  double doorWidth = 0.5;
  double safeDoorInset = 0.15;  // gap between the safe door and the room corner
  double pocketDepth = 0.8;
  double pocketHeight = 1.0;
  double goalDepth = 0.5;

  MazeGeometry scaled(double factor) const;
};

// Built-in 2-, 3- and 4-room layouts. Every transition has its dead-end door
// in the middle of the shared wall, which is the nearest exit from the room
// centre and from the start area; the safe door alternates between the top
// and bottom corners. Throws std::invalid_argument for other counts.
MazeSpec builtinMaze(int roomCount, const MazeGeometry& geometry = {});

struct MazeReport {
  bool valid = true;
  std::vector<std::string> problems;
  std::vector<std::string> warnings;
  std::size_t rooms = 0;
  std::size_t transitions = 0;
  std::size_t deadEndPockets = 0;
};

// Structural check of the layout invariants (disjoint ordered rooms, two
// doors per transition with exactly one trap, enclosed pockets, start-goal
// connectivity). Uses a grid flood fill of the free space.
MazeReport validateMaze(const MazeSpec& spec);

// Structured-text layout files (JSON). Throws std::runtime_error on schema
// violations; does not run validateMaze.
MazeSpec parseMazeLayout(const std::string& text);
std::string dumpMazeLayout(const MazeSpec& spec);
MazeSpec loadMazeLayout(const std::filesystem::path& path);
void saveMazeLayout(const MazeSpec& spec, const std::filesystem::path& path);

}  // namespace csac
