#pragma once

// Flat binary archive used for checkpoints and buffer snapshots.
//
// Layout (little-endian):
//   "CSACARC1"                      8-byte magic
//   u64 entryCount
//   entryCount x {
//     u8  kind                      0 = matrix, 1 = f64, 2 = u64, 3 = string
//     u64 nameLength, name bytes
//     matrix: u64 rows, u64 cols, rows*cols f64 in row-major order
//     f64:    8 bytes
//     u64:    8 bytes
//     string: u64 length, bytes
//   }
//
// Doubles are stored as raw IEEE-754 bits, so a save/load cycle is exact.

#include "csac/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

namespace csac {

class Archive {
 public:
  using Value = std::variant<Matrix, double, std::uint64_t, std::string>;

  void put(const std::string& name, Matrix value);
  void put(const std::string& name, double value);
  void put(const std::string& name, std::uint64_t value);
  void put(const std::string& name, std::string value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Matrix& matrix(const std::string& name) const;
  double real(const std::string& name) const;
  std::uint64_t integer(const std::string& name) const;
  const std::string& text(const std::string& name) const;

  std::string toBytes() const;
  static Archive fromBytes(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

  std::size_t size() const { return entries_.size(); }

 private:
  const Value& find(const std::string& name) const;
  // Ordered map keeps serialization order independent of insertion order.
  std::map<std::string, Value> entries_;
};

}  // namespace csac
