#include "csac/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csac {

static_assert(std::endian::native == std::endian::little, "archive format assumes little-endian");

namespace {

constexpr char kMagic[8] = {'C', 'S', 'A', 'C', 'A', 'R', 'C', '1'};

void writeU64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void writeF64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("archive: truncated data");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Archive::put(const std::string& name, Matrix value) { entries_[name] = std::move(value); }
void Archive::put(const std::string& name, double value) { entries_[name] = value; }
void Archive::put(const std::string& name, std::uint64_t value) { entries_[name] = value; }
void Archive::put(const std::string& name, std::string value) { entries_[name] = std::move(value); }

const Archive::Value& Archive::find(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("archive: missing entry '" + name + "'");
  return it->second;
}

template <class T>
static const T& as(const Archive::Value& v, const std::string& name) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  throw std::runtime_error("archive: entry '" + name + "' has a different kind");
}

const Matrix& Archive::matrix(const std::string& name) const { return as<Matrix>(find(name), name); }
double Archive::real(const std::string& name) const { return as<double>(find(name), name); }
std::uint64_t Archive::integer(const std::string& name) const {
  return as<std::uint64_t>(find(name), name);
}
const std::string& Archive::text(const std::string& name) const {
  return as<std::string>(find(name), name);
}

std::string Archive::toBytes() const {
  std::string out(kMagic, 8);
  writeU64(out, entries_.size());
  for (const auto& [name, value] : entries_) {
    out.push_back(static_cast<char>(value.index()));
    writeU64(out, name.size());
    out += name;
    std::visit(
        [&out](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Matrix>) {
            writeU64(out, static_cast<std::uint64_t>(v.rows()));
            writeU64(out, static_cast<std::uint64_t>(v.cols()));
            for (Index i = 0; i < v.rows(); ++i) {
              for (Index j = 0; j < v.cols(); ++j) writeF64(out, v(i, j));
            }
          } else if constexpr (std::is_same_v<T, double>) {
            writeF64(out, v);
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            writeU64(out, v);
          } else {
            writeU64(out, v.size());
            out += v;
          }
        },
        value);
  }
  return out;
}

Archive Archive::fromBytes(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw std::runtime_error("archive: bad magic");
  }
  Reader r(bytes);
  r.str(8);
  Archive a;
  const std::uint64_t count = r.u64();
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint8_t kind = r.u8();
    std::string name = r.str(r.u64());
    switch (kind) {
      case 0: {
        const auto rows = static_cast<Index>(r.u64());
        const auto cols = static_cast<Index>(r.u64());
        r.need(static_cast<std::size_t>(rows * cols) * 8);
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
          for (Index j = 0; j < cols; ++j) m(i, j) = r.f64();
        }
        a.put(name, std::move(m));
        break;
      }
      case 1: a.put(name, r.f64()); break;
      case 2: a.put(name, r.u64()); break;
      case 3: a.put(name, r.str(r.u64())); break;
      default: throw std::runtime_error("archive: unknown entry kind " + std::to_string(kind));
    }
  }
  if (!r.done()) throw std::runtime_error("archive: trailing bytes");
  return a;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("archive: cannot write " + tmp);
    const std::string bytes = toBytes();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("archive: short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("archive: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return fromBytes(ss.str());
}

}  // namespace csac
