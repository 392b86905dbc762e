#include "s2fl/container.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace s2fl {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<unsigned char>(value >> (8 * b)));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

}  // namespace

void Manifest::set(const std::string& key, const std::string& value) {
  if (key.find_first_of("=\n\r") != std::string::npos ||
      value.find_first_of("\n\r") != std::string::npos) {
    fail(ErrorCode::Format, "manifest entry '" + key + "' contains a line break or '='");
  }
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Manifest::set(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

bool Manifest::has(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return true;
  }
  return false;
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  fail(ErrorCode::Format, source_.string() + ": missing key '" + key + "'");
}

long long Manifest::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    fail(ErrorCode::Format,
         source_.string() + ": key '" + key + "' is not an integer: '" + v + "'");
  }
  return out;
}

void Manifest::write(const fs::path& path) const {
  std::string text = std::string("magic=") + kContainerMagic + "\n";
  for (const auto& [k, v] : entries_) {
    if (k == "magic") continue;
    text += k + "=" + v + "\n";
  }
  write_all(path, {text.begin(), text.end()});
}

Manifest Manifest::read(const fs::path& path) {
  const auto bytes = read_all(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  Manifest m;
  m.source_ = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::Format,
           path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (lineno == 1 && (key != "magic" || value != kContainerMagic)) {
      fail(ErrorCode::Format, path.string() + ": bad magic (expected magic=" +
                                  kContainerMagic + ")");
    }
    m.entries_.emplace_back(key, value);
  }
  if (lineno == 0) fail(ErrorCode::Format, path.string() + ": bad magic (empty file)");
  return m;
}

void write_f64(const fs::path& path, const Matrix& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_le(bytes, std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
  write_all(path, bytes);
}

Matrix read_f64(const fs::path& path, Eigen::Index rows, Eigen::Index cols,
                const std::string& what) {
  const auto bytes = read_all(path);
  const auto expected = static_cast<std::size_t>(rows * cols) * 8;
  if (bytes.size() != expected) {
    std::ostringstream msg;
    msg << what << " (" << path.string() << "): payload has " << bytes.size()
        << " bytes, expected " << expected << " for " << rows << " x " << cols
        << " float64 values";
    fail(ErrorCode::Dimension, msg.str());
  }
  Matrix m(rows, cols);
  std::size_t offset = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, offset += 8) {
      const double v = std::bit_cast<double>(get_le<std::uint64_t>(&bytes[offset]));
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << what << " (" << path.string() << "): non-finite value at byte offset "
            << offset;
        fail(ErrorCode::Validation, msg.str());
      }
      m(r, c) = v;
    }
  }
  return m;
}

void write_u32(const fs::path& path, const std::vector<std::uint32_t>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (auto v : values) put_le(bytes, v);
  write_all(path, bytes);
}

std::vector<std::uint32_t> read_u32(const fs::path& path, std::size_t count,
                                    const std::string& what) {
  const auto bytes = read_all(path);
  if (bytes.size() != count * 4) {
    std::ostringstream msg;
    msg << what << " (" << path.string() << "): payload has " << bytes.size()
        << " bytes, expected " << count * 4;
    fail(ErrorCode::Dimension, msg.str());
  }
  std::vector<std::uint32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get_le<std::uint32_t>(&bytes[4 * i]);
  return out;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorCode::Io, "cannot create directory " + dir.string() +
                            (ec ? ": " + ec.message() : ""));
  }
}

}  // namespace s2fl
