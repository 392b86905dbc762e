#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "s2fl/model.hpp"

namespace s2fl {

inline constexpr const char* kContainerMagic = "S2FLv1";

/// Ordered `key=value` manifest. Keys are unique; order is preserved on write.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, long long value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  long long get_int(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  void write(const std::filesystem::path& path) const;
  /// Parses and checks the magic line.
  static Manifest read(const std::filesystem::path& path);

 private:
  std::filesystem::path source_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Little-endian float64 payload, row-major.
void write_f64(const std::filesystem::path& path, const Matrix& m);
/// Reads a rows x cols payload; `what` names the matrix in error messages.
/// Rejects size mismatches and non-finite values with byte offsets.
Matrix read_f64(const std::filesystem::path& path, Eigen::Index rows,
                Eigen::Index cols, const std::string& what);

void write_u32(const std::filesystem::path& path,
               const std::vector<std::uint32_t>& values);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path,
                                    std::size_t count, const std::string& what);

/// Creates the directory (and parents) or throws an Io error.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace s2fl
