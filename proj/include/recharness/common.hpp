#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recharness {

/// Base error for experiment failures (CLI exit code 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing

/// 64-bit FNV-1a. Used wherever a documented, platform-stable hash is needed
/// (embedding buckets, seeded mock decisions, Random baseline scores).
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combines two seeds into a well-mixed third.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

// ---------------------------------------------------------------------------
// Randomness

/// Portable seeded generator. The standard distributions are
/// implementation-defined, so every draw used for a reproducible artifact goes
/// through these helpers instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n), n > 0, by rejection.
  std::size_t uniform_index(std::size_t n);
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Text

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

bool is_valid_utf8(std::string_view s) noexcept;
/// Returns `s` unchanged when it is valid UTF-8, otherwise reinterprets each
/// byte as Latin-1 and transcodes to UTF-8.
std::string latin1_tolerant_utf8(std::string_view s);

/// Replaces every `{name}` whose name is a key of `values`; other braces are
/// left untouched.
std::string fill_placeholders(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& values);

/// Reads a whole file; throws Error naming the path on failure.
std::string read_file(const std::string& path);
/// Writes a whole file (truncating); throws Error naming the path on failure.
void write_file(const std::string& path, std::string_view content);

}  // namespace recharness
