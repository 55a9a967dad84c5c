#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ontotune {

// Error categories map onto CLI exit codes: usage/config -> 1,
// data validation -> 2, internal -> 3.
enum class ErrorKind { Config = 1, Validation = 2, Internal = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(ErrorKind::Validation, msg) {}
};

// Duplicate natural key on append.
struct ConflictError : ValidationError {
  explicit ConflictError(const std::string& msg) : ValidationError(msg) {}
};

struct ParseError : ValidationError {
  ParseError(const std::string& msg, int line, int column)
      : ValidationError(msg + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line(line),
        column(column) {}
  int line;
  int column;
};

struct IngestError : ValidationError {
  explicit IngestError(const std::string& msg) : ValidationError(msg) {}
};

struct TraceError : ValidationError {
  explicit TraceError(const std::string& msg) : ValidationError(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::Internal, msg) {}
};

// Shortest round-trip decimal form; the one way any double reaches a file.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_double_sig9(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

// FNV-1a, used for structure fingerprints. Fixed constants keep the hash
// identical across platforms.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace ontotune
