#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace anyload {

/// Thrown for unrecoverable input or numerical failures. The CLI maps it to
/// a nonzero exit code; library callers may catch it.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

/// Non-fatal diagnostics go to stderr, prefixed so they are easy to grep.
void warn(const std::string& msg);

/// Like warn, but fires once per key per process; for conditions that would
/// otherwise repeat thousands of times in inner loops.
void warn_once(const std::string& key, const std::string& msg);

/// String building without std::format (gcc 11).
template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

/// FNV-1a, used to fingerprint mesh geometry for cache and density files.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
  }
  template <typename T>
  void add(const T& value) {
    add_bytes(&value, sizeof(T));
  }
  std::string hex() const;
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace anyload
