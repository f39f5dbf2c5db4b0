#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hml {

using Vector = std::vector<double>;
using ClassId = int;

enum class ErrorKind {
  Format,          // malformed input file
  Validation,      // well-formed but semantically invalid input
  MissingToken,    // vocabulary entry absent from embedding table
  Domain,          // math precondition violated (zero norm, NaN)
  Config,          // bad hyperparameter or generator setting
  Shape,           // length / dimension mismatch
  StateCorruption, // tracker or loss state that can never be produced legitimately
  Integrity,       // checkpoint checksum / header mismatch
  Usage,           // CLI misuse
  Numeric,         // NaN or inf produced during training
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

/// Derives an independent 64-bit seed for a named stream from a root seed
/// (splitmix64 finalizer over the root mixed with the stream tag and index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

/// Exact text round-trip for doubles (C99 hexadecimal float).
std::string to_hex(double value);
double from_hex(std::string_view text);

/// FNV-1a over the raw bytes of a double array; used as a checkpoint checksum.
std::uint64_t checksum(const Vector& values);

std::string format_double(double value);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace hml
