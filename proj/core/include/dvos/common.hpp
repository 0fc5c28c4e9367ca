#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <ATen/core/Generator.h>

namespace dvos {

/// Library error carrying a short machine-readable code ("invalid_argument",
/// "shape_mismatch", ...) next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Non-fatal condition reported by an operation that still returns a result.
struct Warning {
  std::string code;
  std::string message;
};

using Warnings = std::vector<Warning>;

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Explicitly passed random stream. Copyable; a copy continues the same
/// sequence independently.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform real in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  double gamma(double shape);
  std::uint64_t next_u64() { return engine_(); }

  /// Fresh torch generator seeded from this stream.
  at::Generator tensor_generator();

  std::mt19937_64& engine() { return engine_; }

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dvos
