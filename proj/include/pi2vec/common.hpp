#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pi2vec {

/// Bad arguments or precondition violations detected at an API boundary.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested operation does not apply to this kind of input
/// (e.g. an exact oracle on a continuous environment).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or corrupted file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An oracle or acceptance check failed.
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = kFnvOffset);
std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t hash = kFnvOffset);

// Named sub-seeds: every random stream in the project hangs off one root.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

std::string to_hex(std::uint64_t value);

double uniform01(Rng& rng);
int uniform_index(Rng& rng, int n);

}  // namespace pi2vec
