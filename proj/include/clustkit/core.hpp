#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace clustkit {

/// Row-major dense matrix used for every point set in the toolkit.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Per-row cluster assignment. -1 marks noise.
using LabelVector = std::vector<int>;

inline constexpr int kNoise = -1;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline constexpr std::string_view kVersion = "1.0.0";

// Error hierarchy. The CLI maps each kind to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Portable RNG helpers. std distributions are implementation-defined, so all
// sampling goes through these to keep results identical across toolchains.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection sampling.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

/// Standard normal via Box-Muller.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Shortest round-trip decimal representation; "inf"/"-inf"/"nan" for
/// non-finite values.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::logic_error("format_double: buffer too small");
  return std::string(buffer, end);
}

inline double squared_euclidean(const Eigen::Ref<const Vector>& a,
                                const Eigen::Ref<const Vector>& b) {
  return (a - b).squaredNorm();
}

/// Number of distinct non-noise labels.
inline std::size_t count_clusters(const LabelVector& labels) {
  std::map<int, int> seen;
  for (int label : labels)
    if (label != kNoise) seen[label] = 1;
  return seen.size();
}

inline std::size_t count_noise(const LabelVector& labels) {
  std::size_t count = 0;
  for (int label : labels)
    if (label == kNoise) ++count;
  return count;
}

/// Renumbers non-noise labels to 0..k-1 by order of first appearance.
inline LabelVector compact_labels(const LabelVector& labels) {
  std::map<int, int> remap;
  LabelVector out(labels.size(), kNoise);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

/// 64-bit FNV-1a, used for manifest fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace clustkit
