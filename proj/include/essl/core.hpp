#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace essl {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;

/// Thrown when a group-only operation is invoked on a transformation set
/// that does not form a group (the four-level Gaussian-blur set).
class NotAGroupError : public std::logic_error {
 public:
  explicit NotAGroupError(const std::string& what) : std::logic_error(what) {}
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// A seeded random stream. Every stochastic routine takes one of these
/// explicitly; there is no hidden global generator. Streams for distinct
/// purposes are derived from a single root seed by name, so consuming
/// randomness in one stream never perturbs another.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
  }
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(gen_));
  }
  bool bernoulli(double p) {
    return std::bernoulli_distribution(p)(gen_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }

  /// Derive an independent child stream by name (and optional index).
  RngStream derive(std::string_view name, uint64_t index = 0) const {
    uint64_t h = state_hash_;
    for (char c : name) h = splitmix64(h ^ static_cast<uint64_t>(c));
    h = splitmix64(h ^ index);
    RngStream out(h);
    out.state_hash_ = h;
    return out;
  }

  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, gen_);
  }

 private:
  std::mt19937_64 gen_;
  uint64_t state_hash_ = 0x6a09e667f3bcc908ULL;

  friend RngStream make_root_stream(uint64_t seed);
};

/// Root stream for a run; named substreams come from RngStream::derive.
inline RngStream make_root_stream(uint64_t seed) {
  RngStream s(splitmix64(seed));
  s.state_hash_ = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  return s;
}

}  // namespace essl
