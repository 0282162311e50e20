#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace rideshare {

/// Seeded pseudo-random stream used everywhere a draw is needed.
///
/// Distributions are constructed per call so that the engine state alone
/// determines every future draw; this keeps checkpoints resumable.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  /// Derive an independent child stream (e.g. one per agent).
  RandomStream split() { return RandomStream(engine_() ^ 0x9E3779B97F4A7C15ULL); }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rideshare
