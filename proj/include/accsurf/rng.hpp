#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace accsurf {

// Deterministic RNG wrapper. Distribution objects are constructed fresh per
// draw so the full stream state lives in the engine and can be serialized
// for exact replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  double uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine_);
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  // Inclusive bounds.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> d(lo, hi);
    return d(engine_);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> d(mean, sd);
    return d(engine_);
  }

  double gamma(double shape, double scale = 1.0) {
    std::gamma_distribution<double> d(shape, scale);
    return d(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Samples an index from an unnormalized weight vector.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

  // Derives an independent child stream; advances the parent by one draw so
  // repeated forks with the same tag differ.
  Rng fork(std::uint64_t tag) {
    return Rng(splitmix(engine_() ^ splitmix(tag)));
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace accsurf
