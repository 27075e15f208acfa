#ifndef PGLAB_RNG_HPP_
#define PGLAB_RNG_HPP_

#include <cstdint>
#include <random>

namespace pglab {

// SplitMix64 finalizer. Used to derive independent stream seeds from a
// (master seed, counter) pair so parallel runs never share a stream.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t counter) {
  return splitmix64(splitmix64(master) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

// Engine plus the distributions every module draws from. Copying an Rng
// copies its full state, including the cached second normal variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng for_stream(std::uint64_t master, std::uint64_t counter) {
    return Rng(stream_seed(master, counter));
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
  }
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pglab

#endif  // PGLAB_RNG_HPP_
