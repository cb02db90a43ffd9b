#ifndef PPGS_RANDOM_HPP_
#define PPGS_RANDOM_HPP_

// Portable sampling on top of std::mt19937_64. The standard distributions are
// implementation-defined, so everything that feeds reproducible outputs goes
// through these helpers instead.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace ppgs {

using Rng = std::mt19937_64;

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent child seed for stream `stream` of a run seeded with `seed`.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(SplitMix64(seed) ^ SplitMix64(stream + 0x51ed27));
}

// Uniform integer in [lo, hi] by multiply-shift.
inline int UniformInt(Rng& rng, int lo, int hi) {
  const auto span = static_cast<unsigned __int128>(static_cast<std::int64_t>(hi) - lo + 1);
  return lo + static_cast<int>((static_cast<unsigned __int128>(rng()) * span) >> 64);
}

inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double StandardNormal(Rng& rng) {
  double u1 = Uniform01(rng);
  while (u1 <= 0.0) u1 = Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const int j = UniformInt(rng, 0, static_cast<int>(i) - 1);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace ppgs

#endif  // PPGS_RANDOM_HPP_
