#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace vgram {

// Seeded generator with hand-rolled draw helpers. std::mt19937_64 output is
// pinned by the standard, but the std distributions are not, so every draw
// used for reproducible artifacts goes through the helpers below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool coin() { return (engine_() & 1u) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Draws from the distribution given by non-negative weights summing to
// `total`. Returns weights.size()-1 when roundoff pushes the probe past the
// last cumulative bin.
inline std::size_t sample_discrete(Rng& rng, const std::vector<double>& cumulative,
                                   double total) {
  const double probe = rng.uniform() * total;
  std::size_t lo = 0, hi = cumulative.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (cumulative[mid] <= probe) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo < cumulative.size() ? lo : cumulative.size() - 1;
}

}  // namespace vgram
