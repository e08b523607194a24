#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace bethe {

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

using Engine = std::mt19937_64;

/// Identifies one random stream: a master seed plus a path of task/site indices.
/// Streams are a pure function of (master_seed, stream_path); nothing global.
struct RealizationSeed {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> stream_path;

  RealizationSeed() = default;
  explicit RealizationSeed(std::uint64_t master) : master_seed(master) {}
  RealizationSeed(std::uint64_t master, std::vector<std::uint64_t> path)
      : master_seed(master), stream_path(std::move(path)) {}

  [[nodiscard]] RealizationSeed child(std::uint64_t index) const {
    RealizationSeed out = *this;
    out.stream_path.push_back(index);
    return out;
  }

  [[nodiscard]] RealizationSeed child(std::initializer_list<std::uint64_t> indices) const {
    RealizationSeed out = *this;
    out.stream_path.insert(out.stream_path.end(), indices.begin(), indices.end());
    return out;
  }

  /// 64-bit stream key; every path element goes through two mixing rounds.
  [[nodiscard]] std::uint64_t derive() const noexcept {
    std::uint64_t h = detail::mix64(master_seed ^ 0x5be0cd19137e2179ULL);
    std::uint64_t position = 0;
    for (std::uint64_t p : stream_path) {
      h = detail::mix64(h ^ detail::mix64(p + 0x6a09e667f3bcc909ULL * ++position));
    }
    return detail::mix64(h + position);
  }

  [[nodiscard]] Engine engine() const {
    const std::uint64_t key = derive();
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(stream_path.size())};
    return Engine(seq);
  }

  friend bool operator==(const RealizationSeed&, const RealizationSeed&) = default;
};

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Engine& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace bethe
