#pragma once

#include <cstdint>
#include <initializer_list>

namespace durations {

// Counter-based stream: an immutable 64-bit key plus a draw counter. Output k
// is mix(key + k*GOLDEN), so a stream can be split into child streams (keys
// derived from the parent key alone, never from its position) and the same
// seed gives the same numbers no matter which thread consumed what.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream from_words(std::initializer_list<std::uint64_t> words) {
    std::uint64_t k = 0x6A09E667F3BCC909ull;
    for (auto w : words) k = absorb(k, w);
    return RngStream(k);
  }

  // Derived stream; independent of how much this stream has produced.
  RngStream child(std::uint64_t a, std::uint64_t b = 0) const {
    return RngStream(absorb(absorb(key_, a ^ 0x94D049BB133111EBull), b));
  }

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * kGolden); }

  // [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  // Unbiased draw from {0, ..., n-1}; n > 0.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const auto m = static_cast<unsigned __int128>(next_u64()) *
                     static_cast<unsigned __int128>(n);
      if (static_cast<std::uint64_t>(m) >= threshold)
        return static_cast<std::uint64_t>(m >> 64);
    }
  }

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t absorb(std::uint64_t key, std::uint64_t w) {
    return mix((key + kGolden) ^ (w * 0xD1B54A32D192ED03ull));
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace durations
