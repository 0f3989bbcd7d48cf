#pragma once

#include <cstdint>

namespace qif {

// Counter-based pseudorandom stream (splitmix64 core). Substreams are derived
// by key rather than by advancing shared state, so the draw sequence for a
// given (seed, stream, substream path) is fixed no matter which thread asks
// for it or in what order streams were created. That is what makes the
// parallel kernels bit-reproducible across thread counts.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive(derive(0x6a09e667f3bcc908ull, seed), stream)) {}

  std::uint64_t next_u64() { return mix(key_ + ++counter_ * kGamma); }

  // Uniform on the open interval (0, 1), 53 usable bits.
  double next_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Independent stream addressed by id; does not disturb this stream.
  RngStream substream(std::uint64_t id) const {
    return RngStream(derive(key_, id), raw_tag{});
  }

 private:
  struct raw_tag {};
  RngStream(std::uint64_t key, raw_tag) : key_(key) {}

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive(std::uint64_t key, std::uint64_t id) {
    return mix(mix(key + kGamma) ^ (id + 0xd1b54a32d192ed03ull));
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qif
