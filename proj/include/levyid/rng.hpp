#ifndef LEVYID_RNG_HPP
#define LEVYID_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace levyid {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Philox4x32-10 counter-based block function.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Deterministic random stream identified by (seed, stream_id).
///
/// The seed is the Philox key; the stream id fills the upper half of the
/// counter and the lower half counts blocks, so every stream owns 2^64
/// blocks and streams never overlap. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  result_type operator()() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1); safe under log().
  double open_uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Index in [0, n) by multiply-shift on 32 bits; n must be < 2^32.
  std::uint32_t index(std::uint32_t n) { return static_cast<std::uint32_t>((std::uint64_t{next_u32()} * n) >> 32); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                           static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    buffer_ = philox4x32_10(ctr, {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++block_;
    pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int pos_ = 4;
};

/// Derives independent streams from a master seed. Forking by a tag gives a
/// new domain, so the two sides of an identity never share a stream.
class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t seed, std::uint64_t domain = 0) : seed_(seed), domain_(domain) {}

  StreamFactory fork(std::string_view tag) const { return StreamFactory(seed_, mix(detail::fnv1a(tag))); }
  StreamFactory fork(std::uint64_t index) const { return StreamFactory(seed_, mix(index ^ 0xA5A5A5A5A5A5A5A5ULL)); }

  RngStream stream(std::uint64_t index) const { return RngStream(seed_, mix(index)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t domain() const { return domain_; }

 private:
  std::uint64_t mix(std::uint64_t x) const { return detail::splitmix64(domain_ ^ detail::splitmix64(x)); }

  std::uint64_t seed_;
  std::uint64_t domain_;
};

}  // namespace levyid

#endif
