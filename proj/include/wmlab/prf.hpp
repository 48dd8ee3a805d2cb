#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace wmlab {

struct SecretKey {
  std::array<std::uint8_t, 16> bytes{};

  static SecretKey from_hex(std::string_view hex) {
    if (hex.size() != 32) raise(Errc::invalid_argument, "key hex must be 32 chars");
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      raise(Errc::invalid_argument, "bad hex digit");
    };
    SecretKey k;
    for (std::size_t i = 0; i < 16; ++i)
      k.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return k;
  }

  static SecretKey from_u64(std::uint64_t lo, std::uint64_t hi) {
    SecretKey k;
    for (int i = 0; i < 8; ++i) {
      k.bytes[i] = static_cast<std::uint8_t>(lo >> (8 * i));
      k.bytes[8 + i] = static_cast<std::uint8_t>(hi >> (8 * i));
    }
    return k;
  }

  bool operator==(const SecretKey&) const = default;
};

struct Seed {
  std::uint64_t value = 0;
  auto operator<=>(const Seed&) const = default;
};

namespace detail {

inline std::uint64_t rotl64(std::uint64_t x, int b) { return (x << b) | (x >> (64 - b)); }

inline std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void sipround(std::uint64_t& v0, std::uint64_t& v1, std::uint64_t& v2, std::uint64_t& v3) {
  v0 += v1;
  v1 = rotl64(v1, 13);
  v1 ^= v0;
  v0 = rotl64(v0, 32);
  v2 += v3;
  v3 = rotl64(v3, 16);
  v3 ^= v2;
  v0 += v3;
  v3 = rotl64(v3, 21);
  v3 ^= v0;
  v2 += v1;
  v1 = rotl64(v1, 17);
  v1 ^= v2;
  v2 = rotl64(v2, 32);
}

}  // namespace detail

// SipHash-2-4 with a 128-bit key and 64-bit output.
inline std::uint64_t siphash24(const SecretKey& key, std::span<const std::uint8_t> msg) {
  using detail::sipround;
  const std::uint64_t k0 = detail::load_le64(key.bytes.data());
  const std::uint64_t k1 = detail::load_le64(key.bytes.data() + 8);
  std::uint64_t v0 = 0x736f6d6570736575ULL ^ k0;
  std::uint64_t v1 = 0x646f72616e646f6dULL ^ k1;
  std::uint64_t v2 = 0x6c7967656e657261ULL ^ k0;
  std::uint64_t v3 = 0x7465646279746573ULL ^ k1;

  const std::size_t n = msg.size();
  const std::size_t end = n - n % 8;
  for (std::size_t i = 0; i < end; i += 8) {
    std::uint64_t m = detail::load_le64(msg.data() + i);
    v3 ^= m;
    sipround(v0, v1, v2, v3);
    sipround(v0, v1, v2, v3);
    v0 ^= m;
  }
  std::uint64_t b = static_cast<std::uint64_t>(n) << 56;
  for (std::size_t i = end; i < n; ++i) b |= static_cast<std::uint64_t>(msg[i]) << (8 * (i - end));
  v3 ^= b;
  sipround(v0, v1, v2, v3);
  sipround(v0, v1, v2, v3);
  v0 ^= b;
  v2 ^= 0xff;
  sipround(v0, v1, v2, v3);
  sipround(v0, v1, v2, v3);
  sipround(v0, v1, v2, v3);
  sipround(v0, v1, v2, v3);
  return v0 ^ v1 ^ v2 ^ v3;
}

inline Seed prf64(const SecretKey& key, std::span<const std::uint8_t> message) {
  return Seed{siphash24(key, message)};
}

namespace detail {

inline void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_le64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Expands a seed into an indexed stream of 64-bit values. The leading tag
// byte keeps independently consumed streams (uniform draws vs. shuffle
// draws) from ever colliding on the same PRF input.
inline std::uint64_t seed_stream_u64(Seed seed, std::uint8_t tag, std::uint64_t counter) {
  SecretKey k = SecretKey::from_u64(seed.value, seed.value);
  std::vector<std::uint8_t> msg;
  msg.reserve(9);
  msg.push_back(tag);
  append_le64(msg, counter);
  return siphash24(k, msg);
}

constexpr std::uint8_t tag_uniform = 0x55;      // 'U'
constexpr std::uint8_t tag_permutation = 0x50;  // 'P'

}  // namespace detail

// Deterministic uniform draw in the open interval (0, 1). Built from the top
// 53 bits of the stream value plus a half-step offset so the result is exactly
// representable and never rounds to 0.0 or 1.0.
inline double rand_unit(Seed seed, std::uint64_t counter) {
  std::uint64_t h = detail::seed_stream_u64(seed, detail::tag_uniform, counter);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

inline std::vector<double> rand_vector(Seed seed, std::size_t d) {
  std::vector<double> r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = rand_unit(seed, i);
  return r;
}

// Fisher-Yates shuffle of 0..d-1 driven by the seed's shuffle stream. The
// modulo draw has bias below d / 2^64, far beneath anything observable here.
inline std::vector<TokenId> permutation(Seed seed, std::size_t d) {
  std::vector<TokenId> p(d);
  std::iota(p.begin(), p.end(), TokenId{0});
  std::uint64_t counter = 0;
  for (std::size_t i = d; i > 1; --i) {
    std::uint64_t r = detail::seed_stream_u64(seed, detail::tag_permutation, counter++);
    std::size_t j = static_cast<std::size_t>(r % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

// How the per-step seed r_t is derived from the token stream.
struct ContextScheme {
  enum class Kind { index_dependent, window_hash, min_hash, context_free };

  Kind kind = Kind::index_dependent;
  std::uint32_t window = 1;

  static ContextScheme index_dependent() { return {Kind::index_dependent, 0}; }
  static ContextScheme window_hash(std::uint32_t w) { return {Kind::window_hash, w}; }
  static ContextScheme min_hash(std::uint32_t w) { return {Kind::min_hash, w}; }
  static ContextScheme context_free() { return {Kind::context_free, 0}; }

  bool operator==(const ContextScheme&) const = default;
};

// Seed for step t given the tokens generated before it. Integers (position
// and token ids) enter the PRF as 4-byte little-endian words; positions
// before the start of text read as the <bos> sentinel.
inline Seed derive_seed(const ContextScheme& scheme, const SecretKey& key,
                        std::span<const TokenId> prior, std::size_t t, TokenId bos_id) {
  if (t > prior.size()) raise(Errc::invalid_argument, "t beyond prior");
  auto token_at = [&](std::int64_t idx) -> TokenId {
    return idx < 0 ? bos_id : prior[static_cast<std::size_t>(idx)];
  };
  std::vector<std::uint8_t> msg;
  switch (scheme.kind) {
    case ContextScheme::Kind::index_dependent: {
      detail::append_le32(msg, static_cast<std::uint32_t>(t));
      return prf64(key, msg);
    }
    case ContextScheme::Kind::window_hash: {
      if (scheme.window == 0) raise(Errc::invalid_argument, "window must be positive");
      msg.reserve(4 * scheme.window);
      for (std::int64_t idx = static_cast<std::int64_t>(t) - scheme.window;
           idx < static_cast<std::int64_t>(t); ++idx)
        detail::append_le32(msg, token_at(idx));
      return prf64(key, msg);
    }
    case ContextScheme::Kind::min_hash: {
      if (scheme.window == 0) raise(Errc::invalid_argument, "window must be positive");
      Seed best{~0ULL};
      for (std::uint32_t j = 1; j <= scheme.window; ++j) {
        msg.clear();
        detail::append_le32(msg, token_at(static_cast<std::int64_t>(t) - j));
        Seed s = prf64(key, msg);
        if (s.value < best.value) best = s;
      }
      return best;
    }
    case ContextScheme::Kind::context_free:
      return prf64(key, {});
  }
  raise(Errc::invalid_argument, "bad context scheme");
}

// General-purpose deterministic random stream for everything that is not a
// watermark seed: attack randomness, plain sampling, key expansion.
class SeededStream {
 public:
  explicit SeededStream(Seed seed) : seed_(seed) {}
  explicit SeededStream(std::uint64_t seed) : seed_{seed} {}

  std::uint64_t next_u64() { return detail::seed_stream_u64(seed_, tag_stream, counter_++); }

  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) raise(Errc::invalid_argument, "next_below(0)");
    return next_u64() % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[next_below(i)]);
  }

 private:
  static constexpr std::uint8_t tag_stream = 0x53;  // 'S'
  Seed seed_;
  std::uint64_t counter_ = 0;
};

// Derives a child seed from a list of 64-bit coordinates, for fanning a
// master seed out to per-scheme / per-sample streams.
inline Seed derive_child_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  SecretKey k = SecretKey::from_u64(master, 0x9e3779b97f4a7c15ULL);
  std::vector<std::uint8_t> msg;
  msg.reserve(8 * coords.size());
  for (std::uint64_t c : coords) detail::append_le64(msg, c);
  return prf64(k, msg);
}

inline SecretKey derive_child_key(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  Seed s = derive_child_seed(master, coords);
  std::uint64_t lo = detail::seed_stream_u64(s, 0x4b, 0);  // 'K'
  std::uint64_t hi = detail::seed_stream_u64(s, 0x4b, 1);
  return SecretKey::from_u64(lo, hi);
}

}  // namespace wmlab
