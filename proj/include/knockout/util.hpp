#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace knockout {

// FNV-1a, 64-bit. Stable across platforms and runs; used for cache keys,
// template fingerprints, and seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ull;
  }
  return state;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t value,
                                 std::uint64_t state = 0xcbf29ce484222325ull) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  return fnv1a64(std::string_view(bytes, 8), state);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return fnv1a64(tag, fnv1a64_u64(base, 0xcbf29ce484222325ull));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t n) {
  return fnv1a64_u64(n, fnv1a64_u64(base, 0xcbf29ce484222325ull));
}

// Uniform double in [0, 1) from the top 53 bits of a raw draw. Avoids the
// implementation-defined std::uniform_real_distribution so streams are
// reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Deterministic standard normal via Box-Muller (std::normal_distribution is
// implementation-defined).
inline double gaussian(std::mt19937_64& rng) {
  double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

// In-place Fisher-Yates keyed only by the rng stream (std::shuffle is
// implementation-defined).
template <typename T>
void deterministic_shuffle(std::vector<T>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(values[i - 1], values[j]);
  }
}

inline double round_to_half(double v) { return std::round(v * 2.0) / 2.0; }

inline double round_decimals(double v, int digits) {
  double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

inline double truncate_decimals(double v, int digits) {
  double scale = std::pow(10.0, digits);
  return std::trunc(v * scale) / scale;
}

// Shortest decimal text that round-trips; integers come out bare ("7", not
// "7.0").
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace knockout
