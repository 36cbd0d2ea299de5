#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace backstory::util {

// 64-bit FNV-1a. Used for content-addressed ids and seed derivation, where
// the value must be stable across platforms and standard library versions.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  // Field separator so ("ab","c") and ("a","bc") hash differently.
  Fnv1a& field(std::string_view bytes) noexcept {
    update(bytes);
    const char sep = '\x1f';
    return update(std::string_view(&sep, 1));
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
  return Fnv1a{}.update(bytes).digest();
}

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

// splitmix64 finalizer; derives well-spread child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
  return mix_seed(base, fnv1a(key));
}

}  // namespace backstory::util
