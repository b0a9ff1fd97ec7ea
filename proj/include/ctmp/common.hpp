#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string_view>

namespace ctmp {

// 64-bit FNV-1a. Used for config fingerprints and seed derivation.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// splitmix64 step; good enough to decorrelate derived seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic per-task seed from a run seed and up to two task indices.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return mix64(seed ^ mix64(a ^ mix64(b)));
}

// Monotonic clock, injectable so tests and benchmarks control time.
struct Clock {
  std::function<uint64_t()> now_ns;

  static Clock steady() {
    return Clock{[] {
      return static_cast<uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(
              std::chrono::steady_clock::now().time_since_epoch())
              .count());
    }};
  }

  // Fixed-increment fake clock; every call advances by `step_ns`.
  static Clock fake(uint64_t step_ns = 1000) {
    auto counter = std::make_shared<uint64_t>(0);
    return Clock{[counter, step_ns] {
      *counter += step_ns;
      return *counter;
    }};
  }

  double seconds_since(uint64_t start_ns) const {
    return static_cast<double>(now_ns() - start_ns) * 1e-9;
  }
};

}  // namespace ctmp
