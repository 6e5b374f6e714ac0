#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace binbrain {

// SplitMix64 finalizer; used to fold (seed, index) pairs into engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// mt19937_64 with hand-rolled value mappings. std::uniform_*_distribution is
// implementation-defined, which would break bit-reproducibility of pipelines;
// these mappings are fixed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // uniform in [0, 1)
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // uniform in [-bound, bound)
  double symmetric(double bound) { return (2.0 * unit() - 1.0) * bound; }

  // uniform integer in [0, n); n >= 1
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates permutation of 0..n-1, fully determined by the seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Shortest-round-trip-ish decimal formatting: "%.17g" guarantees the double
// is recoverable exactly, which keeps CSV outputs byte-deterministic.
std::string fmt_g17(double value);
std::string fmt_fixed(double value, int decimals);

std::uint64_t fnv1a64(const unsigned char* data, std::size_t size);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file_text(const std::filesystem::path& path, const std::string& text);
std::string read_file_text(const std::filesystem::path& path);

}  // namespace binbrain
