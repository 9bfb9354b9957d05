#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace decoupler {

/// Philox4x32-10 block function (Salmon et al., counter-based).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

/// RNG stream domains, so different consumers never share counters.
enum class Domain : std::uint32_t {
  Theta = 1,
  Tree = 2,
  Spde = 3,
  Test = 4,
  Sliced = 5,
  Cauchy = 6,
  Psd = 7,
  Bootstrap = 8,
};

/// Sequential stream over the Philox counter space. The key is the 64-bit seed; the
/// counter carries (block index, domain, a, b), so streams with distinct (domain, a, b)
/// are disjoint. Normals use a 128-layer ziggurat.
class Stream {
 public:
  Stream(std::uint64_t seed, Domain domain, std::uint32_t a, std::uint32_t b = 0);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  void fill_normal(double* out, std::size_t n, double scale = 1.0);

 private:
  void refill();
  double normal_slow(std::uint32_t w);

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 256> buf_;
  std::size_t pos_;
};

/// Seed default: DECOUPLER_SEED when set, otherwise `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 20240521);

}  // namespace decoupler
