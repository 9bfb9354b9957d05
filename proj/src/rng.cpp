#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <tuple>

#if defined(__GNUC__) && defined(__x86_64__)
#include <immintrin.h>
#endif

namespace decoupler {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c, std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kM1) * c[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  k[0] += kW0;
  k[1] += kW1;
}

// Ziggurat tables with 24-bit magnitudes (Marsaglia and Tsang, 128 layers).
struct Ziggurat {
  std::uint32_t kn[128];
  double wn[128];
  double fn[128];

  Ziggurat() {
    const double m = 16777216.0;  // 2^24
    double dn = 3.442619855899, tn = dn;
    const double vn = 9.91256303526217e-3;
    const double q = vn / std::exp(-0.5 * dn * dn);
    kn[0] = std::uint32_t((dn / q) * m);
    kn[1] = 0;
    wn[0] = q / m;
    wn[127] = dn / m;
    fn[0] = 1.0;
    fn[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = std::uint32_t((dn / tn) * m);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m;
    }
  }
};

const Ziggurat& zig() {
  static const Ziggurat z;
  return z;
}

constexpr double kR = 3.442619855899;

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int i = 0; i < 10; ++i) round_once(ctr, key);
  return ctr;
}

Stream::Stream(std::uint64_t seed, Domain domain, std::uint32_t a, std::uint32_t b)
    : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
      ctr_{0u, std::uint32_t(domain), a, b},
      buf_{},
      pos_(buf_.size()) {}

#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
__attribute__((target_clones("avx512f", "avx2", "default")))
#endif
void Stream::refill() {
  // All blocks of the buffer run the rounds in lockstep so the compiler can vectorize.
  constexpr std::size_t B = 64;
  static_assert(B * 4 == std::tuple_size_v<decltype(buf_)>);
  std::uint32_t c0[B], c1[B], c2[B], c3[B];
  for (std::size_t j = 0; j < B; ++j) {
    c0[j] = ctr_[0] + std::uint32_t(j);
    c1[j] = ctr_[1];
    c2[j] = ctr_[2];
    c3[j] = ctr_[3];
  }
  std::uint32_t k0 = key_[0], k1 = key_[1];
  for (int r = 0; r < 10; ++r) {
    // Left rolled: once GCC fully unrolls this loop it no longer vectorizes it.
#pragma GCC unroll 1
    for (std::size_t j = 0; j < B; ++j) {
      const std::uint64_t p0 = std::uint64_t(kM0) * c0[j];
      const std::uint64_t p1 = std::uint64_t(kM1) * c2[j];
      const std::uint32_t n0 = std::uint32_t(p1 >> 32) ^ c1[j] ^ k0;
      const std::uint32_t n2 = std::uint32_t(p0 >> 32) ^ c3[j] ^ k1;
      c1[j] = std::uint32_t(p1);
      c3[j] = std::uint32_t(p0);
      c0[j] = n0;
      c2[j] = n2;
    }
    k0 += kW0;
    k1 += kW1;
  }
  for (std::size_t j = 0; j < B; ++j) {
    buf_[4 * j] = c0[j];
    buf_[4 * j + 1] = c1[j];
    buf_[4 * j + 2] = c2[j];
    buf_[4 * j + 3] = c3[j];
  }
  ctr_[0] += std::uint32_t(B);
  pos_ = 0;
}

std::uint32_t Stream::next_u32() {
  if (pos_ == buf_.size()) refill();
  return buf_[pos_++];
}

double Stream::uniform() { return (double(next_u32()) + 0.5) * 2.3283064365386963e-10; }

double Stream::normal() {
  const Ziggurat& z = zig();
  const std::uint32_t w = next_u32();
  const std::uint32_t iz = w & 127u;
  const std::uint32_t u = w >> 8;
  if (u < z.kn[iz]) {
    const double x = double(u) * z.wn[iz];
    return (w & 128u) ? -x : x;
  }
  return normal_slow(w);
}

double Stream::normal_slow(std::uint32_t w) {
  const Ziggurat& z = zig();
  for (;;) {
    const std::uint32_t iz = w & 127u;
    const std::uint32_t u = w >> 8;
    const bool neg = (w & 128u) != 0;
    if (u < z.kn[iz]) {
      const double x = double(u) * z.wn[iz];
      return neg ? -x : x;
    }
    if (iz == 0) {
      double x, y;
      do {
        x = -std::log(uniform()) / kR;
        y = -std::log(uniform());
      } while (y + y < x * x);
      return neg ? -(kR + x) : kR + x;
    }
    const double x = double(u) * z.wn[iz];
    if (z.fn[iz] + uniform() * (z.fn[iz - 1] - z.fn[iz]) < std::exp(-0.5 * x * x)) return neg ? -x : x;
    w = next_u32();
  }
}

namespace {

// Ziggurat fast path over one chunk of words. Writes every output and returns a bit mask
// of the draws that fell outside their layer's rectangle.
std::uint64_t ziggurat_fast(const std::uint32_t* w, double* o, std::size_t n, double scale, const std::uint32_t* kn,
                            const double* wn) {
  std::uint64_t rejected = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint32_t iz = w[j] & 127u;
    const std::uint32_t u = w[j] >> 8;
    const double x = double(std::int32_t(u)) * wn[iz] * scale;
    o[j] = (w[j] & 128u) ? -x : x;
    rejected |= std::uint64_t(u >= kn[iz]) << j;
  }
  return rejected;
}

#if defined(__GNUC__) && defined(__x86_64__)
// Same arithmetic four lanes at a time; GCC does not vectorize the table gathers itself.
__attribute__((target("avx2"))) std::uint64_t ziggurat_fast_avx2(const std::uint32_t* w, double* o, std::size_t n,
                                                                   double scale, const std::uint32_t* kn,
                                                                   const double* wn) {
  const __m128i low7 = _mm_set1_epi32(127), bit7 = _mm_set1_epi32(128);
  const __m256d sc = _mm256_set1_pd(scale);
  std::uint64_t rejected = 0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m128i wv = _mm_loadu_si128(reinterpret_cast<const __m128i*>(w + j));
    const __m128i iz = _mm_and_si128(wv, low7);
    const __m128i u = _mm_srli_epi32(wv, 8);
    __m256d x = _mm256_mul_pd(_mm256_mul_pd(_mm256_cvtepi32_pd(u), _mm256_i32gather_pd(wn, iz, 8)), sc);
    const __m256i sign = _mm256_slli_epi64(_mm256_cvtepu32_epi64(_mm_and_si128(wv, bit7)), 56);
    x = _mm256_xor_pd(x, _mm256_castsi256_pd(sign));
    _mm256_storeu_pd(o + j, x);
    const __m128i inside = _mm_cmpgt_epi32(_mm_i32gather_epi32(reinterpret_cast<const int*>(kn), iz, 4), u);
    rejected |= std::uint64_t(~_mm_movemask_ps(_mm_castsi128_ps(inside)) & 0xF) << j;
  }
  if (j < n) rejected |= ziggurat_fast(w + j, o + j, n - j, scale, kn, wn) << j;
  return rejected;
}

const bool kHaveAvx2 = __builtin_cpu_supports("avx2");
#endif

}  // namespace

void Stream::fill_normal(double* out, std::size_t n, double scale) {
  const Ziggurat& z = zig();
  std::array<std::uint32_t, 64> words;
  std::size_t i = 0;
  while (i < n) {
    if (pos_ == buf_.size()) refill();
    // Chunks end on 64-word boundaries whatever the buffer size, which fixes where
    // rejected draws take their extra words from.
    const std::size_t avail = std::min(64 - pos_ % 64, n - i);
    std::copy_n(buf_.begin() + pos_, avail, words.begin());
    pos_ += avail;
    double* o = out + i;
#if defined(__GNUC__) && defined(__x86_64__)
    std::uint64_t rejected = kHaveAvx2 ? ziggurat_fast_avx2(words.data(), o, avail, scale, z.kn, z.wn)
                                       : ziggurat_fast(words.data(), o, avail, scale, z.kn, z.wn);
#else
    std::uint64_t rejected = ziggurat_fast(words.data(), o, avail, scale, z.kn, z.wn);
#endif
    while (rejected) {
      const int j = __builtin_ctzll(rejected);
      rejected &= rejected - 1;
      o[j] = scale * normal_slow(words[j]);
    }
    i += avail;
  }
}

std::uint64_t default_seed(std::uint64_t fallback) {
  if (const char* s = std::getenv("DECOUPLER_SEED")) {
    try {
      return std::stoull(s);
    } catch (...) {
    }
  }
  return fallback;
}

}  // namespace decoupler
