#include "opseval/kernels.hpp"

#ifdef OPSEVAL_HAVE_AVX2_BUILD

#include <immintrin.h>

namespace opseval::kernels::avx2 {

namespace {

// Spread 4 packed RGB triplets (12 bytes) into 4 dwords [r|g<<8|b<<16|0].
const __m128i kRgbToDword =
    _mm_setr_epi8(0, 1, 2, -1, 3, 4, 5, -1, 6, 7, 8, -1, 9, 10, 11, -1);

// Inverse: compact 4 dwords back to 12 packed bytes (last 4 lanes zeroed).
const __m128i kDwordToRgb =
    _mm_setr_epi8(0, 1, 2, 4, 5, 6, 8, 9, 10, 12, 13, 14, -1, -1, -1, -1);

}  // namespace

void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids) {
  std::size_t i = 0;
  // Second 16-byte load starts at 3i+12; stay 16 bytes inside the buffer.
  while (3 * i + 28 <= 3 * n_pixels) {
    const __m128i lo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(rgb + 3 * i));
    const __m128i hi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(rgb + 3 * i + 12));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(ids + i), _mm_shuffle_epi8(lo, kRgbToDword));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(ids + i + 4), _mm_shuffle_epi8(hi, kRgbToDword));
    i += 8;
  }
  scalar::decode_rgb_to_ids(rgb + 3 * i, n_pixels - i, ids + i);
}

void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb) {
  std::size_t i = 0;
  // Each 16-byte store carries 12 payload bytes; the 4-byte slack is
  // overwritten by the next store or the scalar tail.
  while (3 * i + 28 <= 3 * n_pixels) {
    const __m128i lo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(ids + i));
    const __m128i hi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(ids + i + 4));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(rgb + 3 * i), _mm_shuffle_epi8(lo, kDwordToRgb));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(rgb + 3 * i + 12),
                     _mm_shuffle_epi8(hi, kDwordToRgb));
    i += 8;
  }
  scalar::encode_ids_to_rgb(ids + i, n_pixels - i, rgb + 3 * i);
}

void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    // unpack gives (b,a) dword pairs, i.e. a<<32|b as little-endian qwords,
    // but split per 128-bit lane; permute restores element order.
    const __m256i lo = _mm256_unpacklo_epi32(vb, va);  // k0 k1 | k4 k5
    const __m256i hi = _mm256_unpackhi_epi32(vb, va);  // k2 k3 | k6 k7
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(keys + i),
                        _mm256_permute2x128_si256(lo, hi, 0x20));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(keys + i + 4),
                        _mm256_permute2x128_si256(lo, hi, 0x31));
  }
  scalar::pack_pair_keys(a + i, b + i, n - i, keys + i);
}

}  // namespace opseval::kernels::avx2

#endif  // OPSEVAL_HAVE_AVX2_BUILD
