#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Hot pixel loops behind the annotation reader and the segment matcher.
// Scalar reference kernels are always built; an AVX2 variant is selected at
// runtime when the CPU supports it. Set OPSEVAL_NO_AVX2=1 to force scalar.

namespace opseval::kernels {

// id = R + 256*G + 65536*B over packed 8-bit RGB triplets.
void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids);

// Inverse of decode; ids must be < 2^24.
void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb);

// keys[i] = (uint64)a[i] << 32 | b[i]; feeds the joint (gt,pred) histogram.
void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys);

namespace scalar {
void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids);
void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb);
void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define OPSEVAL_HAVE_AVX2_BUILD 1
namespace avx2 {
void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids);
void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb);
void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys);
}  // namespace avx2
#endif

// Name of the active backend ("scalar" or "avx2").
const std::string& active_backend();

}  // namespace opseval::kernels
