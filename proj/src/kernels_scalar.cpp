#include "opseval/kernels.hpp"

namespace opseval::kernels::scalar {

void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids) {
  for (std::size_t i = 0; i < n_pixels; ++i) {
    const std::uint8_t* p = rgb + 3 * i;
    ids[i] = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
             (static_cast<std::uint32_t>(p[2]) << 16);
  }
}

void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb) {
  for (std::size_t i = 0; i < n_pixels; ++i) {
    const std::uint32_t v = ids[i];
    std::uint8_t* p = rgb + 3 * i;
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    p[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
  }
}

void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys) {
  for (std::size_t i = 0; i < n; ++i)
    keys[i] = (static_cast<std::uint64_t>(a[i]) << 32) | b[i];
}

}  // namespace opseval::kernels::scalar
