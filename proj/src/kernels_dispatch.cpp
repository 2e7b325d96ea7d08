#include "opseval/kernels.hpp"

#include <cstdlib>

namespace opseval::kernels {

namespace {

struct Backend {
  void (*decode)(const std::uint8_t*, std::size_t, std::uint32_t*);
  void (*encode)(const std::uint32_t*, std::size_t, std::uint8_t*);
  void (*pack)(const std::uint32_t*, const std::uint32_t*, std::size_t, std::uint64_t*);
  std::string name;
};

Backend select_backend() {
#ifdef OPSEVAL_HAVE_AVX2_BUILD
  const char* off = std::getenv("OPSEVAL_NO_AVX2");
  const bool disabled = off != nullptr && off[0] != '\0' && off[0] != '0';
  if (!disabled && __builtin_cpu_supports("avx2"))
    return {avx2::decode_rgb_to_ids, avx2::encode_ids_to_rgb, avx2::pack_pair_keys, "avx2"};
#endif
  return {scalar::decode_rgb_to_ids, scalar::encode_ids_to_rgb, scalar::pack_pair_keys, "scalar"};
}

const Backend& backend() {
  static const Backend b = select_backend();
  return b;
}

}  // namespace

void decode_rgb_to_ids(const std::uint8_t* rgb, std::size_t n_pixels, std::uint32_t* ids) {
  backend().decode(rgb, n_pixels, ids);
}

void encode_ids_to_rgb(const std::uint32_t* ids, std::size_t n_pixels, std::uint8_t* rgb) {
  backend().encode(ids, n_pixels, rgb);
}

void pack_pair_keys(const std::uint32_t* a, const std::uint32_t* b, std::size_t n,
                    std::uint64_t* keys) {
  backend().pack(a, b, n, keys);
}

const std::string& active_backend() { return backend().name; }

}  // namespace opseval::kernels
