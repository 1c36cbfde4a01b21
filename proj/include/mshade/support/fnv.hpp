#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>

namespace mshade {

inline constexpr uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001B3ULL;

inline uint64_t fnv1a64_bytes(const void *data, size_t len, uint64_t h = kFnvOffset) {
    const unsigned char *p = static_cast<const unsigned char *>(data);
    for (size_t i = 0; i < len; i++) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
    return fnv1a64_bytes(s.data(), s.size(), h);
}

inline uint64_t fnv1a64_u32(uint32_t v, uint64_t h) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    return fnv1a64_bytes(b, 4, h);
}

} // namespace mshade
