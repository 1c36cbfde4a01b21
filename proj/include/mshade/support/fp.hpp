#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

// Floating-point helpers shared by the lowering, the optimizer's constant
// folder, and the execution runtime. All three must agree bit-for-bit, so
// every f32 operation funnels through here. Build flags keep contraction off.

namespace mshade {

inline uint32_t f32_bits(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}

inline float bits_f32(uint32_t b) {
    float f;
    std::memcpy(&f, &b, 4);
    return f;
}

inline constexpr uint32_t kCanonicalNan = 0x7FC00000u;
// Sentinel produced when an undef operand is read (quiet NaN, payload 1).
inline constexpr uint32_t kUndefSentinel = 0x7FC00001u;

// Hash canonicalization: any NaN collapses to one pattern, -0.0 to +0.0.
inline uint32_t canonical_f32_bits(uint32_t b) {
    float f = bits_f32(b);
    if (std::isnan(f))
        return kCanonicalNan;
    if (b == 0x80000000u)
        return 0;
    return b;
}

// f32 -> f16 with round-to-nearest-even, handling subnormals and specials.
inline uint16_t f32_to_f16(uint32_t fb) {
    uint16_t sign = static_cast<uint16_t>((fb >> 16) & 0x8000u);
    int32_t exp = static_cast<int32_t>((fb >> 23) & 0xFF) - 127;
    uint32_t mant = fb & 0x7FFFFFu;

    if (exp == 128) { // inf or nan
        if (mant == 0)
            return static_cast<uint16_t>(sign | 0x7C00u);
        uint16_t m = static_cast<uint16_t>(mant >> 13);
        return static_cast<uint16_t>(sign | 0x7C00u | (m ? m : 1));
    }
    if (exp > 15) // overflow -> inf
        return static_cast<uint16_t>(sign | 0x7C00u);
    if (exp >= -14) { // normal range
        uint32_t m = mant >> 13;
        uint32_t rem = mant & 0x1FFFu;
        uint16_t h = static_cast<uint16_t>(sign | ((exp + 15) << 10) | m);
        if (rem > 0x1000u || (rem == 0x1000u && (m & 1)))
            h++; // carries into exponent correctly by construction
        return h;
    }
    if (exp >= -25) { // subnormal
        uint32_t full = mant | 0x800000u;
        int shift = -exp - 14 + 13; // 14..24
        uint32_t m = full >> shift;
        uint32_t rem = full & ((1u << shift) - 1);
        uint32_t half = 1u << (shift - 1);
        uint16_t h = static_cast<uint16_t>(sign | m);
        if (rem > half || (rem == half && (m & 1)))
            h++;
        return h;
    }
    return sign; // underflow to zero
}

inline uint32_t f16_to_f32(uint16_t hb) {
    uint32_t sign = (static_cast<uint32_t>(hb) & 0x8000u) << 16;
    uint32_t exp = (hb >> 10) & 0x1Fu;
    uint32_t mant = hb & 0x3FFu;
    if (exp == 0) {
        if (mant == 0)
            return sign;
        // subnormal: normalize
        int e = -1;
        uint32_t m = mant;
        while (!(m & 0x400u)) {
            m <<= 1;
            e++;
        }
        m &= 0x3FFu;
        return sign | ((112u - e) << 23) | (m << 13);
    }
    if (exp == 31)
        return sign | 0x7F800000u | (mant << 13);
    return sign | ((exp + 112u) << 23) | (mant << 13);
}

// Lane-wise math intrinsics. min/max drop a NaN operand (libm fmin/fmax
// semantics); clamp built on them therefore always lands inside the bounds.
namespace rtmath {
inline float rsq(float x) { return 1.0f / std::sqrt(x); }
inline float fmin_(float a, float b) { return std::fmin(a, b); }
inline float fmax_(float a, float b) { return std::fmax(a, b); }
inline float abs_(float x) { return std::fabs(x); }
inline float sin_(float x) { return std::sin(x); }
inline float cos_(float x) { return std::cos(x); }
inline float floor_(float x) { return std::floor(x); }
inline float sqrt_(float x) { return std::sqrt(x); }
} // namespace rtmath

// f32 -> i32 per the language's int() conversion: truncate toward zero,
// saturate out-of-range, NaN -> 0. Avoids UB on the C++ side.
inline int32_t f32_to_i32(float f) {
    if (std::isnan(f))
        return 0;
    if (f >= 2147483648.0f)
        return INT32_MAX;
    if (f < -2147483648.0f)
        return INT32_MIN;
    return static_cast<int32_t>(f);
}

// Prints an f32 so that parsing recovers the exact bits. Finite values use
// shortest-ish decimal with a forced '.0'; non-finite use the bit pattern.
inline std::string f32_to_text(uint32_t bits) {
    float f = bits_f32(bits);
    if (!std::isfinite(f)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", bits);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
    std::string s = buf;
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

} // namespace mshade
