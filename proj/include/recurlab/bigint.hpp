#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace recurlab {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt pow2(long bits) {
    if (bits < 0) throw std::invalid_argument("pow2: negative exponent");
    return BigInt(1) << bits;
}

// Number of bits in |v|; bit_length(0) == 0.
inline long bit_length(const BigInt& v) {
    if (v == 0) return 0;
    return static_cast<long>(boost::multiprecision::msb(boost::multiprecision::abs(v))) + 1;
}

inline BigInt ipow(BigInt base, unsigned long e) {
    BigInt r = 1;
    while (e) {
        if (e & 1) r *= base;
        e >>= 1;
        if (e) base *= base;
    }
    return r;
}

// floor(sqrt(x)), x >= 0.
inline BigInt isqrt_floor(const BigInt& x) {
    if (x < 0) throw std::invalid_argument("isqrt_floor: negative argument");
    return boost::multiprecision::sqrt(x);
}

inline bool is_perfect_square(const BigInt& x) {
    if (x < 0) return false;
    BigInt r = isqrt_floor(x);
    return r * r == x;
}

inline std::string to_hex(const BigInt& v) {
    if (v < 0) throw std::invalid_argument("to_hex: negative value");
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

inline BigInt bigint_from_hex(const std::string& hex) {
    if (hex.empty() || hex.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw std::invalid_argument("bigint_from_hex: bad digits");
    return BigInt("0x" + hex);
}

inline BigInt bigint_from_i128(__int128 v) {
    bool neg = v < 0;
    unsigned __int128 u = neg ? ~static_cast<unsigned __int128>(v) + 1 : static_cast<unsigned __int128>(v);
    BigInt r = static_cast<std::uint64_t>(u >> 64);
    r <<= 64;
    r |= static_cast<std::uint64_t>(u);
    return neg ? -r : r;
}

// C(n, k) exactly; n may be any nonnegative BigInt, k small.
inline BigInt binomial(const BigInt& n, unsigned k) {
    if (n < 0) throw std::invalid_argument("binomial: negative n");
    if (BigInt(k) > n) return 0;
    BigInt num = 1, den = 1;
    for (unsigned i = 0; i < k; ++i) {
        num *= n - i;
        den *= i + 1;
    }
    return num / den;
}

} // namespace recurlab
