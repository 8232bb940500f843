#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "spme/errors.hpp"

namespace spme::io {

static_assert(std::endian::native == std::endian::little,
              "binary records are written in host order and assume a little-endian host");

/// Shortest text that round-trips a double; stable across runs of one build.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// 64-bit FNV-1a over a byte range. Used for path and config digests.
class Fnv1a {
public:
    Fnv1a& bytes(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001B3ULL;
        }
        return *this;
    }
    Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()); }
    template <class T>
    Fnv1a& value(const T& v) {
        return bytes(&v, sizeof v);
    }
    Fnv1a& doubles(std::span<const double> v) { return bytes(v.data(), v.size_bytes()); }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ShapeError("binary record truncated");
    return v;
}

inline void put_magic(std::ostream& os, std::string_view magic) {
    char buf[8] = {};
    std::memcpy(buf, magic.data(), std::min<std::size_t>(8, magic.size()));
    os.write(buf, 8);
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    char buf[8] = {};
    is.read(buf, 8);
    if (!is || std::string_view(buf, std::min<std::size_t>(8, magic.size())) != magic)
        throw ShapeError("binary record: bad magic, expected " + std::string(magic));
}

}  // namespace spme::io
