#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace dsync {

// Raw octet buffer. std::string keeps memcmp (unsigned byte-wise) ordering,
// which is exactly the canonical ordering bencode dictionaries need.
using Bytes = std::string;

std::string to_hex_upper(std::string_view raw);
std::string to_hex_upper(const uint8_t* data, size_t len);

// Accepts upper or lower case; throws std::invalid_argument on odd length
// or non-hex characters.
Bytes from_hex(std::string_view hex);

// Deterministic byte/integer source. mt19937_64 output is pinned by the
// standard, so a fixed seed reproduces the same stream on every platform.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    uint8_t next_byte() {
        if (pool_bits_ == 0) {
            pool_ = eng_();
            pool_bits_ = 64;
        }
        uint8_t b = static_cast<uint8_t>(pool_ & 0xFF);
        pool_ >>= 8;
        pool_bits_ -= 8;
        return b;
    }

    void fill(uint8_t* out, size_t n) {
        for (size_t i = 0; i < n; ++i) out[i] = next_byte();
    }

    Bytes bytes(size_t n) {
        Bytes out(n, '\0');
        fill(reinterpret_cast<uint8_t*>(out.data()), n);
        return out;
    }

    // Uniform in [0, n). Rejection sampling avoids modulo bias.
    uint64_t bounded(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    int64_t range(int64_t lo, int64_t hi) {  // inclusive bounds
        if (hi <= lo) return lo;
        return lo + static_cast<int64_t>(bounded(static_cast<uint64_t>(hi - lo + 1)));
    }

private:
    std::mt19937_64 eng_;
    uint64_t pool_ = 0;
    int pool_bits_ = 0;
};

}  // namespace dsync
