#include "dsync/bytes.hpp"

#include <stdexcept>

namespace dsync {

namespace {
constexpr char kHexDigits[] = "0123456789ABCDEF";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}
}  // namespace

std::string to_hex_upper(std::string_view raw) {
    return to_hex_upper(reinterpret_cast<const uint8_t*>(raw.data()), raw.size());
}

std::string to_hex_upper(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(kHexDigits[data[i] >> 4]);
        out.push_back(kHexDigits[data[i] & 0x0F]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("non-hex character");
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

}  // namespace dsync
