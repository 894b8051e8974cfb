#include "dsync/hash.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace dsync {

Digest20 sha1(std::string_view data) {
    Digest20 out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha1(), nullptr) != 1 ||
        len != out.size()) {
        throw std::runtime_error("SHA-1 computation failed");
    }
    return out;
}

Digest32 sha256(std::string_view data) {
    Digest32 out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    return out;
}

std::string hex(const Digest20& d) { return to_hex_upper(d.data(), d.size()); }
std::string hex(const Digest32& d) { return to_hex_upper(d.data(), d.size()); }

Digest20 digest20_from_hex(std::string_view h) {
    Bytes raw = from_hex(h);
    if (raw.size() != 20) throw std::invalid_argument("expected 40 hex characters");
    return digest20_from_raw(raw);
}

Digest20 digest20_from_raw(std::string_view raw20) {
    if (raw20.size() != 20) throw std::invalid_argument("expected 20 raw bytes");
    Digest20 d{};
    for (size_t i = 0; i < 20; ++i) d[i] = static_cast<uint8_t>(raw20[i]);
    return d;
}

std::string raw(const Digest20& d) {
    return std::string(reinterpret_cast<const char*>(d.data()), d.size());
}

}  // namespace dsync
