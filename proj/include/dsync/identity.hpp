#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dsync/bytes.hpp"
#include "dsync/hash.hpp"

namespace dsync {

// Share credentials and identifiers. A secret is 33 raw bytes: one access
// byte plus a 32-byte payload, shown to humans as 53 characters of unpadded
// RFC 4648 Base32.

enum class AccessLevel : uint8_t {
    Master = 0x41,     // 'A' — read/write
    ReadOnly = 0x42,   // 'B' — download only, derived one-way from Master
    Encrypted = 0x44,  // 'D' — recognized but never synchronized
};

enum class IdentityErr {
    InvalidLevel,
    UnsupportedLevel,
    BadLength,
    BadAlphabet,
    UnknownAccessByte,
};

class IdentityError : public std::runtime_error {
public:
    IdentityError(IdentityErr kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    IdentityErr kind;
};

struct Secret {
    AccessLevel level = AccessLevel::Master;
    std::array<uint8_t, 32> payload{};

    Bytes raw() const {  // 33 bytes: access byte then payload
        Bytes out(1, static_cast<char>(level));
        out.append(reinterpret_cast<const char*>(payload.data()), payload.size());
        return out;
    }

    bool operator==(const Secret&) const = default;
};

struct ShareID {
    Digest20 id{};

    std::string hex() const { return dsync::hex(id); }
    Bytes raw() const { return dsync::raw(id); }

    static ShareID from_raw(std::string_view raw20) { return {digest20_from_raw(raw20)}; }
    static ShareID from_hex(std::string_view h) { return {digest20_from_hex(h)}; }

    auto operator<=>(const ShareID&) const = default;
};

struct PeerID {
    std::array<uint8_t, 20> id{};

    std::string hex() const { return to_hex_upper(id.data(), id.size()); }
    Bytes raw() const { return Bytes(reinterpret_cast<const char*>(id.data()), id.size()); }

    static PeerID from_raw(std::string_view raw20);
    static PeerID from_hex(std::string_view h);

    auto operator<=>(const PeerID&) const = default;
};

// Master only; ReadOnly and Encrypted are derived, never generated.
Secret generate_secret(AccessLevel level, SeededRng& entropy);

// payload = SHA-256(0x52 || master.payload); one-way by construction.
Secret derive_readonly(const Secret& master);

// SHA-1 over the 33 raw bytes of the ReadOnly secret, so Master and ReadOnly
// holders rendezvous on the same ID. Encrypted secrets are out of scope.
ShareID derive_share_id(const Secret& secret);

// 53 chars, uppercase RFC 4648 alphabet, no padding.
std::string encode_secret(const Secret& secret);
Secret decode_secret(std::string_view text);

PeerID generate_peer_id(SeededRng& entropy);

// Base32 helpers (exposed for the memory scanner).
bool is_base32_char(char c);
std::string base32_encode(std::string_view raw);            // unpadded
Bytes base32_decode(std::string_view text);                 // throws IdentityError(BadAlphabet)

}  // namespace dsync
