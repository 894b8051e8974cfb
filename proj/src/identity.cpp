#include "dsync/identity.hpp"

namespace dsync {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";
constexpr uint8_t kReadOnlyDomainPrefix = 0x52;

int base32_index(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= '2' && c <= '7') return c - '2' + 26;
    return -1;
}

bool known_access_byte(uint8_t b) {
    return b == static_cast<uint8_t>(AccessLevel::Master) ||
           b == static_cast<uint8_t>(AccessLevel::ReadOnly) ||
           b == static_cast<uint8_t>(AccessLevel::Encrypted);
}

}  // namespace

PeerID PeerID::from_raw(std::string_view raw20) {
    if (raw20.size() != 20) throw IdentityError(IdentityErr::BadLength, "PeerID must be 20 bytes");
    PeerID p;
    for (size_t i = 0; i < 20; ++i) p.id[i] = static_cast<uint8_t>(raw20[i]);
    return p;
}

PeerID PeerID::from_hex(std::string_view h) { return from_raw(dsync::from_hex(h)); }

Secret generate_secret(AccessLevel level, SeededRng& entropy) {
    if (level != AccessLevel::Master)
        throw IdentityError(IdentityErr::InvalidLevel,
                            "only Master secrets are generated; others are derived");
    Secret s;
    s.level = AccessLevel::Master;
    entropy.fill(s.payload.data(), s.payload.size());
    return s;
}

Secret derive_readonly(const Secret& master) {
    if (master.level != AccessLevel::Master)
        throw IdentityError(IdentityErr::InvalidLevel, "ReadOnly derivation requires a Master secret");
    Bytes input(1, static_cast<char>(kReadOnlyDomainPrefix));
    input.append(reinterpret_cast<const char*>(master.payload.data()), master.payload.size());
    Digest32 digest = sha256(input);
    Secret out;
    out.level = AccessLevel::ReadOnly;
    std::copy(digest.begin(), digest.end(), out.payload.begin());
    return out;
}

ShareID derive_share_id(const Secret& secret) {
    if (secret.level == AccessLevel::Encrypted)
        throw IdentityError(IdentityErr::UnsupportedLevel,
                            "encrypted secrets are not supported for ShareID derivation");
    const Secret& ro = secret.level == AccessLevel::Master ? derive_readonly(secret) : secret;
    return ShareID{sha1(ro.raw())};
}

std::string encode_secret(const Secret& secret) { return base32_encode(secret.raw()); }

Secret decode_secret(std::string_view text) {
    if (text.size() != 53)
        throw IdentityError(IdentityErr::BadLength, "secret text form must be 53 characters");
    Bytes raw = base32_decode(text);  // 53 chars -> 33 bytes (+1 spare bit, must be 0)
    if (raw.size() != 33)
        throw IdentityError(IdentityErr::BadLength, "secret must decode to 33 bytes");
    uint8_t access = static_cast<uint8_t>(raw[0]);
    if (!known_access_byte(access))
        throw IdentityError(IdentityErr::UnknownAccessByte, "unrecognized access byte");
    Secret s;
    s.level = static_cast<AccessLevel>(access);
    for (size_t i = 0; i < 32; ++i) s.payload[i] = static_cast<uint8_t>(raw[i + 1]);
    return s;
}

PeerID generate_peer_id(SeededRng& entropy) {
    PeerID p;
    entropy.fill(p.id.data(), p.id.size());
    return p;
}

bool is_base32_char(char c) { return base32_index(c) >= 0; }

std::string base32_encode(std::string_view raw) {
    std::string out;
    out.reserve((raw.size() * 8 + 4) / 5);
    uint32_t buffer = 0;
    int bits = 0;
    for (unsigned char byte : raw) {
        buffer = (buffer << 8) | byte;
        bits += 8;
        while (bits >= 5) {
            out.push_back(kAlphabet[(buffer >> (bits - 5)) & 0x1F]);
            bits -= 5;
        }
    }
    if (bits > 0) out.push_back(kAlphabet[(buffer << (5 - bits)) & 0x1F]);
    return out;
}

Bytes base32_decode(std::string_view text) {
    Bytes out;
    out.reserve(text.size() * 5 / 8);
    uint32_t buffer = 0;
    int bits = 0;
    for (char c : text) {
        int v = base32_index(c);
        if (v < 0)
            throw IdentityError(IdentityErr::BadAlphabet, "character outside RFC 4648 Base32 alphabet");
        buffer = (buffer << 5) | static_cast<uint32_t>(v);
        bits += 5;
        if (bits >= 8) {
            out.push_back(static_cast<char>((buffer >> (bits - 8)) & 0xFF));
            bits -= 8;
        }
    }
    // Unpadded form: leftover bits are encoder fill and must be zero, else the
    // text is not the canonical encoding of any byte string.
    if (bits > 0 && (buffer & ((1u << bits) - 1)) != 0)
        throw IdentityError(IdentityErr::BadAlphabet, "non-zero trailing bits");
    return out;
}

}  // namespace dsync
