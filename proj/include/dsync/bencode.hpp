#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dsync/bytes.hpp"

namespace dsync::bencode {

// Classic BitTorrent encoding: <len>:<bytes>, i<n>e, l...e, d...e.
// Canonical form sorts dictionary keys in raw-byte order and forbids
// leading zeros and "i-0e".

class BValue;

using BList = std::vector<BValue>;
using BDict = std::map<Bytes, BValue>;  // std::map keeps keys canonically sorted

enum class DecodeErr {
    TruncatedInput,   // ran out of bytes mid-token
    TrailingBytes,    // valid value followed by extra bytes
    MalformedToken,   // bad length prefix, missing terminator, overflow
    NonCanonical,     // strict mode: unsorted/duplicate keys, leading zeros, -0
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(DecodeErr kind, size_t offset, const std::string& what)
        : std::runtime_error(what + " at offset " + std::to_string(offset)),
          kind(kind),
          offset(offset) {}
    DecodeErr kind;
    size_t offset;
};

class BValue {
public:
    using Variant = std::variant<Bytes, int64_t, BList, BDict>;

    BValue() : v_(Bytes{}) {}
    BValue(Bytes s) : v_(std::move(s)) {}
    BValue(const char* s) : v_(Bytes(s)) {}
    BValue(std::string_view s) : v_(Bytes(s)) {}
    BValue(int64_t n) : v_(n) {}
    BValue(int n) : v_(static_cast<int64_t>(n)) {}
    BValue(BList l) : v_(std::move(l)) {}
    BValue(BDict d) : v_(std::move(d)) {}

    bool is_string() const { return std::holds_alternative<Bytes>(v_); }
    bool is_int() const { return std::holds_alternative<int64_t>(v_); }
    bool is_list() const { return std::holds_alternative<BList>(v_); }
    bool is_dict() const { return std::holds_alternative<BDict>(v_); }

    const Bytes& str() const { return std::get<Bytes>(v_); }
    int64_t integer() const { return std::get<int64_t>(v_); }
    const BList& list() const { return std::get<BList>(v_); }
    BList& list() { return std::get<BList>(v_); }
    const BDict& dict() const { return std::get<BDict>(v_); }
    BDict& dict() { return std::get<BDict>(v_); }

    bool operator==(const BValue& other) const { return v_ == other.v_; }

private:
    Variant v_;
};

// Canonical encoding; pure, deterministic. All BValues are encodable (BDict
// cannot hold duplicate keys by construction).
Bytes encode(const BValue& value);

enum class DecodeMode { Strict, Lenient };

// Consumes the entire input or throws. Strict rejects non-canonical input;
// Lenient tolerates unsorted keys and non-canonical integers (wire messages
// from misbehaving peers) but still rejects duplicate keys, which BDict
// cannot represent.
BValue decode(std::string_view bytes, DecodeMode mode = DecodeMode::Strict);

// Dict field helpers; throw DecodeError(MalformedToken) on missing key or
// wrong type so schema errors carry context.
const BValue* find(const BDict& d, std::string_view key);
const Bytes& require_str(const BDict& d, std::string_view key);
int64_t require_int(const BDict& d, std::string_view key);
const BList& require_list(const BDict& d, std::string_view key);
const BDict& require_dict(const BDict& d, std::string_view key);

}  // namespace dsync::bencode
