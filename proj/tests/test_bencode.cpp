#include "dsync/bencode.hpp"

#include "doctest.h"
#include "dsync/bytes.hpp"

using namespace dsync;
using namespace dsync::bencode;

namespace {

// Random value generator for the round-trip properties. Depth <= 4,
// strings <= 1 KiB.
BValue random_value(SeededRng& rng, int depth) {
    uint64_t pick = rng.bounded(depth >= 4 ? 2 : 4);
    switch (pick) {
        case 0:
            return BValue(rng.bytes(rng.bounded(64)));
        case 1:
            return BValue(static_cast<int64_t>(rng.next_u64()));
        case 2: {
            BList list;
            size_t n = rng.bounded(4);
            for (size_t i = 0; i < n; ++i) list.push_back(random_value(rng, depth + 1));
            return BValue(std::move(list));
        }
        default: {
            BDict dict;
            size_t n = rng.bounded(4);
            for (size_t i = 0; i < n; ++i)
                dict[rng.bytes(1 + rng.bounded(12))] = random_value(rng, depth + 1);
            return BValue(std::move(dict));
        }
    }
}

DecodeErr kind_of(std::string_view input, DecodeMode mode = DecodeMode::Strict) {
    try {
        decode(input, mode);
    } catch (const DecodeError& e) {
        return e.kind;
    }
    FAIL("expected a decode error for: " << std::string(input));
    return DecodeErr::MalformedToken;
}

}  // namespace

TEST_CASE("bencode encodes primitive forms") {
    CHECK(encode(BValue("spam")) == "4:spam");
    CHECK(encode(BValue(int64_t{-42})) == "i-42e");
    CHECK(encode(BValue(int64_t{0})) == "i0e");
    CHECK(encode(BValue(BList{})) == "le");
    CHECK(encode(BValue(BDict{})) == "de");
}

TEST_CASE("bencode dictionary keys are emitted in raw-byte order") {
    BDict d;
    d["foo"] = BValue(int64_t{42});
    d["bar"] = BValue("spam");
    CHECK(encode(BValue(std::move(d))) == "d3:bar4:spam3:fooi42ee");
}

TEST_CASE("bencode decodes basic forms") {
    CHECK(decode("le") == BValue(BList{}));
    CHECK(decode("4:spam") == BValue("spam"));
    CHECK(decode("i-42e").integer() == -42);
    BValue v = decode("d3:bar4:spam3:fooi42ee");
    CHECK(v.dict().at("foo").integer() == 42);
    CHECK(v.dict().at("bar").str() == "spam");
}

TEST_CASE("bencode error taxonomy") {
    CHECK(kind_of("4:spamX") == DecodeErr::TrailingBytes);
    CHECK(kind_of("4:spa") == DecodeErr::TruncatedInput);
    CHECK(kind_of("i42") == DecodeErr::TruncatedInput);
    CHECK(kind_of("l4:spam") == DecodeErr::TruncatedInput);
    CHECK(kind_of("ie") == DecodeErr::MalformedToken);
    CHECK(kind_of("i-e") == DecodeErr::MalformedToken);
    CHECK(kind_of("i4x2e") == DecodeErr::MalformedToken);
    CHECK(kind_of("x") == DecodeErr::MalformedToken);
    CHECK(kind_of("d3:fooe") == DecodeErr::MalformedToken);  // key without value
    CHECK(kind_of("di1e4:spame") == DecodeErr::MalformedToken);  // non-string key
    // 2^63 overflows int64
    CHECK(kind_of("i9223372036854775808e") == DecodeErr::MalformedToken);
    CHECK(decode("i9223372036854775807e").integer() == INT64_MAX);
    CHECK(decode("i-9223372036854775808e").integer() == INT64_MIN);
}

TEST_CASE("strict mode rejects non-canonical input that lenient accepts") {
    CHECK(kind_of("d3:fooi1e3:bari2ee") == DecodeErr::NonCanonical);  // unsorted keys
    CHECK(kind_of("i03e") == DecodeErr::NonCanonical);
    CHECK(kind_of("i-0e") == DecodeErr::NonCanonical);
    CHECK(kind_of("02:ab") == DecodeErr::NonCanonical);

    BValue v = decode("d3:fooi1e3:bari2ee", DecodeMode::Lenient);
    CHECK(v.dict().at("foo").integer() == 1);
    CHECK(v.dict().at("bar").integer() == 2);
    CHECK(decode("i03e", DecodeMode::Lenient).integer() == 3);
    CHECK(decode("i-0e", DecodeMode::Lenient).integer() == 0);
    CHECK(decode("02:ab", DecodeMode::Lenient).str() == "ab");

    // duplicate keys cannot be represented in either mode
    CHECK(kind_of("d3:fooi1e3:fooi2ee") == DecodeErr::NonCanonical);
    CHECK(kind_of("d3:fooi1e3:fooi2ee", DecodeMode::Lenient) == DecodeErr::NonCanonical);
    CHECK(kind_of("d3:fooi1e3:bari2e3:fooi3ee", DecodeMode::Lenient) == DecodeErr::NonCanonical);
}

TEST_CASE("round trip and canonical fixpoint over random values") {
    SeededRng rng(2024);
    for (int i = 0; i < 500; ++i) {
        BValue v = random_value(rng, 0);
        Bytes encoded = encode(v);
        BValue back = decode(encoded);
        CHECK(back == v);
        CHECK(encode(back) == encoded);  // fixpoint
    }
}

TEST_CASE("encode is deterministic") {
    SeededRng rng(99);
    BValue v = random_value(rng, 0);
    CHECK(encode(v) == encode(v));
}

TEST_CASE("binary-safe strings survive") {
    Bytes blob;
    for (int i = 0; i < 256; ++i) blob.push_back(static_cast<char>(i));
    BValue v{blob};
    CHECK(decode(encode(v)).str() == blob);
}

TEST_CASE("deep nesting is bounded, not a crash") {
    std::string deep(4000, 'l');
    std::string closer(4000, 'e');
    CHECK(kind_of(deep + closer) == DecodeErr::MalformedToken);
}

TEST_CASE("dictionary key order is unsigned byte-wise") {
    BDict d;
    d[Bytes("\x80")] = BValue(int64_t{1});
    d[Bytes("\x7f")] = BValue(int64_t{2});
    // 0x7f sorts before 0x80 only under unsigned comparison
    CHECK(encode(BValue(std::move(d))) == Bytes("d1:\x7fi2e1:\x80i1ee"));
}
