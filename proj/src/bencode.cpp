#include "dsync/bencode.hpp"

#include <charconv>
#include <limits>

namespace dsync::bencode {

namespace {

void encode_into(const BValue& v, Bytes& out);

void encode_string(const Bytes& s, Bytes& out) {
    out += std::to_string(s.size());
    out += ':';
    out += s;
}

void encode_into(const BValue& v, Bytes& out) {
    if (v.is_string()) {
        encode_string(v.str(), out);
    } else if (v.is_int()) {
        out += 'i';
        out += std::to_string(v.integer());
        out += 'e';
    } else if (v.is_list()) {
        out += 'l';
        for (const auto& item : v.list()) encode_into(item, out);
        out += 'e';
    } else {
        out += 'd';
        for (const auto& [key, value] : v.dict()) {  // std::map: already sorted
            encode_string(key, out);
            encode_into(value, out);
        }
        out += 'e';
    }
}

class Decoder {
public:
    Decoder(std::string_view input, DecodeMode mode) : in_(input), mode_(mode) {}

    BValue run() {
        BValue v = value(0);
        if (pos_ != in_.size())
            throw DecodeError(DecodeErr::TrailingBytes, pos_, "trailing bytes after value");
        return v;
    }

private:
    static constexpr int kMaxDepth = 512;

    [[noreturn]] void fail(DecodeErr kind, const char* what) const {
        throw DecodeError(kind, pos_, what);
    }

    char peek() const {
        if (pos_ >= in_.size()) throw DecodeError(DecodeErr::TruncatedInput, pos_, "unexpected end of input");
        return in_[pos_];
    }

    char take() {
        char c = peek();
        ++pos_;
        return c;
    }

    bool strict() const { return mode_ == DecodeMode::Strict; }

    // Digits up to a terminator; canonicality of leading zeros is checked by
    // the caller since the rule differs for lengths and integers.
    std::string_view digits() {
        size_t start = pos_;
        while (pos_ < in_.size() && in_[pos_] >= '0' && in_[pos_] <= '9') ++pos_;
        return in_.substr(start, pos_ - start);
    }

    int64_t parse_i64(std::string_view text) {  // text includes any leading '-'
        int64_t out = 0;
        auto [ptr, ec] = std::from_chars(text.begin(), text.end(), out);
        if (ec == std::errc::result_out_of_range)
            fail(DecodeErr::MalformedToken, "integer outside signed 64-bit range");
        if (ec != std::errc() || ptr != text.end())
            fail(DecodeErr::MalformedToken, "bad integer digits");
        return out;
    }

    BValue value(int depth) {
        if (depth > kMaxDepth) fail(DecodeErr::MalformedToken, "nesting too deep");
        char c = peek();
        if (c >= '0' && c <= '9') return BValue(string_token());
        if (c == 'i') return BValue(integer_token());
        if (c == 'l') {
            ++pos_;
            BList items;
            while (peek() != 'e') items.push_back(value(depth + 1));
            ++pos_;
            return BValue(std::move(items));
        }
        if (c == 'd') {
            ++pos_;
            BDict dict;
            Bytes prev_key;
            bool have_prev = false;
            while (peek() != 'e') {
                size_t key_off = pos_;
                if (!(peek() >= '0' && peek() <= '9'))
                    fail(DecodeErr::MalformedToken, "dictionary key must be a byte string");
                Bytes key = string_token();
                if (have_prev && strict() && key <= prev_key)
                    throw DecodeError(DecodeErr::NonCanonical, key_off,
                                      key == prev_key ? "duplicate dictionary key"
                                                      : "dictionary keys not sorted");
                BValue val = value(depth + 1);
                prev_key = key;
                have_prev = true;
                auto [it, inserted] = dict.emplace(std::move(key), std::move(val));
                if (!inserted)  // lenient mode can see non-adjacent duplicates
                    throw DecodeError(DecodeErr::NonCanonical, key_off, "duplicate dictionary key");
            }
            ++pos_;
            return BValue(std::move(dict));
        }
        fail(DecodeErr::MalformedToken, "unexpected byte");
    }

    Bytes string_token() {
        size_t len_off = pos_;
        std::string_view len_digits = digits();
        if (len_digits.empty())
            throw DecodeError(DecodeErr::MalformedToken, len_off, "missing length prefix");
        if (strict() && len_digits.size() > 1 && len_digits[0] == '0')
            throw DecodeError(DecodeErr::NonCanonical, len_off, "leading zero in length prefix");
        if (pos_ >= in_.size())
            throw DecodeError(DecodeErr::TruncatedInput, pos_, "unexpected end of input");
        if (in_[pos_] != ':')
            fail(DecodeErr::MalformedToken, "expected ':' after length prefix");
        ++pos_;
        int64_t len = 0;
        {
            auto [ptr, ec] = std::from_chars(len_digits.begin(), len_digits.end(), len);
            if (ec != std::errc() || ptr != len_digits.end())
                throw DecodeError(DecodeErr::MalformedToken, len_off, "bad length prefix");
        }
        if (static_cast<size_t>(len) > in_.size() - pos_)
            throw DecodeError(DecodeErr::TruncatedInput, pos_, "string shorter than declared");
        Bytes out(in_.substr(pos_, static_cast<size_t>(len)));
        pos_ += static_cast<size_t>(len);
        return out;
    }

    int64_t integer_token() {
        ++pos_;  // 'i'
        size_t num_off = pos_;
        bool negative = false;
        if (peek() == '-') {
            negative = true;
            ++pos_;
        }
        std::string_view num = digits();
        if (num.empty()) fail(DecodeErr::MalformedToken, "empty integer");
        if (strict()) {
            if (num.size() > 1 && num[0] == '0')
                throw DecodeError(DecodeErr::NonCanonical, num_off, "leading zero in integer");
            if (negative && num == "0")
                throw DecodeError(DecodeErr::NonCanonical, num_off, "negative zero");
        }
        int64_t v = parse_i64(in_.substr(num_off, (negative ? 1 : 0) + num.size()));
        if (pos_ >= in_.size())
            throw DecodeError(DecodeErr::TruncatedInput, pos_, "unexpected end of input");
        if (take() != 'e') fail(DecodeErr::MalformedToken, "missing 'e' after integer");
        return v;
    }

    std::string_view in_;
    DecodeMode mode_;
    size_t pos_ = 0;
};

}  // namespace

Bytes encode(const BValue& value) {
    Bytes out;
    encode_into(value, out);
    return out;
}

BValue decode(std::string_view bytes, DecodeMode mode) { return Decoder(bytes, mode).run(); }

const BValue* find(const BDict& d, std::string_view key) {
    auto it = d.find(Bytes(key));
    return it == d.end() ? nullptr : &it->second;
}

namespace {
[[noreturn]] void missing(std::string_view key, const char* kind) {
    throw DecodeError(DecodeErr::MalformedToken, 0,
                      "missing or mistyped key '" + std::string(key) + "' (" + kind + ")");
}
}  // namespace

const Bytes& require_str(const BDict& d, std::string_view key) {
    const BValue* v = find(d, key);
    if (v == nullptr || !v->is_string()) missing(key, "byte string");
    return v->str();
}

int64_t require_int(const BDict& d, std::string_view key) {
    const BValue* v = find(d, key);
    if (v == nullptr || !v->is_int()) missing(key, "integer");
    return v->integer();
}

const BList& require_list(const BDict& d, std::string_view key) {
    const BValue* v = find(d, key);
    if (v == nullptr || !v->is_list()) missing(key, "list");
    return v->list();
}

const BDict& require_dict(const BDict& d, std::string_view key) {
    const BValue* v = find(d, key);
    if (v == nullptr || !v->is_dict()) missing(key, "dictionary");
    return v->dict();
}

}  // namespace dsync::bencode
