#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dsync/bytes.hpp"
#include "dsync/hash.hpp"

namespace dsync {

// Piece-wise SHA-1 indexing and verification. A file of |size| bytes splits
// into ceil(size / piece_len) pieces; the per-file aggregate hash is the
// SHA-1 of the in-order concatenation of all piece hashes. Zero-byte files
// have zero pieces and aggregate SHA1("").

constexpr int64_t kDefaultPieceLen = 32768;

enum class IntegrityErr {
    ZeroPieceLength,
    HashLengthError,
    IndexOutOfRange,
    WrongPieceLength,
};

class IntegrityError : public std::runtime_error {
public:
    IntegrityError(IntegrityErr kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    IntegrityErr kind;
};

// Per-file piece metadata as stored in a share manifest's meta list.
struct FileMeta {
    std::string path;
    int64_t size = 0;
    int64_t piece_len = kDefaultPieceLen;
    std::vector<Digest20> piece_hashes;
    Digest20 aggregate_hash{};

    size_t piece_count() const { return piece_hashes.size(); }
    int64_t piece_size(size_t index) const;  // last piece may be short

    bool operator==(const FileMeta&) const = default;
};

struct FileIndex {
    int64_t size = 0;
    int64_t piece_len = kDefaultPieceLen;
    std::vector<Digest20> piece_hashes;
    Digest20 aggregate_hash{};
    Digest20 whole_file_hash{};  // single SHA-1 of the full content

    FileMeta to_meta(std::string path) const;
};

int64_t piece_count_for(int64_t size, int64_t piece_len);

FileIndex index_file(std::string_view content, int64_t piece_len = kDefaultPieceLen);

// SHA-1 of the in-order concatenation of the given 20-byte hashes.
Digest20 aggregate_hash(const std::vector<Digest20>& piece_hashes);

// True iff SHA1(piece) matches meta.piece_hashes[index]. The piece must have
// the exact expected length for that index.
bool verify_piece(std::string_view piece, size_t index, const FileMeta& meta);

enum class VerifyStatus { FULL_MATCH, PARTIAL, MISMATCH };

struct VerificationResult {
    VerifyStatus status = VerifyStatus::PARTIAL;
    std::set<uint32_t> verified_pieces;
    std::set<uint32_t> failed_pieces;
    std::set<uint32_t> missing_pieces;
};

const char* to_string(VerifyStatus s);

// Full-content form: every piece is present by construction.
VerificationResult verify_file(std::string_view content, const FileMeta& meta);

// Piece-map form: absent indices count as missing. FULL_MATCH requires all
// pieces verified and the recomputed aggregate to equal meta.aggregate_hash;
// all-present-with-failures is MISMATCH; anything missing is PARTIAL (a file
// with zero recovered pieces is PARTIAL with an empty verified set).
VerificationResult verify_file(const std::map<uint32_t, Bytes>& pieces, const FileMeta& meta);

}  // namespace dsync
