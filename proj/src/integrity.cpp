#include "dsync/integrity.hpp"

namespace dsync {

int64_t FileMeta::piece_size(size_t index) const {
    if (index + 1 < piece_hashes.size()) return piece_len;
    return size - static_cast<int64_t>(piece_hashes.size() - 1) * piece_len;
}

FileMeta FileIndex::to_meta(std::string path) const {
    FileMeta m;
    m.path = std::move(path);
    m.size = size;
    m.piece_len = piece_len;
    m.piece_hashes = piece_hashes;
    m.aggregate_hash = aggregate_hash;
    return m;
}

int64_t piece_count_for(int64_t size, int64_t piece_len) {
    if (piece_len <= 0) throw IntegrityError(IntegrityErr::ZeroPieceLength, "piece length must be positive");
    if (size <= 0) return 0;
    return (size + piece_len - 1) / piece_len;
}

FileIndex index_file(std::string_view content, int64_t piece_len) {
    if (piece_len <= 0) throw IntegrityError(IntegrityErr::ZeroPieceLength, "piece length must be positive");
    FileIndex idx;
    idx.size = static_cast<int64_t>(content.size());
    idx.piece_len = piece_len;
    const size_t step = static_cast<size_t>(piece_len);
    for (size_t off = 0; off < content.size(); off += step)
        idx.piece_hashes.push_back(sha1(content.substr(off, step)));
    idx.aggregate_hash = aggregate_hash(idx.piece_hashes);
    idx.whole_file_hash = sha1(content);
    return idx;
}

Digest20 aggregate_hash(const std::vector<Digest20>& piece_hashes) {
    Bytes concat;
    concat.reserve(piece_hashes.size() * 20);
    for (const auto& h : piece_hashes) concat += raw(h);
    return sha1(concat);
}

bool verify_piece(std::string_view piece, size_t index, const FileMeta& meta) {
    if (index >= meta.piece_count())
        throw IntegrityError(IntegrityErr::IndexOutOfRange, "piece index out of range");
    if (static_cast<int64_t>(piece.size()) != meta.piece_size(index))
        throw IntegrityError(IntegrityErr::WrongPieceLength, "piece length does not match index");
    return sha1(piece) == meta.piece_hashes[index];
}

const char* to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::FULL_MATCH: return "FULL_MATCH";
        case VerifyStatus::PARTIAL: return "PARTIAL";
        case VerifyStatus::MISMATCH: return "MISMATCH";
    }
    return "?";
}

namespace {

VerificationResult finish(VerificationResult r, size_t piece_count, const FileMeta& meta,
                          const std::map<uint32_t, Bytes>& pieces) {
    if (r.missing_pieces.empty() && r.failed_pieces.empty()) {
        // Recompute the aggregate from the delivered bytes rather than trusting
        // the per-piece comparisons alone.
        std::vector<Digest20> hashes;
        hashes.reserve(piece_count);
        for (uint32_t i = 0; i < piece_count; ++i) hashes.push_back(sha1(pieces.at(i)));
        r.status = aggregate_hash(hashes) == meta.aggregate_hash ? VerifyStatus::FULL_MATCH
                                                                 : VerifyStatus::MISMATCH;
        if (r.status == VerifyStatus::MISMATCH) {
            r.failed_pieces = r.verified_pieces;  // aggregate disagreement taints the set
            r.verified_pieces.clear();
        }
    } else if (r.missing_pieces.empty()) {
        r.status = VerifyStatus::MISMATCH;
    } else {
        r.status = VerifyStatus::PARTIAL;
    }
    return r;
}

}  // namespace

VerificationResult verify_file(std::string_view content, const FileMeta& meta) {
    if (meta.piece_count() == 0) {
        VerificationResult r;
        r.status = content.empty() ? VerifyStatus::FULL_MATCH : VerifyStatus::MISMATCH;
        return r;
    }
    std::map<uint32_t, Bytes> pieces;
    const size_t step = static_cast<size_t>(meta.piece_len);
    uint32_t i = 0;
    for (size_t off = 0; off < content.size(); off += step, ++i)
        pieces.emplace(i, Bytes(content.substr(off, step)));
    return verify_file(pieces, meta);
}

VerificationResult verify_file(const std::map<uint32_t, Bytes>& pieces, const FileMeta& meta) {
    VerificationResult r;
    const size_t n = meta.piece_count();
    for (uint32_t i = 0; i < n; ++i) {
        auto it = pieces.find(i);
        if (it == pieces.end()) {
            r.missing_pieces.insert(i);
            continue;
        }
        bool ok = static_cast<int64_t>(it->second.size()) == meta.piece_size(i) &&
                  sha1(it->second) == meta.piece_hashes[i];
        if (ok)
            r.verified_pieces.insert(i);
        else
            r.failed_pieces.insert(i);
    }
    if (n == 0) {
        r.status = VerifyStatus::FULL_MATCH;
        return r;
    }
    return finish(std::move(r), n, meta, pieces);
}

}  // namespace dsync
