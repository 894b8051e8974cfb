#include "dsync/acquisition.hpp"

#include <algorithm>

namespace dsync {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// memory scan

namespace {

bool is_upper_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

constexpr size_t kSecretTextLen = 53;
constexpr size_t kFragmentMin = 20;

void scan_tagged(std::string_view blob, std::string_view tag, size_t value_len,
                 bool (*pred)(char), const std::function<void(std::string_view, size_t)>& emit) {
    size_t pos = 0;
    while ((pos = blob.find(tag, pos)) != std::string_view::npos) {
        size_t start = pos + tag.size();
        size_t end = start;
        while (end < blob.size() && end - start < value_len && pred(blob[end])) ++end;
        if (end > start) emit(blob.substr(start, end - start), start);
        pos = end;
    }
}

}  // namespace

MemoryFindings scan_memory(std::string_view blob) {
    MemoryFindings out;

    size_t i = 0;
    while (i < blob.size()) {
        if (!is_base32_char(blob[i])) {
            ++i;
            continue;
        }
        size_t start = i;
        while (i < blob.size() && is_base32_char(blob[i])) ++i;
        size_t len = i - start;
        size_t hits_before = out.secrets.size();
        if (len >= kSecretTextLen) {
            for (size_t w = start; w + kSecretTextLen <= start + len; ++w) {
                try {
                    Secret s = decode_secret(blob.substr(w, kSecretTextLen));
                    out.secrets.push_back({s, w});
                    w += kSecretTextLen - 1;  // skip windows overlapping this hit
                } catch (const IdentityError&) {
                }
            }
        }
        if (out.secrets.size() == hits_before && len >= kFragmentMin)
            out.fragments.push_back(std::string(blob.substr(start, len)));
    }

    scan_tagged(blob, "peerid ", 40, is_upper_hex, [&](std::string_view v, size_t off) {
        if (v.size() == 40) out.peer_ids.emplace_back(PeerID::from_hex(v), off);
    });
    scan_tagged(blob, "lport ", 5, is_digit, [&](std::string_view v, size_t off) {
        unsigned long p = std::stoul(std::string(v));
        if (p >= 1 && p <= 65535) out.ports.emplace_back(static_cast<uint16_t>(p), off);
    });

    return out;
}

// ---------------------------------------------------------------------------
// disk analysis

LocalEvidence analyze_disk(const ArtifactSet& artifacts) {
    LocalEvidence ev;
    ev.artifacts = artifacts;
    auto read_reported = [&](const fs::path& p) {
        ev.reads.push_back(p);
        return read_file(p);
    };

    if (artifacts.settings_dat) {
        try {
            ev.settings = parse_settings(read_reported(*artifacts.settings_dat));
        } catch (const std::exception& e) {
            ev.errors.push_back("settings.dat: " + std::string(e.what()));
        }
    }
    if (artifacts.sync_dat) {
        try {
            ev.configs = parse_sync_dat_file(read_reported(*artifacts.sync_dat));
        } catch (const std::exception& e) {
            ev.errors.push_back("sync.dat: " + std::string(e.what()));
        }
    }
    for (const auto& path : artifacts.manifests) {
        try {
            std::vector<std::string> warnings;
            ShareManifest m = parse_manifest(read_reported(path), &warnings);
            for (auto& w : warnings) ev.errors.push_back(path.filename().string() + ": " + w);
            ev.manifests.emplace(m.share_id, std::move(m));
        } catch (const std::exception& e) {
            ev.errors.push_back(path.filename().string() + ": " + std::string(e.what()));
        }
    }
    if (artifacts.sync_log) {
        try {
            ev.log = parse_sync_log(read_reported(*artifacts.sync_log));
        } catch (const std::exception& e) {
            ev.errors.push_back("sync.log: " + std::string(e.what()));
        }
    }

    std::map<fs::path, std::optional<ShareID>> sync_ids;
    for (const auto& sf : artifacts.share_folders) {
        std::optional<ShareID> id;
        if (sf.sync_id) {
            try {
                id = parse_sync_id(read_reported(*sf.sync_id));
            } catch (const std::exception& e) {
                ev.errors.push_back(sf.sync_id->string() + ": " + std::string(e.what()));
            }
        }
        sync_ids.emplace(sf.folder, id);
    }

    for (const auto& cfg : ev.configs) {
        ShareLink link;
        link.secret = cfg.secret;
        link.folder = cfg.path;
        link.derived = derive_share_id(cfg.secret);

        fs::path expected = artifacts.root / fs::path(cfg.path);
        for (const auto& [folder, id] : sync_ids) {
            if (fs::weakly_canonical(folder) == fs::weakly_canonical(expected)) {
                link.sync_id = id;
                break;
            }
        }
        for (const auto& mp : artifacts.manifests)
            if (mp.filename().string() == link.derived.hex() + ".db") link.manifest_path = mp;

        if (link.sync_id && !(*link.sync_id == link.derived)) link.consistent = false;
        if (link.manifest_path) {
            auto it = ev.manifests.find(link.derived);
            if (it == ev.manifests.end() || !(it->second.share_id == link.derived))
                link.consistent = false;
        }
        ev.links.push_back(std::move(link));
    }
    return ev;
}

// ---------------------------------------------------------------------------
// corroboration

const char* to_string(EvidenceItem i) {
    switch (i) {
        case EvidenceItem::ShareID: return "ShareID";
        case EvidenceItem::Secret: return "Secret";
        case EvidenceItem::PeerID: return "PeerID";
        case EvidenceItem::FileList: return "FileList";
        case EvidenceItem::FileHash: return "FileHash";
        case EvidenceItem::RemotePeers: return "RemotePeers";
        case EvidenceItem::Ports: return "Ports";
    }
    return "?";
}

const char* to_string(EvidenceSource s) {
    switch (s) {
        case EvidenceSource::Network: return "Network";
        case EvidenceSource::RAM: return "RAM";
        case EvidenceSource::SyncDat: return "sync.dat";
        case EvidenceSource::SyncID: return ".SyncID";
        case EvidenceSource::ShareDb: return "ShareID.db";
        case EvidenceSource::SyncLog: return "sync.log";
    }
    return "?";
}

const char* to_string(CellState s) {
    switch (s) {
        case CellState::Found: return "found";
        case CellState::NotFound: return "not_found";
        case CellState::NotApplicable: return "not_applicable";
    }
    return "?";
}

const char* to_string(ItemVerdict v) {
    switch (v) {
        case ItemVerdict::AGREE: return "AGREE";
        case ItemVerdict::CONFLICT: return "CONFLICT";
        case ItemVerdict::SINGLE_SOURCE: return "SINGLE_SOURCE";
        case ItemVerdict::NOT_FOUND: return "NOT_FOUND";
    }
    return "?";
}

bool cell_applicable(EvidenceItem item, EvidenceSource source) {
    // Rows: ShareID, Secret, PeerID, FileList, FileHash, RemotePeers, Ports.
    // Columns: Network, RAM, sync.dat, .SyncID, ShareID.db, sync.log.
    static constexpr bool kMask[kEvidenceItems][kEvidenceSources] = {
        {true, true, true, true, false, true},      // ShareID
        {false, true, true, false, false, false},   // Secret
        {true, true, false, false, true, false},    // PeerID
        {false, true, false, false, true, true},    // FileList
        {false, true, false, false, true, false},   // FileHash
        {true, true, false, false, true, true},     // RemotePeers
        {true, true, false, false, false, true},    // Ports
    };
    return kMask[static_cast<size_t>(item)][static_cast<size_t>(source)];
}

namespace {

void add_value(CorroborationMatrix& m, EvidenceItem item, EvidenceSource source,
               std::string value) {
    MatrixCell& c = m.cell(item, source);
    if (c.state == CellState::NotApplicable) return;  // mask wins over extraction
    if (std::find(c.values.begin(), c.values.end(), value) == c.values.end())
        c.values.push_back(std::move(value));
    c.state = CellState::Found;
}

void fill_from_disk(CorroborationMatrix& m, const LocalEvidence& ev) {
    for (const auto& cfg : ev.configs) {
        add_value(m, EvidenceItem::Secret, EvidenceSource::SyncDat, encode_secret(cfg.secret));
        add_value(m, EvidenceItem::ShareID, EvidenceSource::SyncDat,
                  derive_share_id(cfg.secret).hex());
    }
    for (const auto& link : ev.links)
        if (link.sync_id)
            add_value(m, EvidenceItem::ShareID, EvidenceSource::SyncID, link.sync_id->hex());
    for (const auto& [share, manifest] : ev.manifests) {
        for (const auto& f : manifest.files) {
            add_value(m, EvidenceItem::FileList, EvidenceSource::ShareDb, f.path);
            add_value(m, EvidenceItem::FileHash, EvidenceSource::ShareDb, hex(f.hash20));
        }
    }
    for (const auto& e : ev.log.events) {
        if (e.path) add_value(m, EvidenceItem::FileList, EvidenceSource::SyncLog, *e.path);
        if (e.host) {
            try {
                Endpoint ep = Endpoint::parse(*e.host);
                add_value(m, EvidenceItem::Ports, EvidenceSource::SyncLog,
                          std::to_string(ep.port));
            } catch (const std::invalid_argument&) {
            }
            if (e.peer)
                add_value(m, EvidenceItem::RemotePeers, EvidenceSource::SyncLog,
                          e.peer->hex() + "@" + *e.host);
        }
    }
}

}  // namespace

CorroborationMatrix corroborate(const EntryPointBundle& bundle) {
    if (bundle.empty())
        throw AcquisitionError(AcqErr::InsufficientSources, "bundle has no evidence sources");

    CorroborationMatrix m;
    for (size_t i = 0; i < kEvidenceItems; ++i)
        for (size_t s = 0; s < kEvidenceSources; ++s)
            m.cells[i][s].state =
                cell_applicable(static_cast<EvidenceItem>(i), static_cast<EvidenceSource>(s))
                    ? CellState::NotFound
                    : CellState::NotApplicable;

    if (bundle.disk) fill_from_disk(m, analyze_disk(*bundle.disk));
    if (bundle.mobile) fill_from_disk(m, analyze_disk(*bundle.mobile));

    if (bundle.memory) {
        MemoryFindings found = scan_memory(*bundle.memory);
        for (const auto& hit : found.secrets) {
            add_value(m, EvidenceItem::Secret, EvidenceSource::RAM, encode_secret(hit.secret));
            add_value(m, EvidenceItem::ShareID, EvidenceSource::RAM,
                      derive_share_id(hit.secret).hex());
        }
        for (const auto& [peer, off] : found.peer_ids)
            add_value(m, EvidenceItem::PeerID, EvidenceSource::RAM, peer.hex());
        for (const auto& [port, off] : found.ports)
            add_value(m, EvidenceItem::Ports, EvidenceSource::RAM, std::to_string(port));
        // File lists and hashes in RAM are reported absent: the process layout
        // is opaque and only tagged fragments are extracted.
    }

    if (bundle.network_log) {
        for (const auto& e : *bundle.network_log) {
            if (!e.share_hex.empty())
                add_value(m, EvidenceItem::ShareID, EvidenceSource::Network, e.share_hex);
            if (!e.peer_hex.empty()) {
                add_value(m, EvidenceItem::PeerID, EvidenceSource::Network, e.peer_hex);
                add_value(m, EvidenceItem::RemotePeers, EvidenceSource::Network,
                          e.peer_hex + "@" + e.src);
            }
            auto port_of = [](const std::string& text) -> std::optional<std::string> {
                try {
                    return std::to_string(Endpoint::parse(text).port);
                } catch (const std::invalid_argument&) {
                    return std::nullopt;
                }
            };
            if (auto p = port_of(e.src)) add_value(m, EvidenceItem::Ports, EvidenceSource::Network, *p);
            if (auto p = port_of(e.dst)) add_value(m, EvidenceItem::Ports, EvidenceSource::Network, *p);
        }
    }

    for (size_t i = 0; i < kEvidenceItems; ++i) {
        std::vector<const MatrixCell*> found;
        for (size_t s = 0; s < kEvidenceSources; ++s)
            if (m.cells[i][s].state == CellState::Found) found.push_back(&m.cells[i][s]);
        if (found.empty()) {
            m.verdicts[i] = ItemVerdict::NOT_FOUND;
            continue;
        }
        if (found.size() == 1) {
            m.verdicts[i] = ItemVerdict::SINGLE_SOURCE;
            continue;
        }
        // Corroborated when any value is found identically in >= 2 sources.
        bool agree = false;
        for (const auto* a : found) {
            for (const std::string& v : a->values) {
                size_t holders = 0;
                for (const auto* b : found)
                    if (std::find(b->values.begin(), b->values.end(), v) != b->values.end())
                        ++holders;
                if (holders >= 2) {
                    agree = true;
                    break;
                }
            }
            if (agree) break;
        }
        if (agree) {
            m.verdicts[i] = ItemVerdict::AGREE;
        } else {
            m.verdicts[i] = ItemVerdict::CONFLICT;
            std::string detail = std::string(to_string(static_cast<EvidenceItem>(i))) + ":";
            for (size_t s = 0; s < kEvidenceSources; ++s) {
                const MatrixCell& c = m.cells[i][s];
                if (c.state != CellState::Found) continue;
                detail += " " + std::string(to_string(static_cast<EvidenceSource>(s))) + "=[";
                for (size_t k = 0; k < c.values.size(); ++k)
                    detail += (k > 0 ? "," : "") + c.values[k];
                detail += "]";
            }
            m.conflicts.push_back(std::move(detail));
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// targets

const char* to_string(TargetReason r) {
    switch (r) {
        case TargetReason::DELETED_LOCALLY: return "DELETED_LOCALLY";
        case TargetReason::INVALIDATED: return "INVALIDATED";
        case TargetReason::LISTED_ONLY: return "LISTED_ONLY";
    }
    return "?";
}

std::vector<TargetFile> identify_targets(const LocalEvidence& evidence) {
    std::vector<TargetFile> out;
    for (const auto& [share, manifest] : evidence.manifests) {  // map: share order
        std::vector<const FileEntry*> flagged;
        for (const auto& f : manifest.files)
            if (f.state == 2 || f.invalidated == 1) flagged.push_back(&f);
        std::sort(flagged.begin(), flagged.end(),
                  [](const FileEntry* a, const FileEntry* b) { return a->path < b->path; });
        for (const FileEntry* f : flagged) {
            TargetFile t;
            t.share = share;
            t.path = f->path;
            t.reason = f->state == 2 ? TargetReason::DELETED_LOCALLY : TargetReason::INVALIDATED;
            t.expected_hash = f->hash20;
            if (const FileMeta* meta = manifest.find_meta(f->path); meta != nullptr)
                t.meta = *meta;
            out.push_back(std::move(t));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// enumeration

std::vector<PeerRecord> enumerate_peers(const ShareID& share,
                                        const std::set<DiscoverySource>& methods,
                                        EnumerationContext& ctx) {
    if (methods.empty()) throw std::invalid_argument("at least one discovery method is required");

    std::map<std::pair<Bytes, Endpoint>, PeerRecord> merged;
    auto absorb = [&](const PeerRecord& r) {
        auto key = std::make_pair(r.peer.raw(), r.addr);
        auto [it, inserted] = merged.emplace(key, r);
        if (!inserted) {
            it->second.sources.insert(r.sources.begin(), r.sources.end());
            it->second.last_seen = std::max(it->second.last_seen, r.last_seen);
        }
    };

    const bool live = ctx.net != nullptr && ctx.investigator != nullptr;
    if (live) {
        Node& inv = *ctx.investigator;
        if (methods.count(DiscoverySource::Multicast) > 0)
            for (const auto& r : ctx.net->multicast_ping(inv, share)) absorb(r);
        if (methods.count(DiscoverySource::Tracker) > 0)
            for (const auto& r : ctx.net->tracker_announce(inv, share)) absorb(r);
        if (methods.count(DiscoverySource::Dht) > 0) {
            try {
                for (const auto& r : ctx.net->dht_get_peers(inv, share)) absorb(r);
            } catch (const NetError&) {
                // an unreachable DHT yields nothing, not a failure
            }
        }
        if (methods.count(DiscoverySource::KnownHosts) > 0) {
            for (const Endpoint& ep : ctx.known_hosts) {
                if (auto r = ctx.net->hello_probe(inv, ep)) {
                    absorb(*r);
                } else {
                    PeerRecord silent;  // unreachable known host: recorded without liveness
                    silent.addr = ep;
                    silent.last_seen = 0;
                    silent.sources.insert(DiscoverySource::KnownHosts);
                    absorb(silent);
                }
            }
        }
    }
    if (methods.count(DiscoverySource::SyncLogHistory) > 0 && ctx.history != nullptr) {
        for (const auto& e : ctx.history->events) {
            if (!e.peer || !e.host) continue;
            Endpoint ep;
            try {
                ep = Endpoint::parse(*e.host);
            } catch (const std::invalid_argument&) {
                continue;
            }
            PeerRecord r;
            r.peer = *e.peer;
            r.addr = ep;
            r.last_seen = e.timestamp;  // offline knowledge, no liveness claim
            r.sources.insert(DiscoverySource::SyncLogHistory);
            absorb(r);
        }
    }

    std::vector<PeerRecord> out;
    for (auto& [_, r] : merged) out.push_back(std::move(r));
    return out;
}

// ---------------------------------------------------------------------------
// recovery

namespace {

struct PeerSession {
    PeerRecord peer;
    SessionToken token;
    std::optional<ShareManifest> manifest;
};

}  // namespace

EvidenceRecord recover(const TargetFile& target, const std::vector<PeerRecord>& peers,
                       const Secret& secret, const RecoveryPolicy& policy, Network& net,
                       Node& investigator) {
    if (policy.known_peers_only && peers.empty())
        throw AcquisitionError(AcqErr::NoEligiblePeers,
                               "KnownPeersOnly recovery requires at least one peer");

    EvidenceRecord record;
    record.target = target;

    auto custody = [&](std::string action, std::string detail) {
        record.custody.push_back(
            {net.clock.now_ms(), net.epoch_now(), std::move(action), std::move(detail)});
    };

    custody("begin", target.path + " reason=" + to_string(target.reason));

    std::vector<PeerSession> sessions;
    for (const PeerRecord& peer : peers) {
        try {
            SessionToken token = net.session_handshake(investigator, peer.addr, target.share, secret);
            custody("handshake_ok", peer.addr.text());
            PeerSession ps{peer, token, std::nullopt};
            try {
                ps.manifest = net.fetch_manifest(investigator, token);
                custody("manifest", peer.addr.text());
            } catch (const std::exception& e) {  // timeout or malformed manifest
                custody("manifest_fail", peer.addr.text() + " " + e.what());
            }
            sessions.push_back(std::move(ps));
        } catch (const NetError& e) {
            custody("handshake_fail", peer.addr.text() + " " + e.what());
        }
    }

    std::optional<FileMeta> meta = target.meta;
    if (!meta) {
        for (const auto& ps : sessions) {
            if (!ps.manifest) continue;
            if (const FileMeta* m = ps.manifest->find_meta(target.path); m != nullptr) {
                meta = *m;
                break;
            }
        }
    }
    record.meta_used = meta;
    if (!meta) {
        custody("note", "no piece metadata available for " + target.path);
        record.verification.status = VerifyStatus::PARTIAL;
        return record;
    }

    const size_t piece_count = meta->piece_count();
    std::map<Bytes, std::vector<uint32_t>> served_by;  // peer raw -> indices

    for (uint32_t i = 0; i < piece_count; ++i) {
        bool got = false;
        for (auto& ps : sessions) {
            int attempts_left = 1 + policy.same_source_retries;
            bool first_attempt = true;
            while (attempts_left-- > 0 && !got) {
                custody(first_attempt ? "request" : "refetch",
                        "piece " + std::to_string(i) + " from " + ps.peer.addr.text());
                first_attempt = false;
                Bytes piece;
                try {
                    piece = net.fetch_piece(investigator, ps.token, target.path, i);
                } catch (const NetError& e) {
                    custody("unavailable",
                            "piece " + std::to_string(i) + " at " + ps.peer.addr.text() + ": " +
                                e.what());
                    break;  // this source cannot serve the piece; next peer
                }
                custody("response", "piece " + std::to_string(i) + " (" +
                                        std::to_string(piece.size()) + " bytes) from " +
                                        ps.peer.addr.text());
                bool ok = false;
                try {
                    ok = verify_piece(piece, i, *meta);
                } catch (const IntegrityError&) {
                    ok = false;
                }
                if (ok) {
                    custody("verify_ok", "piece " + std::to_string(i));
                    record.pieces[i] = std::move(piece);
                    served_by[ps.peer.peer.raw()].push_back(i);
                    got = true;
                } else {
                    custody("verify_fail",
                            "piece " + std::to_string(i) + " from " + ps.peer.addr.text());
                }
            }
            if (got) break;
        }
        if (!got) {
            record.verification.missing_pieces.insert(i);
            custody("missing", "piece " + std::to_string(i) + " has no remaining source");
        } else {
            record.verification.verified_pieces.insert(i);
        }
    }

    for (const PeerRecord& peer : peers) {
        auto it = served_by.find(peer.peer.raw());
        if (it != served_by.end()) record.sources.emplace_back(peer, it->second);
    }

    if (record.verification.missing_pieces.empty()) {
        record.assembled.clear();
        for (uint32_t i = 0; i < piece_count; ++i) record.assembled += record.pieces[i];
        record.whole_hash = sha1(record.assembled);
        std::vector<Digest20> hashes;
        for (uint32_t i = 0; i < piece_count; ++i) hashes.push_back(sha1(record.pieces[i]));
        bool aggregate_ok = aggregate_hash(hashes) == meta->aggregate_hash;
        bool whole_ok = record.whole_hash == target.expected_hash;
        if (piece_count == 0) {
            aggregate_ok = true;
            whole_ok = sha1(Bytes{}) == target.expected_hash;
            record.whole_hash = sha1(Bytes{});
        }
        if (aggregate_ok && whole_ok) {
            record.verification.status = VerifyStatus::FULL_MATCH;
            custody("verified", "whole-file SHA1 " + hex(record.whole_hash));
        } else {
            record.verification.status = VerifyStatus::MISMATCH;
            record.verification.failed_pieces = record.verification.verified_pieces;
            record.verification.verified_pieces.clear();
            custody("mismatch", "recovered content does not match the expected hash");
        }
    } else {
        record.verification.status = VerifyStatus::PARTIAL;
        custody("partial", std::to_string(record.verification.verified_pieces.size()) + "/" +
                               std::to_string(piece_count) + " pieces verified");
    }
    return record;
}

}  // namespace dsync
