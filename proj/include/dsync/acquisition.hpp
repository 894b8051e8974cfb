#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dsync/artifacts.hpp"
#include "dsync/syncnet.hpp"
#include "dsync/world.hpp"

namespace dsync {

// The investigator engine: Discovery (entry points), Investigation (local
// metadata + corroboration), Enumeration (remote peers), Recovery (piece-wise
// download with verification) and Verification (re-checked, digested report).

enum class AcqErr { InsufficientSources, NoEligiblePeers, ReverificationFailed };

class AcquisitionError : public std::runtime_error {
public:
    AcquisitionError(AcqErr kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    AcqErr kind;
};

// ---------------------------------------------------------------------------
// memory scan

struct MemoryFindings {
    struct SecretHit {
        Secret secret;
        size_t offset;  // byte offset of the 53-char window
    };
    std::vector<SecretHit> secrets;
    std::vector<std::pair<PeerID, size_t>> peer_ids;   // "peerid <40hex>" fragments
    std::vector<std::pair<uint16_t, size_t>> ports;    // "lport <port>" fragments
    std::vector<std::string> fragments;  // Base32 runs that failed validation (advisory)
};

// Finds maximal Base32-alphabet runs of length >= 53 and reports every
// 53-char window that decodes to a valid secret; candidates failing
// decode_secret are never reported.
MemoryFindings scan_memory(std::string_view blob);

// ---------------------------------------------------------------------------
// disk analysis

struct ShareLink {
    Secret secret;
    std::string folder;  // sync.dat path value
    ShareID derived;     // derive_share_id(secret)
    std::optional<ShareID> sync_id;                     // from the folder's .SyncID
    std::optional<std::filesystem::path> manifest_path;  // <derived>.db when present
    bool consistent = true;  // derived matches .SyncID and the manifest's share
};

struct LocalEvidence {
    ArtifactSet artifacts;
    std::optional<Settings> settings;
    std::vector<SyncDatConfig> configs;
    std::map<ShareID, ShareManifest> manifests;
    SyncLog log;
    std::vector<ShareLink> links;
    std::vector<std::string> errors;  // parse failures, collected per artifact
    // Audit trail: every file opened during analysis. locate_artifacts itself
    // only lists directories, so each entry here is a path the ArtifactSet
    // reported.
    std::vector<std::filesystem::path> reads;
};

LocalEvidence analyze_disk(const ArtifactSet& artifacts);

// ---------------------------------------------------------------------------
// corroboration

struct EntryPointBundle {
    std::optional<ArtifactSet> disk;
    std::optional<Bytes> memory;
    std::optional<std::vector<NetlogEntry>> network_log;
    std::optional<ArtifactSet> mobile;  // same layout, iOS profile

    bool empty() const { return !disk && !memory && !network_log && !mobile; }
};

enum class EvidenceItem { ShareID, Secret, PeerID, FileList, FileHash, RemotePeers, Ports };
enum class EvidenceSource { Network, RAM, SyncDat, SyncID, ShareDb, SyncLog };
enum class CellState { Found, NotFound, NotApplicable };
enum class ItemVerdict { AGREE, CONFLICT, SINGLE_SOURCE, NOT_FOUND };

constexpr size_t kEvidenceItems = 7;
constexpr size_t kEvidenceSources = 6;

const char* to_string(EvidenceItem i);
const char* to_string(EvidenceSource s);
const char* to_string(CellState s);
const char* to_string(ItemVerdict v);

// Applicability mask: which (item, source) cells the paper's metadata table
// marks recoverable at all; everything else is NotApplicable.
bool cell_applicable(EvidenceItem item, EvidenceSource source);

struct MatrixCell {
    CellState state = CellState::NotApplicable;
    std::vector<std::string> values;  // rendered values found in this source
};

struct CorroborationMatrix {
    std::array<std::array<MatrixCell, kEvidenceSources>, kEvidenceItems> cells;
    std::array<ItemVerdict, kEvidenceItems> verdicts{};
    std::vector<std::string> conflicts;  // differing values, verbatim

    MatrixCell& cell(EvidenceItem i, EvidenceSource s) {
        return cells[static_cast<size_t>(i)][static_cast<size_t>(s)];
    }
    const MatrixCell& cell(EvidenceItem i, EvidenceSource s) const {
        return cells[static_cast<size_t>(i)][static_cast<size_t>(s)];
    }
    ItemVerdict verdict(EvidenceItem i) const { return verdicts[static_cast<size_t>(i)]; }
};

// An item is corroborated when at least two sources yield an identical value.
CorroborationMatrix corroborate(const EntryPointBundle& bundle);

// ---------------------------------------------------------------------------
// targets

enum class TargetReason { DELETED_LOCALLY, INVALIDATED, LISTED_ONLY };

const char* to_string(TargetReason r);

struct TargetFile {
    ShareID share;
    std::string path;
    TargetReason reason = TargetReason::LISTED_ONLY;
    Digest20 expected_hash{};  // hash20: last known valid content
    std::optional<FileMeta> meta;
};

// One target per manifest entry with state=2 or invalidated=1, ordered by
// (share, path).
std::vector<TargetFile> identify_targets(const LocalEvidence& evidence);

// ---------------------------------------------------------------------------
// enumeration

struct EnumerationContext {
    Network* net = nullptr;       // live network; may be null for offline methods
    Node* investigator = nullptr;
    std::vector<Endpoint> known_hosts;
    const SyncLog* history = nullptr;  // for SyncLogHistory
};

std::vector<PeerRecord> enumerate_peers(const ShareID& share,
                                        const std::set<DiscoverySource>& methods,
                                        EnumerationContext& ctx);

// ---------------------------------------------------------------------------
// recovery

struct RecoveryPolicy {
    bool known_peers_only = true;  // no wire message may leave the supplied list
    int same_source_retries = 1;   // then all alternates, then mark missing
};

struct CustodyEvent {
    int64_t t_ms = 0;
    int64_t epoch = 0;
    std::string action;  // handshake_ok, request, response, verify_fail, refetch, ...
    std::string detail;
};

struct EvidenceRecord {
    TargetFile target;
    std::optional<FileMeta> meta_used;  // piece layout the recovery ran against
    std::map<uint32_t, Bytes> pieces;
    Bytes assembled;        // filled when every piece was recovered
    Digest20 whole_hash{};  // SHA1(assembled)
    VerificationResult verification;
    std::vector<std::pair<PeerRecord, std::vector<uint32_t>>> sources;
    std::vector<CustodyEvent> custody;
};

EvidenceRecord recover(const TargetFile& target, const std::vector<PeerRecord>& peers,
                       const Secret& secret, const RecoveryPolicy& policy, Network& net,
                       Node& investigator);

// ---------------------------------------------------------------------------
// report

struct CaseMetadata {
    std::string case_id;
    std::string investigator;
    std::string evidence_path;
};

struct EvidenceReport {
    CaseMetadata meta;
    CorroborationMatrix matrix;
    std::vector<EvidenceRecord> records;
    std::string digest;  // SHA-1 hex of the canonical machine-readable core
};

// Re-verifies every record's bytes against its stored hashes; throws
// AcquisitionError(ReverificationFailed) when any record was tampered with.
EvidenceReport build_report(std::vector<EvidenceRecord> records, CorroborationMatrix matrix,
                            CaseMetadata meta);

std::string report_to_json(const EvidenceReport& report);  // {"report": ..., "digest": ...}
std::string report_to_text(const EvidenceReport& report);

// Writes report.json, report.txt and recovered/<share>/<path> files.
void write_report_files(const EvidenceReport& report, const std::filesystem::path& case_dir);

}  // namespace dsync
