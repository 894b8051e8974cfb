#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsync/bencode.hpp"
#include "dsync/identity.hpp"
#include "dsync/integrity.hpp"

namespace dsync {

// On-disk artifacts: sync.dat, settings.dat, sync.log, .SyncID and the
// per-share <ShareID>.db manifest. All bencoded artifacts parse in strict
// mode (evidence must be bit-exact); sync.log is LF-terminated UTF-8 text.

enum class ArtifactErr {
    SchemaViolation,
    HashLengthError,
    PieceCountMismatch,
    BadLength,
    RangeError,
    RootNotFound,
};

class ArtifactError : public std::runtime_error {
public:
    ArtifactError(ArtifactErr kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    ArtifactErr kind;
};

// ---------------------------------------------------------------------------
// sync.dat

struct PeerSyncRecord {
    PeerID id;
    int64_t last_sync_completed = 0;  // epoch seconds

    bool operator==(const PeerSyncRecord&) const = default;
};

// One per-share block of sync.dat. The file itself is {"shares": [block...]}.
struct SyncDatConfig {
    std::string path;  // share folder, '/'-separated, relative to the node root
    Secret secret;
    std::optional<Bytes> pub_key;  // opaque 32 bytes, present after an online handshake
    int stopped_by_user = 0;
    int use_dht = 0;
    int use_lan_broadcast = 0;
    int use_relay = 0;  // parsed and preserved; behaviorally inert
    int use_tracker = 0;
    int use_known_hosts = 0;
    std::vector<std::string> known_hosts;  // "host:port" entries
    std::vector<PeerSyncRecord> peers;
    bencode::BDict extra;  // unknown keys, preserved verbatim

    bool operator==(const SyncDatConfig&) const = default;
};

SyncDatConfig parse_sync_dat(std::string_view bytes);      // one Table-3 block
Bytes write_sync_dat(const SyncDatConfig& config);

std::vector<SyncDatConfig> parse_sync_dat_file(std::string_view bytes);
Bytes write_sync_dat_file(const std::vector<SyncDatConfig>& shares);

// ---------------------------------------------------------------------------
// <ShareID>.db manifest

struct FileEntry {
    std::string path;
    int64_t size = 0;
    int64_t mtime = 0;        // epoch seconds
    int state = 1;            // 1 = present, 2 = deleted on the source system
    int invalidated = 0;      // 1 = locally deleted/modified, frozen out of sync
    Digest20 hash20{};        // SHA-1 of the last known valid content

    bool operator==(const FileEntry&) const = default;
};

struct ShareManifest {
    ShareID share_id;
    std::vector<FileEntry> files;
    std::vector<FileMeta> meta;

    const FileEntry* find_file(std::string_view path) const;
    const FileMeta* find_meta(std::string_view path) const;

    bool operator==(const ShareManifest&) const = default;
};

ShareManifest parse_manifest(std::string_view bytes, std::vector<std::string>* warnings = nullptr);
Bytes write_manifest(const ShareManifest& manifest);

// ---------------------------------------------------------------------------
// .SyncID — 20 raw bytes

ShareID parse_sync_id(std::string_view bytes);

// ---------------------------------------------------------------------------
// sync.log — `<epoch> <EVENT> [peer=<40hex>] [host=<h:p>] [path=<text>]`

enum class LogEventKind { SYNC_START, DOWNLOAD, UPLOAD, DELETE, INVALIDATE, PEER_CONNECT };

const char* to_string(LogEventKind k);

struct LogEvent {
    int64_t timestamp = 0;  // epoch seconds
    LogEventKind event = LogEventKind::SYNC_START;
    std::optional<PeerID> peer;
    std::optional<std::string> host;  // "address:port"
    std::optional<std::string> path;
};

struct SyncLog {
    std::vector<LogEvent> events;
    std::vector<std::string> warnings;  // malformed lines, kept verbatim
};

SyncLog parse_sync_log(std::string_view text);
std::string render_sync_log(const std::vector<LogEvent>& events);
std::string render_log_line(const LogEvent& e);

// ---------------------------------------------------------------------------
// settings.dat

struct Settings {
    int sync_archive_enabled = 0;
    int64_t archive_days = 30;
    int64_t piece_len = kDefaultPieceLen;
    int64_t checkin_minutes = 30;  // valid range [10, 60]

    bool operator==(const Settings&) const = default;
};

Settings parse_settings(std::string_view bytes);
Bytes write_settings(const Settings& s);

// ---------------------------------------------------------------------------
// Artifact location discovery

enum class OsProfile { Windows, MacOS, Linux, iOS };

const char* to_string(OsProfile p);
std::optional<OsProfile> os_profile_from_string(std::string_view s);

// Application data directory relative to a seized tree's root.
std::filesystem::path app_dir_for(OsProfile profile);

struct ShareFolderArtifacts {
    std::filesystem::path folder;
    std::optional<std::filesystem::path> sync_id;  // <folder>/.SyncID
};

struct ArtifactSet {
    std::filesystem::path root;
    OsProfile profile = OsProfile::Linux;
    std::optional<std::filesystem::path> sync_dat;
    std::optional<std::filesystem::path> settings_dat;
    std::optional<std::filesystem::path> sync_log;
    std::vector<std::filesystem::path> manifests;  // <40-hex>.db under the app dir
    std::vector<ShareFolderArtifacts> share_folders;

    bool empty() const {
        return !sync_dat && !settings_dat && !sync_log && manifests.empty() &&
               share_folders.empty();
    }
};

// Directory traversal only — never opens a file. Missing artifacts are
// reported absent, not errors.
ArtifactSet locate_artifacts(const std::filesystem::path& root, OsProfile profile);

}  // namespace dsync
