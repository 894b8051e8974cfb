#include "dsync/artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace dsync {

namespace fs = std::filesystem;
using bencode::BDict;
using bencode::BList;
using bencode::BValue;

namespace {

[[noreturn]] void schema(const std::string& what) {
    throw ArtifactError(ArtifactErr::SchemaViolation, what);
}

int flag_value(const BDict& d, std::string_view key) {
    const BValue* v = bencode::find(d, key);
    if (v == nullptr) return 0;
    if (!v->is_int()) schema("key '" + std::string(key) + "' must be an integer flag");
    int64_t n = v->integer();
    if (n != 0 && n != 1) schema("flag '" + std::string(key) + "' must be 0 or 1");
    return static_cast<int>(n);
}

int64_t int_value(const BDict& d, std::string_view key, int64_t fallback) {
    const BValue* v = bencode::find(d, key);
    if (v == nullptr) return fallback;
    if (!v->is_int()) schema("key '" + std::string(key) + "' must be an integer");
    return v->integer();
}

bool is_table3_key(std::string_view k) {
    static const std::set<std::string, std::less<>> keys = {
        "path",      "secret", "pub_key",        "stopped_by_user", "use_dht",
        "use_lan_broadcast", "use_relay", "use_tracker", "use_known_hosts",
        "known_hosts", "peers"};
    return keys.count(k) > 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// sync.dat

SyncDatConfig parse_sync_dat(std::string_view bytes) {
    BValue v = bencode::decode(bytes);
    if (!v.is_dict()) schema("sync.dat share block must be a dictionary");
    const BDict& d = v.dict();

    SyncDatConfig cfg;
    const BValue* path = bencode::find(d, "path");
    if (path == nullptr || !path->is_string()) schema("missing required key 'path'");
    cfg.path = path->str();

    const BValue* secret = bencode::find(d, "secret");
    if (secret == nullptr || !secret->is_string()) schema("missing required key 'secret'");
    try {
        cfg.secret = decode_secret(secret->str());
    } catch (const IdentityError& e) {
        schema(std::string("bad 'secret' value: ") + e.what());
    }

    if (const BValue* pk = bencode::find(d, "pub_key"); pk != nullptr) {
        if (!pk->is_string() || pk->str().size() != 32)
            schema("'pub_key' must be 32 raw bytes");
        cfg.pub_key = pk->str();
    }

    cfg.stopped_by_user = flag_value(d, "stopped_by_user");
    cfg.use_dht = flag_value(d, "use_dht");
    cfg.use_lan_broadcast = flag_value(d, "use_lan_broadcast");
    cfg.use_relay = flag_value(d, "use_relay");
    cfg.use_tracker = flag_value(d, "use_tracker");
    cfg.use_known_hosts = flag_value(d, "use_known_hosts");

    if (const BValue* kh = bencode::find(d, "known_hosts"); kh != nullptr) {
        if (!kh->is_list()) schema("'known_hosts' must be a list");
        for (const BValue& h : kh->list()) {
            if (!h.is_string()) schema("'known_hosts' entries must be strings");
            cfg.known_hosts.push_back(h.str());
        }
    }

    if (const BValue* peers = bencode::find(d, "peers"); peers != nullptr) {
        if (!peers->is_list()) schema("'peers' must be a list");
        for (const BValue& p : peers->list()) {
            if (!p.is_dict()) schema("'peers' entries must be dictionaries");
            const BDict& pd = p.dict();
            const BValue* id = bencode::find(pd, "id");
            if (id == nullptr || !id->is_string() || id->str().size() != 20)
                schema("peer 'id' must be 20 raw bytes");
            PeerSyncRecord rec;
            rec.id = PeerID::from_raw(id->str());
            rec.last_sync_completed = int_value(pd, "last_sync_completed", 0);
            cfg.peers.push_back(rec);
        }
    }

    for (const auto& [key, value] : d)
        if (!is_table3_key(key)) cfg.extra.emplace(key, value);

    return cfg;
}

Bytes write_sync_dat(const SyncDatConfig& cfg) {
    BDict d;
    d.emplace("path", cfg.path);
    d.emplace("secret", encode_secret(cfg.secret));
    if (cfg.pub_key) d.emplace("pub_key", *cfg.pub_key);
    d.emplace("stopped_by_user", cfg.stopped_by_user ? 1 : 0);
    d.emplace("use_dht", cfg.use_dht ? 1 : 0);
    d.emplace("use_lan_broadcast", cfg.use_lan_broadcast ? 1 : 0);
    d.emplace("use_relay", cfg.use_relay ? 1 : 0);
    d.emplace("use_tracker", cfg.use_tracker ? 1 : 0);
    d.emplace("use_known_hosts", cfg.use_known_hosts ? 1 : 0);
    BList hosts;
    for (const auto& h : cfg.known_hosts) hosts.emplace_back(h);
    d.emplace("known_hosts", std::move(hosts));
    BList peers;
    for (const auto& p : cfg.peers) {
        BDict pd;
        pd.emplace("id", p.id.raw());
        pd.emplace("last_sync_completed", p.last_sync_completed);
        peers.emplace_back(std::move(pd));
    }
    d.emplace("peers", std::move(peers));
    for (const auto& [key, value] : cfg.extra) d.emplace(key, value);
    return bencode::encode(BValue(std::move(d)));
}

std::vector<SyncDatConfig> parse_sync_dat_file(std::string_view bytes) {
    BValue v = bencode::decode(bytes);
    if (!v.is_dict()) schema("sync.dat must be a bencoded dictionary");
    const BList& shares = bencode::require_list(v.dict(), "shares");
    std::vector<SyncDatConfig> out;
    for (const BValue& block : shares) {
        if (!block.is_dict()) schema("'shares' entries must be dictionaries");
        out.push_back(parse_sync_dat(bencode::encode(block)));
    }
    return out;
}

Bytes write_sync_dat_file(const std::vector<SyncDatConfig>& shares) {
    BList blocks;
    for (const auto& s : shares)
        blocks.push_back(bencode::decode(write_sync_dat(s)));
    BDict d;
    d.emplace("shares", std::move(blocks));
    return bencode::encode(BValue(std::move(d)));
}

// ---------------------------------------------------------------------------
// manifest

const FileEntry* ShareManifest::find_file(std::string_view path) const {
    for (const auto& f : files)
        if (f.path == path) return &f;
    return nullptr;
}

const FileMeta* ShareManifest::find_meta(std::string_view path) const {
    for (const auto& m : meta)
        if (m.path == path) return &m;
    return nullptr;
}

ShareManifest parse_manifest(std::string_view bytes, std::vector<std::string>* warnings) {
    BValue v = bencode::decode(bytes);
    if (!v.is_dict()) schema("manifest must be a bencoded dictionary");
    const BDict& d = v.dict();

    ShareManifest m;
    const Bytes& share = bencode::require_str(d, "share");
    if (share.size() != 20)
        throw ArtifactError(ArtifactErr::HashLengthError, "'share' must be 20 raw bytes");
    m.share_id = ShareID::from_raw(share);

    std::set<std::string> file_paths;
    for (const BValue& fv : bencode::require_list(d, "files")) {
        if (!fv.is_dict()) schema("'files' entries must be dictionaries");
        const BDict& fd = fv.dict();
        FileEntry e;
        e.path = bencode::require_str(fd, "path");
        e.size = bencode::require_int(fd, "size");
        e.mtime = bencode::require_int(fd, "mtime");
        e.state = static_cast<int>(bencode::require_int(fd, "state"));
        e.invalidated = static_cast<int>(bencode::require_int(fd, "invalidated"));
        const Bytes& h = bencode::require_str(fd, "hash20");
        if (h.size() != 20)
            throw ArtifactError(ArtifactErr::HashLengthError,
                                "'hash20' must be 20 raw bytes for " + e.path);
        e.hash20 = digest20_from_raw(h);
        if (e.state != 1 && e.state != 2 && warnings != nullptr)
            warnings->push_back("file '" + e.path + "' has unrecognized state " +
                                std::to_string(e.state));
        if (e.invalidated != 0 && e.invalidated != 1 && warnings != nullptr)
            warnings->push_back("file '" + e.path + "' has unrecognized invalidated flag " +
                                std::to_string(e.invalidated));
        if (!file_paths.insert(e.path).second) schema("duplicate file path '" + e.path + "'");
        m.files.push_back(std::move(e));
    }

    std::set<std::string> meta_paths;
    for (const BValue& mv : bencode::require_list(d, "meta")) {
        if (!mv.is_dict()) schema("'meta' entries must be dictionaries");
        const BDict& md = mv.dict();
        FileMeta fm;
        fm.path = bencode::require_str(md, "path");
        fm.size = bencode::require_int(md, "size");
        fm.piece_len = bencode::require_int(md, "piece_len");
        if (fm.piece_len <= 0) schema("'piece_len' must be positive for " + fm.path);
        const Bytes& pieces = bencode::require_str(md, "pieces");
        if (pieces.size() % 20 != 0)
            throw ArtifactError(ArtifactErr::HashLengthError,
                                "'pieces' length is not a multiple of 20 for " + fm.path);
        for (size_t off = 0; off < pieces.size(); off += 20)
            fm.piece_hashes.push_back(digest20_from_raw(pieces.substr(off, 20)));
        if (static_cast<int64_t>(fm.piece_hashes.size()) != piece_count_for(fm.size, fm.piece_len))
            throw ArtifactError(ArtifactErr::PieceCountMismatch,
                                "piece count does not match ceil(size/piece_len) for " + fm.path);
        const Bytes& agg = bencode::require_str(md, "hash");
        if (agg.size() != 20)
            throw ArtifactError(ArtifactErr::HashLengthError,
                                "'hash' must be 20 raw bytes for " + fm.path);
        fm.aggregate_hash = digest20_from_raw(agg);
        if (fm.aggregate_hash != aggregate_hash(fm.piece_hashes))
            schema("aggregate hash does not match piece hashes for " + fm.path);
        if (!meta_paths.insert(fm.path).second) schema("duplicate meta path '" + fm.path + "'");
        m.meta.push_back(std::move(fm));
    }

    for (const auto& f : m.files)
        if (f.state == 1 && meta_paths.count(f.path) == 0)
            schema("present file '" + f.path + "' lacks a meta entry");

    return m;
}

Bytes write_manifest(const ShareManifest& m) {
    BDict d;
    BList files;
    for (const auto& f : m.files) {
        BDict fd;
        fd.emplace("hash20", raw(f.hash20));
        fd.emplace("invalidated", f.invalidated);
        fd.emplace("mtime", f.mtime);
        fd.emplace("path", f.path);
        fd.emplace("size", f.size);
        fd.emplace("state", f.state);
        files.emplace_back(std::move(fd));
    }
    BList meta;
    for (const auto& fm : m.meta) {
        BDict md;
        Bytes pieces;
        for (const auto& h : fm.piece_hashes) pieces += raw(h);
        md.emplace("hash", raw(fm.aggregate_hash));
        md.emplace("path", fm.path);
        md.emplace("piece_len", fm.piece_len);
        md.emplace("pieces", std::move(pieces));
        md.emplace("size", fm.size);
        meta.emplace_back(std::move(md));
    }
    d.emplace("files", std::move(files));
    d.emplace("meta", std::move(meta));
    d.emplace("share", m.share_id.raw());
    return bencode::encode(BValue(std::move(d)));
}

// ---------------------------------------------------------------------------
// .SyncID

ShareID parse_sync_id(std::string_view bytes) {
    if (bytes.size() != 20)
        throw ArtifactError(ArtifactErr::BadLength,
                            ".SyncID must be exactly 20 bytes, got " + std::to_string(bytes.size()));
    return ShareID::from_raw(bytes);
}

// ---------------------------------------------------------------------------
// sync.log

const char* to_string(LogEventKind k) {
    switch (k) {
        case LogEventKind::SYNC_START: return "SYNC_START";
        case LogEventKind::DOWNLOAD: return "DOWNLOAD";
        case LogEventKind::UPLOAD: return "UPLOAD";
        case LogEventKind::DELETE: return "DELETE";
        case LogEventKind::INVALIDATE: return "INVALIDATE";
        case LogEventKind::PEER_CONNECT: return "PEER_CONNECT";
    }
    return "?";
}

namespace {

std::optional<LogEventKind> log_kind_from(std::string_view s) {
    for (LogEventKind k : {LogEventKind::SYNC_START, LogEventKind::DOWNLOAD, LogEventKind::UPLOAD,
                           LogEventKind::DELETE, LogEventKind::INVALIDATE,
                           LogEventKind::PEER_CONNECT})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

// One event per line. `path=` consumes the remainder of the line so paths may
// contain spaces.
std::optional<LogEvent> parse_log_line(std::string_view line) {
    size_t sp = line.find(' ');
    if (sp == std::string_view::npos) return std::nullopt;
    int64_t ts = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + sp, ts);
    if (ec != std::errc() || ptr != line.data() + sp) return std::nullopt;

    std::string_view rest = line.substr(sp + 1);
    size_t sp2 = rest.find(' ');
    std::string_view kind_text = sp2 == std::string_view::npos ? rest : rest.substr(0, sp2);
    auto kind = log_kind_from(kind_text);
    if (!kind) return std::nullopt;

    LogEvent e;
    e.timestamp = ts;
    e.event = *kind;
    std::string_view tail = sp2 == std::string_view::npos ? std::string_view{} : rest.substr(sp2 + 1);
    while (!tail.empty()) {
        if (tail.starts_with("path=")) {
            e.path = std::string(tail.substr(5));
            break;
        }
        size_t end = tail.find(' ');
        std::string_view field = end == std::string_view::npos ? tail : tail.substr(0, end);
        tail = end == std::string_view::npos ? std::string_view{} : tail.substr(end + 1);
        if (field.starts_with("peer=")) {
            std::string_view hexid = field.substr(5);
            if (hexid.size() != 40) return std::nullopt;
            try {
                e.peer = PeerID::from_hex(hexid);
            } catch (const std::exception&) {
                return std::nullopt;
            }
        } else if (field.starts_with("host=")) {
            e.host = std::string(field.substr(5));
        } else if (!field.empty()) {
            return std::nullopt;  // unknown field: malformed, surfaces as a warning
        }
    }
    return e;
}

}  // namespace

SyncLog parse_sync_log(std::string_view text) {
    SyncLog out;
    int64_t last_ts = 0;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                                 : end - start);
        start = end == std::string_view::npos ? text.size() : end + 1;
        if (line.empty()) continue;
        auto e = parse_log_line(line);
        if (!e) {
            out.warnings.push_back(std::string(line));
            continue;
        }
        if (e->timestamp < last_ts)
            out.warnings.push_back("timestamp regression: " + std::string(line));
        last_ts = e->timestamp;
        out.events.push_back(std::move(*e));
    }
    return out;
}

std::string render_log_line(const LogEvent& e) {
    std::string line = std::to_string(e.timestamp);
    line += ' ';
    line += to_string(e.event);
    if (e.peer) {
        line += " peer=";
        line += e.peer->hex();
    }
    if (e.host) {
        line += " host=";
        line += *e.host;
    }
    if (e.path) {
        line += " path=";
        line += *e.path;
    }
    return line;
}

std::string render_sync_log(const std::vector<LogEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += render_log_line(e);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// settings.dat

Settings parse_settings(std::string_view bytes) {
    BValue v = bencode::decode(bytes);
    if (!v.is_dict()) schema("settings.dat must be a bencoded dictionary");
    const BDict& d = v.dict();
    Settings s;
    s.sync_archive_enabled = flag_value(d, "sync_archive_enabled");
    s.archive_days = int_value(d, "archive_days", 30);
    s.piece_len = int_value(d, "piece_len", kDefaultPieceLen);
    s.checkin_minutes = int_value(d, "checkin_minutes", 30);
    if (s.checkin_minutes < 10 || s.checkin_minutes > 60)
        throw ArtifactError(ArtifactErr::RangeError, "checkin_minutes outside [10, 60]");
    if (s.piece_len <= 0) throw ArtifactError(ArtifactErr::RangeError, "piece_len must be positive");
    if (s.archive_days < 0)
        throw ArtifactError(ArtifactErr::RangeError, "archive_days must be non-negative");
    return s;
}

Bytes write_settings(const Settings& s) {
    BDict d;
    d.emplace("archive_days", s.archive_days);
    d.emplace("checkin_minutes", s.checkin_minutes);
    d.emplace("piece_len", s.piece_len);
    d.emplace("sync_archive_enabled", s.sync_archive_enabled ? 1 : 0);
    return bencode::encode(BValue(std::move(d)));
}

// ---------------------------------------------------------------------------
// location discovery

const char* to_string(OsProfile p) {
    switch (p) {
        case OsProfile::Windows: return "Windows";
        case OsProfile::MacOS: return "MacOS";
        case OsProfile::Linux: return "Linux";
        case OsProfile::iOS: return "iOS";
    }
    return "?";
}

std::optional<OsProfile> os_profile_from_string(std::string_view s) {
    for (OsProfile p : {OsProfile::Windows, OsProfile::MacOS, OsProfile::Linux, OsProfile::iOS})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

fs::path app_dir_for(OsProfile profile) {
    switch (profile) {
        case OsProfile::Windows: return fs::path("AppData") / "Roaming" / "BitTorrent Sync";
        case OsProfile::MacOS: return fs::path("Library") / "Application Support" / "BitTorrent Sync";
        case OsProfile::Linux: return fs::path(".sync");
        case OsProfile::iOS:
            return fs::path("Applications") / "com.bittorent.BitTorrentSync" / "Documents" /
                   "BitTorrent Sync";
    }
    return {};
}

namespace {

bool is_manifest_name(const std::string& name) {
    if (name.size() != 43 || !name.ends_with(".db")) return false;
    for (size_t i = 0; i < 40; ++i) {
        char c = name[i];
        if (!((c >= '0' && c <= '9') || (c >= 'A' && c <= 'F'))) return false;
    }
    return true;
}

void scan_for_share_folders(const fs::path& dir, int depth, std::vector<ShareFolderArtifacts>& out) {
    if (depth > 12) return;
    std::vector<fs::path> subdirs;
    bool has_sync_id = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) {
            if (entry.path().filename() != ".SyncArchive") subdirs.push_back(entry.path());
        } else if (entry.path().filename() == ".SyncID") {
            has_sync_id = true;
        }
    }
    if (has_sync_id) out.push_back({dir, dir / ".SyncID"});
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) scan_for_share_folders(sub, depth + 1, out);
}

}  // namespace

ArtifactSet locate_artifacts(const fs::path& root, OsProfile profile) {
    if (!fs::exists(root) || !fs::is_directory(root))
        throw ArtifactError(ArtifactErr::RootNotFound, "root does not exist: " + root.string());

    ArtifactSet set;
    set.root = root;
    set.profile = profile;

    fs::path app = root / app_dir_for(profile);
    if (fs::exists(app) && fs::is_directory(app)) {
        std::vector<std::string> manifest_names;
        for (const auto& entry : fs::directory_iterator(app)) {
            if (!entry.is_regular_file()) continue;
            std::string name = entry.path().filename().string();
            if (name == "sync.dat")
                set.sync_dat = entry.path();
            else if (name == "settings.dat")
                set.settings_dat = entry.path();
            else if (name == "sync.log")
                set.sync_log = entry.path();
            else if (is_manifest_name(name))
                manifest_names.push_back(name);
        }
        std::sort(manifest_names.begin(), manifest_names.end());
        for (const auto& n : manifest_names) set.manifests.push_back(app / n);
    }

    scan_for_share_folders(root, 0, set.share_folders);
    return set;
}

}  // namespace dsync
