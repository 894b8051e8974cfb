#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "dsync/acquisition.hpp"
#include "dsync/cli.hpp"
#include "dsync/scenario.hpp"
#include "json.hpp"

namespace dsync {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const SimulateArgs& args) {
    Bytes text;
    try {
        text = read_file(args.scenario_file);
    } catch (const std::exception& e) {
        std::cerr << "simulate: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        ScenarioSpec spec = parse_scenario(text);
        if (args.seed_override) spec.params.seed = *args.seed_override;
        spec.params.loopback = args.loopback;
        ScenarioRun run = run_scenario(spec, args.out_dir);
        std::cout << "out: " << run.out_dir.string() << "\n";
        std::cout << "trace digest: " << run.trace_digest << "\n";
        return kExitOk;
    } catch (const ScenarioError& e) {
        std::cerr << "simulate: invalid scenario: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "simulate: " << e.what() << "\n";
        return kExitUsage;
    }
}

// ---------------------------------------------------------------------------
// inspect

namespace {

void print_config(const SyncDatConfig& cfg, std::ostream& out) {
    out << "  path:               " << cfg.path << "\n";
    out << "  secret:             " << encode_secret(cfg.secret) << "\n";
    out << "  derived ShareID:    " << derive_share_id(cfg.secret).hex() << "\n";
    if (cfg.pub_key) out << "  pub_key:            " << to_hex_upper(*cfg.pub_key) << "\n";
    out << "  stopped_by_user:    " << cfg.stopped_by_user << "\n";
    out << "  use_dht:            " << cfg.use_dht << "\n";
    out << "  use_lan_broadcast:  " << cfg.use_lan_broadcast << "\n";
    out << "  use_relay:          " << cfg.use_relay << "\n";
    out << "  use_tracker:        " << cfg.use_tracker << "\n";
    out << "  use_known_hosts:    " << cfg.use_known_hosts << "\n";
    for (const auto& h : cfg.known_hosts) out << "  known_host:         " << h << "\n";
    for (const auto& p : cfg.peers)
        out << "  peer:               " << p.id.hex()
            << " last_sync_completed=" << p.last_sync_completed << "\n";
}

json config_json(const SyncDatConfig& cfg) {
    json o;
    o["path"] = cfg.path;
    o["secret"] = encode_secret(cfg.secret);
    o["share_id"] = derive_share_id(cfg.secret).hex();
    o["stopped_by_user"] = cfg.stopped_by_user;
    o["use_dht"] = cfg.use_dht;
    o["use_lan_broadcast"] = cfg.use_lan_broadcast;
    o["use_relay"] = cfg.use_relay;
    o["use_tracker"] = cfg.use_tracker;
    o["use_known_hosts"] = cfg.use_known_hosts;
    o["known_hosts"] = cfg.known_hosts;
    json peers = json::array();
    for (const auto& p : cfg.peers) {
        json jp;
        jp["id"] = p.id.hex();
        jp["last_sync_completed"] = p.last_sync_completed;
        peers.push_back(std::move(jp));
    }
    o["peers"] = std::move(peers);
    return o;
}

enum class ArtifactKind { SyncId, SyncDat, Manifest, SettingsFile, SyncLogFile, Unknown };

ArtifactKind sniff_kind(const fs::path& p, const Bytes& bytes) {
    std::string name = p.filename().string();
    if (name == ".SyncID") return ArtifactKind::SyncId;
    if (name == "sync.dat") return ArtifactKind::SyncDat;
    if (name == "settings.dat") return ArtifactKind::SettingsFile;
    if (name == "sync.log") return ArtifactKind::SyncLogFile;
    if (name.size() == 43 && name.ends_with(".db")) return ArtifactKind::Manifest;

    try {
        bencode::BValue v = bencode::decode(bytes);
        if (v.is_dict()) {
            const bencode::BDict& d = v.dict();
            if (bencode::find(d, "shares") != nullptr) return ArtifactKind::SyncDat;
            if (bencode::find(d, "files") != nullptr && bencode::find(d, "meta") != nullptr)
                return ArtifactKind::Manifest;
            static const std::set<std::string> settings_keys = {
                "sync_archive_enabled", "archive_days", "piece_len", "checkin_minutes"};
            bool settings_like = true;
            for (const auto& [k, _] : d)
                if (settings_keys.count(k) == 0) settings_like = false;
            if (settings_like) return ArtifactKind::SettingsFile;
        }
        return ArtifactKind::Unknown;
    } catch (const bencode::DecodeError&) {
    }
    if (bytes.size() == 20) return ArtifactKind::SyncId;
    SyncLog log = parse_sync_log(bytes);
    if (!log.events.empty() && log.warnings.empty()) return ArtifactKind::SyncLogFile;
    return ArtifactKind::Unknown;
}

}  // namespace

int cmd_inspect(const InspectArgs& args) {
    if (!fs::exists(args.artifact)) {
        std::cerr << "inspect: no such file: " << args.artifact.string() << "\n";
        return kExitUsage;
    }
    Bytes bytes = read_file(args.artifact);
    ArtifactKind kind = sniff_kind(args.artifact, bytes);
    const bool as_json = args.format == "json";

    try {
        switch (kind) {
            case ArtifactKind::SyncId: {
                ShareID id = parse_sync_id(bytes);
                if (as_json) {
                    json o;
                    o["kind"] = ".SyncID";
                    o["share_id"] = id.hex();
                    std::cout << o.dump(2) << "\n";
                } else {
                    std::cout << ".SyncID\n  ShareID: " << id.hex() << "\n";
                }
                return kExitOk;
            }
            case ArtifactKind::SyncDat: {
                auto configs = parse_sync_dat_file(bytes);
                if (as_json) {
                    json o;
                    o["kind"] = "sync.dat";
                    json arr = json::array();
                    for (const auto& c : configs) arr.push_back(config_json(c));
                    o["shares"] = std::move(arr);
                    std::cout << o.dump(2) << "\n";
                } else {
                    std::cout << "sync.dat: " << configs.size() << " share(s)\n";
                    size_t i = 0;
                    for (const auto& c : configs) {
                        std::cout << "share " << i++ << ":\n";
                        print_config(c, std::cout);
                    }
                }
                return kExitOk;
            }
            case ArtifactKind::Manifest: {
                std::vector<std::string> warnings;
                ShareManifest m = parse_manifest(bytes, &warnings);
                if (as_json) {
                    json o;
                    o["kind"] = "manifest";
                    o["share_id"] = m.share_id.hex();
                    json files = json::array();
                    for (const auto& f : m.files) {
                        json jf;
                        jf["path"] = f.path;
                        jf["size"] = f.size;
                        jf["mtime"] = f.mtime;
                        jf["state"] = f.state;
                        jf["invalidated"] = f.invalidated;
                        jf["hash20"] = hex(f.hash20);
                        files.push_back(std::move(jf));
                    }
                    o["files"] = std::move(files);
                    json meta = json::array();
                    for (const auto& fm : m.meta) {
                        json jm;
                        jm["path"] = fm.path;
                        jm["size"] = fm.size;
                        jm["piece_len"] = fm.piece_len;
                        jm["pieces"] = fm.piece_count();
                        jm["hash"] = hex(fm.aggregate_hash);
                        meta.push_back(std::move(jm));
                    }
                    o["meta"] = std::move(meta);
                    o["warnings"] = warnings;
                    std::cout << o.dump(2) << "\n";
                } else {
                    std::cout << "manifest for share " << m.share_id.hex() << "\n";
                    for (const auto& f : m.files) {
                        std::cout << "  " << f.path << "  size=" << f.size << " mtime=" << f.mtime
                                  << " state=" << f.state << " invalidated=" << f.invalidated
                                  << "\n    hash20=" << hex(f.hash20) << "\n";
                    }
                    for (const auto& fm : m.meta)
                        std::cout << "  meta " << fm.path << "  pieces=" << fm.piece_count()
                                  << " piece_len=" << fm.piece_len
                                  << "\n    hash=" << hex(fm.aggregate_hash) << "\n";
                    for (const auto& w : warnings) std::cout << "  warning: " << w << "\n";
                }
                return kExitOk;
            }
            case ArtifactKind::SettingsFile: {
                Settings s = parse_settings(bytes);
                if (as_json) {
                    json o;
                    o["kind"] = "settings.dat";
                    o["sync_archive_enabled"] = s.sync_archive_enabled;
                    o["archive_days"] = s.archive_days;
                    o["piece_len"] = s.piece_len;
                    o["checkin_minutes"] = s.checkin_minutes;
                    std::cout << o.dump(2) << "\n";
                } else {
                    std::cout << "settings.dat\n  sync_archive_enabled: " << s.sync_archive_enabled
                              << "\n  archive_days:         " << s.archive_days
                              << "\n  piece_len:            " << s.piece_len
                              << "\n  checkin_minutes:      " << s.checkin_minutes << "\n";
                }
                return kExitOk;
            }
            case ArtifactKind::SyncLogFile: {
                SyncLog log = parse_sync_log(bytes);
                if (as_json) {
                    json o;
                    o["kind"] = "sync.log";
                    json events = json::array();
                    for (const auto& e : log.events) {
                        json je;
                        je["timestamp"] = e.timestamp;
                        je["event"] = to_string(e.event);
                        if (e.peer) je["peer"] = e.peer->hex();
                        if (e.host) je["host"] = *e.host;
                        if (e.path) je["path"] = *e.path;
                        events.push_back(std::move(je));
                    }
                    o["events"] = std::move(events);
                    o["warnings"] = log.warnings;
                    std::cout << o.dump(2) << "\n";
                } else {
                    std::cout << "sync.log: " << log.events.size() << " event(s), "
                              << log.warnings.size() << " warning(s)\n";
                    for (const auto& e : log.events) std::cout << "  " << render_log_line(e) << "\n";
                    for (const auto& w : log.warnings) std::cout << "  warning: " << w << "\n";
                }
                return kExitOk;
            }
            case ArtifactKind::Unknown:
                // Bencode-shaped but undecodable input is a parse failure with
                // a location, not an unknown kind.
                if (!bytes.empty() &&
                    (bytes[0] == 'd' || bytes[0] == 'l' || bytes[0] == 'i' ||
                     (bytes[0] >= '0' && bytes[0] <= '9'))) {
                    try {
                        (void)bencode::decode(bytes);
                    } catch (const bencode::DecodeError& e) {
                        std::cerr << "inspect: parse failure: " << e.what() << "\n";
                        return kExitParse;
                    }
                }
                std::cerr << "inspect: unrecognized artifact kind\n";
                return kExitUsage;
        }
    } catch (const bencode::DecodeError& e) {
        std::cerr << "inspect: parse failure: " << e.what() << "\n";
        return kExitParse;
    } catch (const ArtifactError& e) {
        std::cerr << "inspect: parse failure: " << e.what() << "\n";
        return kExitParse;
    }
    return kExitUsage;
}

// ---------------------------------------------------------------------------
// shareid

int cmd_shareid(const ShareIdArgs& args) {
    try {
        Secret s = decode_secret(args.secret_text);
        std::cout << derive_share_id(s).hex() << "\n";
        return kExitOk;
    } catch (const IdentityError& e) {
        std::cerr << "shareid: " << e.what() << "\n";
        return kExitParse;
    }
}

// ---------------------------------------------------------------------------
// acquire

namespace {

std::optional<DiscoverySource> method_from(const std::string& name) {
    if (name == "known" || name == "known_hosts") return DiscoverySource::KnownHosts;
    if (name == "tracker") return DiscoverySource::Tracker;
    if (name == "dht") return DiscoverySource::Dht;
    if (name == "multicast") return DiscoverySource::Multicast;
    if (name == "synclog") return DiscoverySource::SyncLogHistory;
    return std::nullopt;
}

std::optional<OsProfile> detect_profile(const fs::path& root,
                                        const std::optional<std::string>& flag) {
    if (flag) return os_profile_from_string(*flag);
    for (OsProfile p : {OsProfile::Linux, OsProfile::Windows, OsProfile::MacOS, OsProfile::iOS}) {
        ArtifactSet set = locate_artifacts(root, p);
        if (set.sync_dat || !set.manifests.empty()) return p;
    }
    return std::nullopt;
}

}  // namespace

int cmd_acquire(const AcquireArgs& args) {
    if (!fs::exists(args.evidence_dir) || !fs::is_directory(args.evidence_dir)) {
        std::cerr << "acquire: evidence directory does not exist: " << args.evidence_dir.string()
                  << "\n";
        return kExitUsage;
    }

    // Method set; --known-peer alone implies the Known Peers policy.
    std::set<DiscoverySource> methods;
    for (const auto& name : args.methods) {
        if (name == "none") continue;
        auto m = method_from(name);
        if (!m) {
            std::cerr << "acquire: unknown method \"" << name << "\"\n";
            return kExitUsage;
        }
        methods.insert(*m);
    }
    if (methods.empty() && !args.known_peers.empty()) methods.insert(DiscoverySource::KnownHosts);
    if (methods.empty()) {
        std::cerr << "acquire: no discovery methods enabled and no --known-peer supplied\n";
        return kExitUsage;
    }
    std::vector<Endpoint> known;
    for (const auto& text : args.known_peers) {
        try {
            known.push_back(Endpoint::parse(text));
        } catch (const std::invalid_argument&) {
            std::cerr << "acquire: bad --known-peer \"" << text << "\" (expected host:port)\n";
            return kExitUsage;
        }
    }
    if (methods.count(DiscoverySource::KnownHosts) > 0 && known.empty()) {
        std::cerr << "acquire: method \"known\" requires at least one --known-peer\n";
        return kExitUsage;
    }

    // Step 1 — Discovery: assemble the entry-point bundle.
    auto profile = detect_profile(args.evidence_dir, args.os_profile);
    if (!profile) {
        std::cerr << "acquire: could not detect an artifact layout under "
                  << args.evidence_dir.string() << " (use --os)\n";
        return kExitUsage;
    }
    EntryPointBundle bundle;
    try {
        bundle.disk = locate_artifacts(args.evidence_dir, *profile);
    } catch (const ArtifactError& e) {
        std::cerr << "acquire: " << e.what() << "\n";
        return kExitUsage;
    }

    fs::path world_dir = args.world_dir.value_or(args.evidence_dir.parent_path());
    fs::path memory_path = args.memory_file.value_or(args.evidence_dir / "memory.bin");
    if (fs::exists(memory_path)) bundle.memory = read_file(memory_path);
    fs::path netlog_path = args.netlog_file.value_or(world_dir / "netlog.json");
    if (fs::exists(netlog_path)) {
        try {
            bundle.network_log = netlog_from_json(read_file(netlog_path));
        } catch (const std::exception& e) {
            std::cerr << "acquire: bad netlog: " << e.what() << "\n";
            return kExitParse;
        }
    }
    if (args.mobile_dir) {
        try {
            bundle.mobile = locate_artifacts(*args.mobile_dir, OsProfile::iOS);
        } catch (const ArtifactError& e) {
            std::cerr << "acquire: " << e.what() << "\n";
            return kExitUsage;
        }
    }

    // Step 2 — Investigation: local metadata and corroboration.
    LocalEvidence evidence = analyze_disk(*bundle.disk);
    CorroborationMatrix matrix = corroborate(bundle);

    // Step 3 — Enumeration target list.
    std::vector<TargetFile> targets = identify_targets(evidence);
    for (const auto& extra : args.extra_targets) {
        bool found = false;
        for (const auto& [share, manifest] : evidence.manifests) {
            if (const FileEntry* f = manifest.find_file(extra); f != nullptr) {
                TargetFile t;
                t.share = share;
                t.path = f->path;
                t.reason = TargetReason::LISTED_ONLY;
                t.expected_hash = f->hash20;
                if (const FileMeta* meta = manifest.find_meta(extra); meta != nullptr)
                    t.meta = *meta;
                targets.push_back(std::move(t));
                found = true;
            }
        }
        if (!found) {
            std::cerr << "acquire: --target \"" << extra << "\" is not in any manifest\n";
            return kExitUsage;
        }
    }

    // Secrets per share: --secret overrides, else sync.dat.
    std::map<ShareID, Secret> secrets;
    if (args.secret_text) {
        try {
            Secret s = decode_secret(*args.secret_text);
            secrets[derive_share_id(s)] = s;
        } catch (const IdentityError& e) {
            std::cerr << "acquire: bad --secret: " << e.what() << "\n";
            return kExitUsage;
        }
    }
    for (const auto& cfg : evidence.configs) secrets.emplace(derive_share_id(cfg.secret), cfg.secret);

    // Live network, when the simulation world is available.
    std::unique_ptr<Network> net;
    if (fs::exists(world_dir / "net.json")) {
        try {
            net = load_world(world_dir, args.seed);
        } catch (const std::exception& e) {
            std::cerr << "acquire: cannot load world: " << e.what() << "\n";
            return kExitParse;
        }
    } else {
        NetParams params;
        params.seed = args.seed;
        net = std::make_unique<Network>(params);
    }

    std::string lan = "forensic-lab";
    if (args.lan_domain) {
        lan = *args.lan_domain;
    } else if (methods.count(DiscoverySource::Multicast) > 0 && !net->nodes().empty()) {
        lan = net->nodes().begin()->second.lan_domain;  // join the first observed domain
    }
    Node& investigator = net->add_node("investigator", {"10.99.0.99", 3839}, lan);
    investigator.dht_member = false;  // isolated workstation: query, never store

    const bool known_peers_only =
        methods == std::set<DiscoverySource>{DiscoverySource::KnownHosts};

    // Steps 3..5 per target share: enumerate, recover, verify.
    std::vector<EvidenceRecord> records;
    std::map<ShareID, std::vector<PeerRecord>> peers_by_share;
    for (const TargetFile& target : targets) {
        if (peers_by_share.count(target.share) == 0) {
            EnumerationContext ctx;
            ctx.net = net.get();
            ctx.investigator = &investigator;
            ctx.known_hosts = known;
            ctx.history = &evidence.log;
            peers_by_share[target.share] = enumerate_peers(target.share, methods, ctx);
        }
        std::vector<PeerRecord> peers = peers_by_share[target.share];
        if (known_peers_only) {
            std::erase_if(peers, [&](const PeerRecord& p) {
                return std::find(known.begin(), known.end(), p.addr) == known.end();
            });
        }
        // Contact order: the supplied known-peer list order first (investigator
        // priority), everything else after it by address.
        auto list_pos = [&](const Endpoint& e) {
            auto it = std::find(known.begin(), known.end(), e);
            return it == known.end() ? known.size() : static_cast<size_t>(it - known.begin());
        };
        std::sort(peers.begin(), peers.end(), [&](const PeerRecord& x, const PeerRecord& y) {
            size_t px = list_pos(x.addr), py = list_pos(y.addr);
            return px != py ? px < py : x.addr < y.addr;
        });
        auto secret_it = secrets.find(target.share);
        if (secret_it == secrets.end()) {
            std::cerr << "acquire: no secret available for share " << target.share.hex() << "\n";
            return kExitUsage;
        }
        RecoveryPolicy policy;
        policy.known_peers_only = known_peers_only;
        try {
            records.push_back(
                recover(target, peers, secret_it->second, policy, *net, investigator));
        } catch (const AcquisitionError& e) {
            EvidenceRecord r;
            r.target = target;
            r.verification.status = VerifyStatus::PARTIAL;
            r.custody.push_back({net->clock.now_ms(), net->epoch_now(), "no_eligible_peers",
                                 e.what()});
            records.push_back(std::move(r));
        }
    }

    // Step 5 — Verification: re-checked, digested report.
    CaseMetadata meta;
    meta.case_id = args.case_id;
    meta.investigator = args.investigator;
    meta.evidence_path = args.evidence_dir.filename().string();
    EvidenceReport report;
    try {
        report = build_report(std::move(records), std::move(matrix), std::move(meta));
    } catch (const AcquisitionError& e) {
        std::cerr << "acquire: " << e.what() << "\n";
        return kExitParse;
    }
    write_report_files(report, args.case_dir);

    std::cout << "case:   " << report.meta.case_id << "\n";
    std::cout << "digest: " << report.digest << "\n";
    size_t full = 0;
    for (const auto& r : report.records) {
        std::cout << "target: " << r.target.path << " -> " << to_string(r.verification.status)
                  << "\n";
        if (r.verification.status == VerifyStatus::FULL_MATCH) ++full;
    }
    if (report.records.empty()) {
        std::cout << "no recoverable targets found\n";
        return kExitNothing;
    }
    return full == report.records.size() ? kExitOk : kExitDegraded;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const VerifyArgs& args) {
    if (!fs::exists(args.file) || !fs::exists(args.manifest)) {
        std::cerr << "verify: file or manifest does not exist\n";
        return kExitUsage;
    }
    ShareManifest manifest;
    try {
        manifest = parse_manifest(read_file(args.manifest));
    } catch (const std::exception& e) {
        std::cerr << "verify: manifest parse failure: " << e.what() << "\n";
        return kExitParse;
    }
    std::string name = args.path_name.value_or(args.file.filename().string());
    const FileEntry* entry = manifest.find_file(name);
    if (entry == nullptr) {
        std::cerr << "verify: \"" << name << "\" is not in the manifest\n";
        return kExitUsage;
    }
    Bytes content = read_file(args.file);
    Digest20 whole = sha1(content);
    bool whole_ok = whole == entry->hash20;
    std::cout << "whole-file SHA1: " << hex(whole) << (whole_ok ? "  [match]" : "  [MISMATCH]")
              << "\n";

    bool aggregate_ok = true;
    if (const FileMeta* meta = manifest.find_meta(name); meta != nullptr) {
        FileIndex idx = index_file(content, meta->piece_len);
        aggregate_ok = idx.aggregate_hash == meta->aggregate_hash;
        std::cout << "piece aggregate: " << hex(idx.aggregate_hash)
                  << (aggregate_ok ? "  [match]" : "  [MISMATCH]") << "\n";
    }
    return whole_ok && aggregate_ok ? kExitOk : kExitDegraded;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const ReportArgs& args) {
    if (!fs::exists(args.report_json)) {
        std::cerr << "report: no such file: " << args.report_json.string() << "\n";
        return kExitUsage;
    }
    json full;
    try {
        full = json::parse(read_file(args.report_json));
    } catch (const json::parse_error& e) {
        std::cerr << "report: " << e.what() << "\n";
        return kExitParse;
    }
    if (!full.contains("report") || !full.contains("digest")) {
        std::cerr << "report: missing report/digest fields\n";
        return kExitParse;
    }
    std::string recomputed = hex(sha1(full.at("report").dump()));
    std::string stored = full.at("digest").get<std::string>();
    bool ok = recomputed == stored;

    const json& core = full.at("report");
    std::cout << "case:          " << core.at("case").value("id", "") << "\n";
    std::cout << "stored digest: " << stored << "\n";
    std::cout << "recomputed:    " << recomputed << (ok ? "  [match]" : "  [MISMATCH]") << "\n";
    for (const auto& r : core.value("records", json::array()))
        std::cout << "record: " << r.value("path", "") << " -> " << r.value("status", "") << "\n";
    if (args.format == "json") std::cout << full.dump(2) << "\n";
    return ok ? kExitOk : kExitDegraded;
}

// ---------------------------------------------------------------------------
// argv surface

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"decentralized-sync network simulator and forensic acquisition toolkit", "dsync"};
    app.require_subcommand(1);

    uint64_t seed = 1337;
    std::string format = "text";
    app.add_option("--seed", seed, "seed for simulation/acquisition determinism");
    app.add_option("--format", format, "output format: text or json")
        ->check(CLI::IsMember({"text", "json"}));

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run a scenario and write artifact trees");
    simulate->add_option("scenario", sim.scenario_file, "scenario JSON file")->required();
    simulate->add_option("--out", sim.out_dir, "output directory")->required();
    simulate->add_flag("--loopback", sim.loopback,
                       "use the UDP loopback transport (demonstration only)");

    InspectArgs ins;
    auto* inspect = app.add_subcommand("inspect", "parse and pretty-print one artifact");
    inspect->add_option("artifact", ins.artifact, "artifact file")->required();

    ShareIdArgs sid;
    auto* shareid = app.add_subcommand("shareid", "derive the ShareID of a secret");
    shareid->add_option("secret", sid.secret_text, "secret in Base32 text form")->required();

    AcquireArgs acq;
    std::string methods_csv;
    auto* acquire =
        app.add_subcommand("acquire", "run the five-step acquisition against an evidence tree");
    acquire->add_option("evidence", acq.evidence_dir, "evidence directory (one node's tree)")
        ->required();
    auto* out_opt =
        acquire->add_option("--out", acq.case_dir, "case directory (default: cases/<case id>)");
    acquire->add_option("--world", acq.world_dir, "world directory (default: evidence parent)");
    acquire->add_option("--memory", acq.memory_file, "memory image file");
    acquire->add_option("--netlog", acq.netlog_file, "network observation log (JSON)");
    acquire->add_option("--mobile", acq.mobile_dir, "mobile artifact tree (iOS layout)");
    acquire->add_option("--methods", methods_csv,
                        "comma list of known,tracker,dht,multicast,synclog (or none)");
    acquire->add_option("--known-peer", acq.known_peers, "allowed peer host:port (repeatable)");
    acquire->add_option("--secret", acq.secret_text, "override secret (Base32)");
    acquire->add_option("--target", acq.extra_targets, "extra target path (repeatable)");
    acquire->add_option("--os", acq.os_profile, "artifact layout: Windows, MacOS, Linux, iOS");
    acquire->add_option("--lan", acq.lan_domain, "LAN domain for multicast discovery");
    acquire->add_option("--case", acq.case_id, "case identifier");
    acquire->add_option("--investigator", acq.investigator, "investigator name");

    VerifyArgs ver;
    auto* verify = app.add_subcommand("verify", "check a file against a share manifest");
    verify->add_option("file", ver.file, "file to verify")->required();
    verify->add_option("--manifest", ver.manifest, "manifest (<ShareID>.db)")->required();
    verify->add_option("--path", ver.path_name, "manifest path (default: file basename)");

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "re-verify and render an evidence report");
    report->add_option("report", rep.report_json, "report.json file")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostream& out = e.get_exit_code() == 0 ? std::cout : std::cerr;
        int code = app.exit(e, out, out);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (simulate->parsed()) {
        if (app.count("--seed") > 0) sim.seed_override = seed;
        return cmd_simulate(sim);
    }
    if (inspect->parsed()) {
        ins.format = format;
        return cmd_inspect(ins);
    }
    if (shareid->parsed()) return cmd_shareid(sid);
    if (acquire->parsed()) {
        acq.seed = seed;
        if (out_opt->count() == 0) acq.case_dir = fs::path("cases") / acq.case_id;
        if (!methods_csv.empty()) {
            size_t start = 0;
            while (start <= methods_csv.size()) {
                size_t end = methods_csv.find(',', start);
                if (end == std::string::npos) end = methods_csv.size();
                std::string item = methods_csv.substr(start, end - start);
                if (!item.empty()) acq.methods.push_back(item);
                start = end + 1;
                if (end == methods_csv.size()) break;
            }
        }
        return cmd_acquire(acq);
    }
    if (verify->parsed()) return cmd_verify(ver);
    if (report->parsed()) {
        rep.format = format;
        return cmd_report(rep);
    }
    return kExitUsage;
}

}  // namespace dsync
