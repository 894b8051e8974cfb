#include "dsync/acquisition.hpp"

#include <algorithm>

#include "doctest.h"
#include "dsync/scenario.hpp"
#include "dsync/world.hpp"
#include "test_util.hpp"

using namespace dsync;
using dsync::test::TempDir;

namespace {

Secret master_secret(uint64_t seed) {
    SeededRng rng(seed);
    return generate_secret(AccessLevel::Master, rng);
}

// Plants text at a fixed offset with non-alphabet flanks, the unambiguous
// ground truth for the plant-and-scan oracle.
void plant_text(Bytes& blob, size_t offset, std::string_view text) {
    REQUIRE(offset >= 1);
    REQUIRE(offset + text.size() + 1 <= blob.size());
    blob[offset - 1] = '\n';
    std::copy(text.begin(), text.end(), blob.begin() + static_cast<ptrdiff_t>(offset));
    blob[offset + text.size()] = '\n';
}

SyncDatConfig share_config(const std::string& folder) {
    SyncDatConfig cfg;
    cfg.path = folder;
    cfg.use_tracker = 1;
    cfg.use_dht = 1;
    cfg.use_lan_broadcast = 1;
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// scan_memory

TEST_CASE("planted secret is found at its exact offset in a 1 MiB noise blob") {
    SeededRng noise(77);
    Bytes blob = noise.bytes(1 << 20);
    Secret secret = master_secret(5);
    std::string text = encode_secret(secret);
    plant_text(blob, 123457, text);

    MemoryFindings found = scan_memory(blob);
    REQUIRE(found.secrets.size() == 1);
    CHECK(found.secrets[0].offset == 123457);
    CHECK(found.secrets[0].secret == secret);
}

TEST_CASE("empty blob yields nothing") {
    MemoryFindings found = scan_memory("");
    CHECK(found.secrets.empty());
    CHECK(found.peer_ids.empty());
    CHECK(found.ports.empty());
    CHECK(found.fragments.empty());
}

TEST_CASE("a 52-character truncation is a fragment, never a candidate") {
    SeededRng noise(78);
    Bytes blob = noise.bytes(65536);
    std::string text = encode_secret(master_secret(6)).substr(0, 52);
    plant_text(blob, 9000, text);

    MemoryFindings found = scan_memory(blob);
    CHECK(found.secrets.empty());
    REQUIRE_FALSE(found.fragments.empty());
    CHECK(std::find(found.fragments.begin(), found.fragments.end(), text) !=
          found.fragments.end());
}

TEST_CASE("a secret embedded in a longer alphabet run is still found") {
    Bytes blob(4096, '\x00');
    Secret secret = master_secret(7);
    std::string padded = "AAAA" + encode_secret(secret) + "2222";
    plant_text(blob, 100, padded);
    MemoryFindings found = scan_memory(blob);
    REQUIRE_FALSE(found.secrets.empty());
    bool hit = false;
    for (const auto& s : found.secrets)
        if (s.secret == secret && s.offset == 104) hit = true;
    CHECK(hit);
}

TEST_CASE("peerid and lport fragments are extracted with offsets") {
    SeededRng noise(79);
    Bytes blob = noise.bytes(32768);
    SeededRng idrng(3);
    PeerID peer = generate_peer_id(idrng);
    plant_text(blob, 5000, "peerid " + peer.hex());
    plant_text(blob, 9000, "lport 3839");

    MemoryFindings found = scan_memory(blob);
    REQUIRE(found.peer_ids.size() == 1);
    CHECK(found.peer_ids[0].first == peer);
    REQUIRE(found.ports.size() == 1);
    CHECK(found.ports[0].first == 3839);
}

TEST_CASE("candidates that fail decode validation are never reported") {
    Bytes blob(1024, '\x00');
    // 53 alphabet chars whose access byte decodes to 'Q' (unknown)
    Bytes raw(33, '\0');
    raw[0] = 0x51;
    plant_text(blob, 100, base32_encode(raw));
    MemoryFindings found = scan_memory(blob);
    CHECK(found.secrets.empty());
    CHECK(found.fragments.size() == 1);
}

// ---------------------------------------------------------------------------
// shared scenario fixture

namespace {

const char* kLabScenario = R"({
    "seed": 42, "end_ms": 180000,
    "nodes": [
        {"name": "ComputerA", "address": "10.0.0.1", "lan": "lab",
         "settings": {"sync_archive_enabled": 1},
         "shares": [{"path": "shares/evidence", "secret": {"generate_seed": 7},
                     "access": "master",
                     "files": [
                        {"path": "badfileone.txt", "size": 19, "content_seed": 101},
                        {"path": "badfiletwo.txt", "size": 124, "content_seed": 102},
                        {"path": "badfilethree.txt", "size": 152, "content_seed": 103}]}]},
        {"name": "ComputerB", "address": "10.0.0.2", "lan": "lab",
         "shares": [{"path": "shares/evidence", "secret": {"generate_seed": 7},
                     "access": "readonly"}]}
    ],
    "timeline": [
        {"at_ms": 1000, "action": "delete", "node": "ComputerA", "share": 0, "path": "badfileone.txt"},
        {"at_ms": 60000, "action": "sync", "node": "ComputerB", "share": 0},
        {"at_ms": 120000, "action": "secure_delete", "node": "ComputerB", "share": 0, "path": "badfilethree.txt"}
    ]
})";

struct LabWorld {
    TempDir dir{"lab"};
    ShareID share;
    Secret ro;

    LabWorld() {
        ScenarioSpec spec = parse_scenario(kLabScenario);
        run_scenario(spec, dir.path());
        Secret master = master_secret(7);
        ro = derive_readonly(master);
        share = derive_share_id(master);
    }
    std::filesystem::path b_dir() const { return dir.path() / "ComputerB"; }
};

}  // namespace

// ---------------------------------------------------------------------------
// analyze_disk

TEST_CASE("analyze_disk links secrets to folders, SyncIDs and manifests") {
    LabWorld w;
    ArtifactSet artifacts = locate_artifacts(w.b_dir(), OsProfile::Linux);
    LocalEvidence ev = analyze_disk(artifacts);

    CHECK(ev.errors.empty());
    REQUIRE(ev.configs.size() == 1);
    CHECK(ev.configs[0].secret == w.ro);
    REQUIRE(ev.links.size() == 1);
    CHECK(ev.links[0].derived == w.share);
    REQUIRE(ev.links[0].sync_id.has_value());
    CHECK(*ev.links[0].sync_id == w.share);
    CHECK(ev.links[0].consistent);
    REQUIRE(ev.links[0].manifest_path.has_value());

    REQUIRE(ev.manifests.count(w.share) == 1);
    const ShareManifest& m = ev.manifests.at(w.share);
    const FileEntry* three = m.find_file("badfilethree.txt");
    REQUIRE(three != nullptr);
    CHECK(three->invalidated == 1);
}

TEST_CASE("a tree with sync.dat only still yields config evidence") {
    TempDir tmp("sd-only");
    SyncDatConfig cfg = share_config("shares/x");
    cfg.secret = master_secret(3);
    write_file(tmp.path() / ".sync" / "sync.dat", write_sync_dat_file({cfg}));
    LocalEvidence ev = analyze_disk(locate_artifacts(tmp.path(), OsProfile::Linux));
    CHECK(ev.configs.size() == 1);
    CHECK(ev.manifests.empty());
    CHECK(ev.links.size() == 1);
    CHECK_FALSE(ev.links[0].sync_id.has_value());
}

TEST_CASE("a .SyncID that disagrees with the derived ShareID flags the link") {
    LabWorld w;
    write_file(w.b_dir() / "shares" / "evidence" / ".SyncID", Bytes(20, '\x42'));
    LocalEvidence ev = analyze_disk(locate_artifacts(w.b_dir(), OsProfile::Linux));
    REQUIRE(ev.links.size() == 1);
    CHECK_FALSE(ev.links[0].consistent);
}

TEST_CASE("parse errors are collected per artifact, never aborting analysis") {
    LabWorld w;
    write_file(w.b_dir() / ".sync" / "settings.dat", "garbage");
    LocalEvidence ev = analyze_disk(locate_artifacts(w.b_dir(), OsProfile::Linux));
    CHECK_FALSE(ev.errors.empty());
    CHECK(ev.configs.size() == 1);  // sync.dat still parsed
}

// ---------------------------------------------------------------------------
// corroborate

TEST_CASE("corroboration over the lab bundle fills the expected cells") {
    LabWorld w;
    EntryPointBundle bundle;
    bundle.disk = locate_artifacts(w.b_dir(), OsProfile::Linux);
    bundle.memory = read_file(w.b_dir() / "memory.bin");
    bundle.network_log = netlog_from_json(read_file(w.dir.path() / "netlog.json"));

    CorroborationMatrix m = corroborate(bundle);

    // Secret recoverable from RAM and sync.dat with identical values
    CHECK(m.cell(EvidenceItem::Secret, EvidenceSource::RAM).state == CellState::Found);
    CHECK(m.cell(EvidenceItem::Secret, EvidenceSource::SyncDat).state == CellState::Found);
    CHECK(m.cell(EvidenceItem::Secret, EvidenceSource::RAM).values ==
          m.cell(EvidenceItem::Secret, EvidenceSource::SyncDat).values);
    CHECK(m.verdict(EvidenceItem::Secret) == ItemVerdict::AGREE);

    // ShareID corroborated across Network, RAM, sync.dat and .SyncID
    for (EvidenceSource s : {EvidenceSource::Network, EvidenceSource::RAM, EvidenceSource::SyncDat,
                             EvidenceSource::SyncID})
        CHECK(m.cell(EvidenceItem::ShareID, s).state == CellState::Found);
    CHECK(m.verdict(EvidenceItem::ShareID) == ItemVerdict::AGREE);

    // not-applicable cells match the metadata table's blanks
    CHECK(m.cell(EvidenceItem::Secret, EvidenceSource::Network).state ==
          CellState::NotApplicable);
    CHECK(m.cell(EvidenceItem::ShareID, EvidenceSource::ShareDb).state ==
          CellState::NotApplicable);
    CHECK(m.cell(EvidenceItem::Ports, EvidenceSource::SyncDat).state ==
          CellState::NotApplicable);

    // file list and hashes from the manifest; list corroborated by sync.log
    CHECK(m.cell(EvidenceItem::FileList, EvidenceSource::ShareDb).state == CellState::Found);
    CHECK(m.cell(EvidenceItem::FileHash, EvidenceSource::ShareDb).state == CellState::Found);
    CHECK(m.verdict(EvidenceItem::FileList) == ItemVerdict::AGREE);

    // RAM cells our scanner does not implement stay not-found
    CHECK(m.cell(EvidenceItem::FileList, EvidenceSource::RAM).state == CellState::NotFound);
    CHECK(m.cell(EvidenceItem::FileHash, EvidenceSource::RAM).state == CellState::NotFound);
}

TEST_CASE("an empty bundle is InsufficientSources") {
    EntryPointBundle empty;
    try {
        corroborate(empty);
        FAIL("expected InsufficientSources");
    } catch (const AcquisitionError& e) {
        CHECK(e.kind == AcqErr::InsufficientSources);
    }
}

TEST_CASE("two sources with different values conflict, listing both verbatim") {
    TempDir tmp("conflict");
    SyncDatConfig cfg = share_config("shares/x");
    cfg.secret = master_secret(100);
    write_file(tmp.path() / ".sync" / "sync.dat", write_sync_dat_file({cfg}));

    Bytes blob(65536, '\x00');
    Secret other = master_secret(200);
    std::string other_text = encode_secret(other);
    blob[99] = '\n';
    std::copy(other_text.begin(), other_text.end(), blob.begin() + 100);
    blob[100 + other_text.size()] = '\n';

    EntryPointBundle bundle;
    bundle.disk = locate_artifacts(tmp.path(), OsProfile::Linux);
    bundle.memory = blob;
    CorroborationMatrix m = corroborate(bundle);
    CHECK(m.verdict(EvidenceItem::Secret) == ItemVerdict::CONFLICT);
    CHECK(m.verdict(EvidenceItem::ShareID) == ItemVerdict::CONFLICT);
    REQUIRE_FALSE(m.conflicts.empty());
    bool lists_both = false;
    for (const auto& c : m.conflicts)
        if (c.find(encode_secret(cfg.secret)) != std::string::npos &&
            c.find(other_text) != std::string::npos)
            lists_both = true;
    CHECK(lists_both);
}

// ---------------------------------------------------------------------------
// identify_targets

TEST_CASE("targets are the deleted and invalidated manifest entries in order") {
    LabWorld w;
    LocalEvidence ev = analyze_disk(locate_artifacts(w.b_dir(), OsProfile::Linux));
    std::vector<TargetFile> targets = identify_targets(ev);
    REQUIRE(targets.size() == 2);
    CHECK(targets[0].path == "badfileone.txt");
    CHECK(targets[0].reason == TargetReason::DELETED_LOCALLY);
    CHECK(targets[1].path == "badfilethree.txt");
    CHECK(targets[1].reason == TargetReason::INVALIDATED);
    CHECK(hex(targets[1].expected_hash) == hex(sha1(SeededRng(103).bytes(152))));
    CHECK(targets[1].meta.has_value());
}

TEST_CASE("a manifest with only valid present files yields no targets") {
    TempDir tmp("clean");
    ShareManifest m;
    m.share_id = ShareID{sha1("s")};
    FileIndex idx = index_file("ok", 32768);
    FileEntry e;
    e.path = "ok.txt";
    e.size = idx.size;
    e.mtime = 1;
    e.hash20 = idx.whole_file_hash;
    m.files.push_back(e);
    m.meta.push_back(idx.to_meta("ok.txt"));
    write_file(tmp.path() / ".sync" / (m.share_id.hex() + ".db"), write_manifest(m));

    LocalEvidence ev = analyze_disk(locate_artifacts(tmp.path(), OsProfile::Linux));
    CHECK(identify_targets(ev).empty());
}

// ---------------------------------------------------------------------------
// enumerate_peers

TEST_CASE("enumeration merges sources and tolerates empty methods results") {
    LabWorld w;
    auto net = load_world(w.dir.path(), 555);
    Node& inv = net->add_node("investigator", {"10.99.0.99", 3839}, "lab");
    inv.dht_member = false;

    LocalEvidence ev = analyze_disk(locate_artifacts(w.b_dir(), OsProfile::Linux));
    EnumerationContext ctx;
    ctx.net = net.get();
    ctx.investigator = &inv;
    ctx.known_hosts = {Endpoint{"10.0.0.1", 3839}};
    ctx.history = &ev.log;

    std::set<DiscoverySource> all = {DiscoverySource::Tracker, DiscoverySource::Dht,
                                     DiscoverySource::Multicast, DiscoverySource::KnownHosts,
                                     DiscoverySource::SyncLogHistory};
    std::vector<PeerRecord> peers = enumerate_peers(w.share, all, ctx);

    const PeerRecord* a = nullptr;
    for (const auto& p : peers)
        if (p.addr.text() == "10.0.0.1:3839") a = &p;
    REQUIRE(a != nullptr);
    CHECK(a->sources.size() >= 3);  // tracker + multicast + known hosts + log history
    CHECK(a->sources.count(DiscoverySource::KnownHosts) == 1);
    CHECK(a->sources.count(DiscoverySource::SyncLogHistory) == 1);

    // SyncLogHistory alone with an empty log finds nothing
    SyncLog empty_log;
    EnumerationContext offline;
    offline.history = &empty_log;
    CHECK(enumerate_peers(w.share, {DiscoverySource::SyncLogHistory}, offline).empty());

    CHECK_THROWS_AS(enumerate_peers(w.share, {}, offline), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// recover

namespace {

struct RecoveryWorld {
    Network net{NetParams{.seed = 60}};
    Secret master = master_secret(7);
    Secret ro = derive_readonly(master_secret(7));
    ShareID share;
    Node* investigator = nullptr;
    Bytes content;

    explicit RecoveryWorld(size_t size = 3 * 32768) {
        net.add_node("A", {"10.0.0.1", 3839}, "lab");
        share = net.add_share("A", master, share_config("s"));
        content = SeededRng(91).bytes(size);
        net.add_file("A", share, "target.bin", content);
        investigator = &net.add_node("inv", {"10.99.0.99", 3839}, "forensics");
        investigator->dht_member = false;
    }

    TargetFile target() const {
        TargetFile t;
        t.share = share;
        t.path = "target.bin";
        t.reason = TargetReason::INVALIDATED;
        t.expected_hash = sha1(content);
        const ShareManifest& m = net.nodes().at("A").shares.at(share).manifest;
        t.meta = *m.find_meta("target.bin");
        return t;
    }

    PeerRecord record_for(const std::string& name) {
        const Node& n = net.nodes().at(name);
        PeerRecord r;
        r.peer = n.peer_id;
        r.addr = n.addr;
        r.sources.insert(DiscoverySource::KnownHosts);
        return r;
    }
};

size_t count_custody(const EvidenceRecord& r, std::string_view action) {
    size_t n = 0;
    for (const auto& e : r.custody)
        if (e.action == action) ++n;
    return n;
}

}  // namespace

TEST_CASE("recover downloads and verifies every piece from a known peer") {
    RecoveryWorld w;
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net,
                               *w.investigator);
    CHECK(r.verification.status == VerifyStatus::FULL_MATCH);
    CHECK(r.assembled == w.content);
    CHECK(r.whole_hash == sha1(w.content));
    REQUIRE(r.sources.size() == 1);
    CHECK(r.sources[0].second.size() == 3);
    CHECK(count_custody(r, "verify_ok") == 3);
    CHECK(count_custody(r, "verify_fail") == 0);
    // every recovered piece is attributable to a logged response
    CHECK(count_custody(r, "response") >= r.pieces.size());
}

TEST_CASE("sole holder of a piece offline leaves exactly that piece missing") {
    RecoveryWorld w;  // 3 pieces on A
    // X holds pieces {0, 2} only; A goes offline
    w.net.add_node("X", {"10.0.0.3", 3839}, "lab");
    w.net.add_share("X", w.ro, share_config("s"));
    w.net.add_partial_file("X", w.share, "target.bin", w.content, {0, 2});
    w.net.set_online("A", false);

    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A"), w.record_for("X")}, w.ro, policy,
                               w.net, *w.investigator);
    CHECK(r.verification.status == VerifyStatus::PARTIAL);
    CHECK(r.verification.missing_pieces == std::set<uint32_t>{1});
    CHECK(r.verification.verified_pieces == std::set<uint32_t>{0, 2});
}

TEST_CASE("transient corruption is refetched from the same source once") {
    RecoveryWorld w;
    w.net.nodes().at("A").byzantine.corrupt_first_n = 1;
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net,
                               *w.investigator);
    CHECK(r.verification.status == VerifyStatus::FULL_MATCH);
    CHECK(count_custody(r, "verify_fail") == 1);
    CHECK(count_custody(r, "refetch") == 1);

    // the refetch immediately follows the failed verification
    for (size_t i = 0; i < r.custody.size(); ++i)
        if (r.custody[i].action == "verify_fail") {
            REQUIRE(i + 1 < r.custody.size());
            CHECK(r.custody[i + 1].action == "refetch");
        }
}

TEST_CASE("a persistently corrupt source falls back to an honest alternate") {
    RecoveryWorld w;
    w.net.nodes().at("A").byzantine.corrupt_first_n = -1;  // always corrupt
    w.net.add_node("H", {"10.0.0.4", 3839}, "lab");
    w.net.add_share("H", w.ro, share_config("s"));
    w.net.add_file("H", w.share, "target.bin", w.content);

    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A"), w.record_for("H")}, w.ro, policy,
                               w.net, *w.investigator);
    CHECK(r.verification.status == VerifyStatus::FULL_MATCH);
    CHECK(count_custody(r, "verify_fail") >= 2);  // initial + same-source retry per piece
    bool honest_served = false;
    for (const auto& [peer, indices] : r.sources)
        if (peer.addr.text() == "10.0.0.4:3839" && !indices.empty()) honest_served = true;
    CHECK(honest_served);
}

TEST_CASE("KnownPeersOnly with no peers is NoEligiblePeers") {
    RecoveryWorld w;
    RecoveryPolicy policy;
    policy.known_peers_only = true;
    CHECK_THROWS_AS(recover(w.target(), {}, w.ro, policy, w.net, *w.investigator),
                    AcquisitionError);
}

TEST_CASE("per-peer auth failures are recorded, not fatal, when alternates exist") {
    RecoveryWorld w;
    // a peer that does not hold the share at all
    w.net.add_node("N", {"10.0.0.5", 3839}, "lab");
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("N"), w.record_for("A")}, w.ro, policy,
                               w.net, *w.investigator);
    CHECK(r.verification.status == VerifyStatus::FULL_MATCH);
    CHECK(count_custody(r, "handshake_fail") == 1);
    CHECK(count_custody(r, "handshake_ok") == 1);
}

TEST_CASE("policy containment: no message leaves the supplied peer list") {
    RecoveryWorld w;
    size_t trace_start = w.net.trace().size();
    RecoveryPolicy policy;
    recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net, *w.investigator);
    Endpoint inv_addr = w.investigator->addr;
    for (size_t i = trace_start; i < w.net.trace().size(); ++i) {
        const TraceEntry& t = w.net.trace()[i];
        if (t.src == inv_addr) CHECK(t.dst.text() == "10.0.0.1:3839");
    }
}

// ---------------------------------------------------------------------------
// build_report

TEST_CASE("reports re-verify records and digest deterministically") {
    RecoveryWorld w;
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net,
                               *w.investigator);

    EntryPointBundle bundle;
    bundle.memory = Bytes(4096, '\x00');
    CorroborationMatrix matrix = corroborate(bundle);

    CaseMetadata meta{"case-7", "examiner", "evidence"};
    EvidenceReport a = build_report({r}, matrix, meta);
    EvidenceReport b = build_report({r}, matrix, meta);
    CHECK(a.digest == b.digest);
    CHECK(a.digest.size() == 40);

    std::string text = report_to_text(a);
    CHECK(text.find("target.bin") != std::string::npos);
    CHECK(text.find("FULL_MATCH") != std::string::npos);
}

TEST_CASE("tampered records abort the report") {
    RecoveryWorld w;
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net,
                               *w.investigator);
    EntryPointBundle bundle;
    bundle.memory = Bytes(4096, '\x00');
    CorroborationMatrix matrix = corroborate(bundle);

    EvidenceRecord tampered = r;
    tampered.assembled[5] = static_cast<char>(tampered.assembled[5] ^ 0x01);
    try {
        build_report({tampered}, matrix, CaseMetadata{"c", "i", "e"});
        FAIL("expected ReverificationFailed");
    } catch (const AcquisitionError& e) {
        CHECK(e.kind == AcqErr::ReverificationFailed);
    }

    EvidenceRecord piece_tamper = r;
    piece_tamper.pieces[0][0] = static_cast<char>(piece_tamper.pieces[0][0] ^ 0x01);
    CHECK_THROWS_AS(build_report({piece_tamper}, matrix, CaseMetadata{"c", "i", "e"}),
                    AcquisitionError);
}

TEST_CASE("an empty record set still builds a valid report") {
    EntryPointBundle bundle;
    bundle.memory = Bytes(1024, '\x00');
    EvidenceReport report = build_report({}, corroborate(bundle), CaseMetadata{"c", "i", "e"});
    CHECK(report.records.empty());
    CHECK(report_to_text(report).find("No recoverable targets") != std::string::npos);
}

TEST_CASE("report files land in the case directory with recovered bytes") {
    RecoveryWorld w;
    RecoveryPolicy policy;
    EvidenceRecord r = recover(w.target(), {w.record_for("A")}, w.ro, policy, w.net,
                               *w.investigator);
    EntryPointBundle bundle;
    bundle.memory = Bytes(1024, '\x00');
    EvidenceReport report = build_report({r}, corroborate(bundle), CaseMetadata{"c", "i", "e"});

    TempDir tmp("case");
    write_report_files(report, tmp.path());
    CHECK(std::filesystem::exists(tmp.path() / "report.json"));
    CHECK(std::filesystem::exists(tmp.path() / "report.txt"));
    Bytes recovered = read_file(tmp.path() / "recovered" / w.share.hex() / "target.bin");
    CHECK(recovered == w.content);
}

TEST_CASE("analysis reads only files the artifact set reported") {
    LabWorld w;
    ArtifactSet artifacts = locate_artifacts(w.b_dir(), OsProfile::Linux);
    LocalEvidence ev = analyze_disk(artifacts);

    std::set<std::filesystem::path> reported;
    if (artifacts.sync_dat) reported.insert(*artifacts.sync_dat);
    if (artifacts.settings_dat) reported.insert(*artifacts.settings_dat);
    if (artifacts.sync_log) reported.insert(*artifacts.sync_log);
    for (const auto& m : artifacts.manifests) reported.insert(m);
    for (const auto& sf : artifacts.share_folders)
        if (sf.sync_id) reported.insert(*sf.sync_id);

    CHECK_FALSE(ev.reads.empty());
    for (const auto& p : ev.reads) CHECK(reported.count(p) == 1);
}
