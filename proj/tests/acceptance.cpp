// Acceptance suite: one test case per criterion, each printing a PASS line
// once every assertion in it holds.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "dsync/acquisition.hpp"
#include "dsync/cli.hpp"
#include "dsync/scenario.hpp"
#include "dsync/world.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace dsync;
using dsync::test::TempDir;

#ifndef DSYNC_SCENARIO_DIR
#define DSYNC_SCENARIO_DIR "scenarios"
#endif
#ifndef DSYNC_FIXTURE_DIR
#define DSYNC_FIXTURE_DIR "tests/fixtures"
#endif

namespace {

void pass(int criterion, const char* name) {
    std::printf("[acceptance] criterion %d (%s): PASS\n", criterion, name);
    std::fflush(stdout);
}

int run_quiet(const std::vector<std::string>& args) {
    std::stringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    int code = run_cli(args);
    std::cout.rdbuf(old);
    return code;
}

std::filesystem::path poc_scenario() {
    return std::filesystem::path(DSYNC_SCENARIO_DIR) / "poc.json";
}

Secret master_secret(uint64_t seed) {
    SeededRng rng(seed);
    return generate_secret(AccessLevel::Master, rng);
}

nlohmann::json load_json(const std::filesystem::path& p) {
    return nlohmann::json::parse(read_file(p));
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("1: proof-of-concept end to end") {
    TempDir out("acc1");
    REQUIRE(run_quiet({"simulate", poc_scenario().string(), "--out", out.path().string()}) ==
            kExitOk);

    std::vector<std::string> digests;
    for (int run = 1; run <= 3; ++run) {
        auto case_dir = out.path() / ("case" + std::to_string(run));
        REQUIRE(run_quiet({"acquire", (out.path() / "ComputerB").string(), "--out",
                           case_dir.string(), "--known-peer", "10.0.0.1:3839"}) == kExitOk);
        digests.push_back(load_json(case_dir / "report.json").at("digest").get<std::string>());
    }
    CHECK(digests[0] == digests[1]);
    CHECK(digests[1] == digests[2]);

    // the invalidated target is recovered with FULL_MATCH
    nlohmann::json report = load_json(out.path() / "case1" / "report.json");
    const nlohmann::json* three = nullptr;
    for (const auto& r : report.at("report").at("records"))
        if (r.at("path") == "badfilethree.txt") three = &r;
    REQUIRE(three != nullptr);
    CHECK(three->at("reason") == "INVALIDATED");
    CHECK(three->at("status") == "FULL_MATCH");

    // recovered bytes are byte-identical to ComputerA's copy
    ShareID share = derive_share_id(master_secret(7));
    Bytes recovered =
        read_file(out.path() / "case1" / "recovered" / share.hex() / "badfilethree.txt");
    Bytes original = read_file(out.path() / "ComputerA" / "shares" / "evidence" /
                               "badfilethree.txt");
    CHECK(recovered == original);

    // recomputed SHA-1 equals the manifest hash on the evidence machine
    ShareManifest manifest = parse_manifest(
        read_file(out.path() / "ComputerB" / ".sync" / (share.hex() + ".db")));
    const FileEntry* entry = manifest.find_file("badfilethree.txt");
    REQUIRE(entry != nullptr);
    CHECK(sha1(recovered) == entry->hash20);
    CHECK(hex(sha1(recovered)) == three->at("recovered_sha1").get<std::string>());

    pass(1, "PoC end-to-end recovery, deterministic across 3 runs");
}

// ---------------------------------------------------------------------------

TEST_CASE("2: share-table fixture parses to the published names, sizes and hashes") {
    ShareManifest m =
        parse_manifest(read_file(std::filesystem::path(DSYNC_FIXTURE_DIR) / "table1.db"));
    REQUIRE(m.files.size() == 3);
    CHECK(m.files[0].path == "badfileone.txt");
    CHECK(m.files[0].size == 19);
    CHECK(hex(m.files[0].hash20) == "58B47FB1467AEB0BEFE6FE1BD6255A5C24B552A0");
    CHECK(m.files[1].path == "badfiletwo.txt");
    CHECK(m.files[1].size == 124);
    CHECK(hex(m.files[1].hash20) == "B47C7586BC82B27A8441A8E4C07F77874CC67557");
    CHECK(m.files[2].path == "badfilethree.txt");
    CHECK(m.files[2].size == 152);
    CHECK(hex(m.files[2].hash20) == "3598492B4D1CE5FAFD9EF76E8FA54C8F55E0716A");
    pass(2, "fixture names, sizes and hex hashes exact");
}

// ---------------------------------------------------------------------------

TEST_CASE("3: piece-aggregate formula equals the independent oracle") {
    SeededRng rng(303);
    for (int64_t size : {int64_t{0}, int64_t{1}, int64_t{32767}, int64_t{32768}, int64_t{32769},
                         int64_t{163857}}) {
        Bytes content = rng.bytes(static_cast<size_t>(size));
        FileIndex idx = index_file(content, 32768);

        // independent oracle: concatenate per-piece SHA-1s by hand, hash once
        Bytes concat;
        for (size_t off = 0; off < content.size(); off += 32768)
            concat += raw(sha1(std::string_view(content).substr(off, 32768)));
        REQUIRE(idx.aggregate_hash == sha1(concat));

        if (size > 0 && size <= 32768)  // single piece: SHA1(SHA1(content))
            REQUIRE(idx.aggregate_hash == sha1(raw(sha1(content))));
    }
    pass(3, "aggregate equals concatenate-then-hash oracle at all boundary sizes");
}

// ---------------------------------------------------------------------------

namespace {

bencode::BValue random_value(SeededRng& rng, int depth) {
    uint64_t pick = rng.bounded(depth >= 4 ? 2 : 4);
    switch (pick) {
        case 0: {
            size_t len = rng.bounded(1025);  // strings up to 1 KiB
            return bencode::BValue(rng.bytes(len));
        }
        case 1:
            return bencode::BValue(static_cast<int64_t>(rng.next_u64()));
        case 2: {
            bencode::BList list;
            size_t n = rng.bounded(4);
            for (size_t i = 0; i < n; ++i) list.push_back(random_value(rng, depth + 1));
            return bencode::BValue(std::move(list));
        }
        default: {
            bencode::BDict dict;
            size_t n = rng.bounded(4);
            for (size_t i = 0; i < n; ++i)
                dict[rng.bytes(1 + rng.bounded(16))] = random_value(rng, depth + 1);
            return bencode::BValue(std::move(dict));
        }
    }
}

}  // namespace

TEST_CASE("4: bencode round trips, fixpoints and strict rejection corpora") {
    SeededRng rng(404);
    for (int i = 0; i < 10'000; ++i) {
        bencode::BValue v = random_value(rng, 0);
        Bytes encoded = bencode::encode(v);
        bencode::BValue back = bencode::decode(encoded);
        REQUIRE(back == v);                       // decode . encode == identity
        REQUIRE(bencode::encode(back) == encoded);  // canonical fixpoint
    }

    // unsorted-key corpus: two distinct keys emitted in descending order
    size_t rejected = 0;
    for (int i = 0; i < 100; ++i) {
        Bytes k1 = "k" + std::to_string(i);
        Bytes k2 = "k" + std::to_string(i) + "x";  // k1 < k2 always
        Bytes doc = "d";
        doc += std::to_string(k2.size()) + ":" + k2 + "i1e";
        doc += std::to_string(k1.size()) + ":" + k1 + "i2e";
        doc += "e";
        try {
            bencode::decode(doc);
        } catch (const bencode::DecodeError& e) {
            if (e.kind == bencode::DecodeErr::NonCanonical) ++rejected;
        }
    }
    REQUIRE(rejected == 100);

    // trailing-byte corpus: a valid value followed by junk
    rejected = 0;
    for (int i = 0; i < 100; ++i) {
        Bytes doc = bencode::encode(random_value(rng, 0));
        doc += rng.bytes(1 + rng.bounded(8));
        try {
            bencode::decode(doc);
        } catch (const bencode::DecodeError& e) {
            if (e.kind == bencode::DecodeErr::TrailingBytes ||
                e.kind == bencode::DecodeErr::MalformedToken ||
                e.kind == bencode::DecodeErr::TruncatedInput ||
                e.kind == bencode::DecodeErr::NonCanonical)
                ++rejected;
        }
    }
    REQUIRE(rejected == 100);

    pass(4, "10,000 round trips, 100% rejection of both corpora");
}

// ---------------------------------------------------------------------------

TEST_CASE("5: check-in churn expires peers from tracker and DHT past the TTL") {
    NetParams params;
    params.seed = 505;
    params.ttl_minutes = 30;
    Network net(params);
    Node& a = net.add_node("A", {"10.0.0.1", 3839}, "lab");
    Node& b = net.add_node("B", {"10.0.0.2", 3839}, "lab");
    Secret secret = master_secret(7);
    SyncDatConfig cfg;
    cfg.path = "s";
    ShareID share = net.add_share("A", secret, cfg);
    net.add_share("B", derive_readonly(secret), cfg);

    // announce once at t=0, never again
    (void)net.tracker_announce(a, share);
    net.dht_announce(a, share);

    net.clock.run_until(29 * 60'000);
    {
        auto tracker_peers = net.tracker_announce(b, share);
        REQUIRE(tracker_peers.size() == 1);
        REQUIRE(tracker_peers[0].peer == a.peer_id);
        auto dht_peers = net.dht_get_peers(b, share);
        REQUIRE(dht_peers.size() == 1);
        REQUIRE(dht_peers[0].peer == a.peer_id);
    }

    net.clock.run_until(31 * 60'000);
    {
        REQUIRE(net.tracker_announce(b, share).empty());
        REQUIRE(net.dht_get_peers(b, share).empty());
    }
    pass(5, "present at 29 min, absent at 31 min, tracker and DHT");
}

// ---------------------------------------------------------------------------

namespace {

const char* kPartialScenario = R"({
    "seed": 606, "end_ms": 20000,
    "nodes": [
        {"name": "Alpha", "address": "10.0.0.1", "lan": "lab",
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "master",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9}]}]},
        {"name": "Xray", "address": "10.0.0.3", "lan": "lab",
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "readonly",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9,
                                "pieces_held": [0, 2]}]}]},
        {"name": "Bravo", "address": "10.0.0.2", "lan": "lab",
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "readonly",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9}]}]}
    ],
    "timeline": [
        {"at_ms": 5000, "action": "secure_delete", "node": "Bravo", "share": 0, "path": "target.bin"},
        {"at_ms": 6000, "action": "go_offline", "node": "Alpha"}
    ]
})";

}  // namespace

TEST_CASE("6: partial recovery when the sole holder of piece 1 is offline") {
    TempDir out("acc6");
    TempDir scen("acc6s");
    write_file(scen.path() / "partial.json", kPartialScenario);
    REQUIRE(run_quiet({"simulate", (scen.path() / "partial.json").string(), "--out",
                       out.path().string()}) == kExitOk);

    int code = run_quiet({"acquire", (out.path() / "Bravo").string(), "--out",
                          (out.path() / "case").string(), "--known-peer", "10.0.0.1:3839",
                          "--known-peer", "10.0.0.3:3839"});
    REQUIRE(code == kExitDegraded);  // exit 3

    nlohmann::json report = load_json(out.path() / "case" / "report.json");
    const auto& record = report.at("report").at("records").at(0);
    CHECK(record.at("status") == "PARTIAL");
    CHECK(record.at("missing_pieces") == nlohmann::json::array({1}));
    CHECK(record.at("verified_pieces") == nlohmann::json::array({0, 2}));
    pass(6, "PARTIAL with missing == {1}, both other pieces verified, exit 3");
}

// ---------------------------------------------------------------------------

namespace {

const char* kByzantineScenario = R"({
    "seed": 707, "end_ms": 10000,
    "nodes": [
        {"name": "Mallory", "address": "10.0.0.1", "lan": "lab",
         "byzantine": {"corrupt_first_n": 1},
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "master",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9}]}]},
        {"name": "Harriet", "address": "10.0.0.4", "lan": "lab",
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "readonly",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9}]}]},
        {"name": "Bravo", "address": "10.0.0.2", "lan": "lab",
         "settings": {"piece_len": 1024},
         "shares": [{"path": "s", "secret": {"generate_seed": 7}, "access": "readonly",
                     "files": [{"path": "target.bin", "size": 3072, "content_seed": 9}]}]}
    ],
    "timeline": [
        {"at_ms": 5000, "action": "secure_delete", "node": "Bravo", "share": 0, "path": "target.bin"}
    ]
})";

}  // namespace

TEST_CASE("7: corruption is retried and the custody log shows it exactly once") {
    TempDir out("acc7");
    TempDir scen("acc7s");
    write_file(scen.path() / "byz.json", kByzantineScenario);
    REQUIRE(run_quiet({"simulate", (scen.path() / "byz.json").string(), "--out",
                       out.path().string()}) == kExitOk);

    int code = run_quiet({"acquire", (out.path() / "Bravo").string(), "--out",
                          (out.path() / "case").string(), "--known-peer", "10.0.0.1:3839",
                          "--known-peer", "10.0.0.4:3839"});
    REQUIRE(code == kExitOk);

    nlohmann::json report = load_json(out.path() / "case" / "report.json");
    const auto& record = report.at("report").at("records").at(0);
    REQUIRE(record.at("status") == "FULL_MATCH");

    const auto& custody = record.at("custody");
    size_t fails = 0;
    for (size_t i = 0; i < custody.size(); ++i) {
        if (custody.at(i).at("action") == "verify_fail") {
            ++fails;
            REQUIRE(i + 1 < custody.size());
            CHECK(custody.at(i + 1).at("action") == "refetch");
        }
    }
    REQUIRE(fails == 1);
    pass(7, "FULL_MATCH with exactly one failed verification then a refetch");
}

// ---------------------------------------------------------------------------

TEST_CASE("8: KnownPeersOnly containment over 100 seeded runs") {
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        NetParams params;
        params.seed = seed;
        Network net(params);
        net.add_node("A", {"10.0.0.1", 3839}, "lab");
        net.add_node("Bystander", {"10.0.0.7", 3839}, "lab");
        Secret master = master_secret(7);
        SyncDatConfig cfg;
        cfg.path = "s";
        ShareID share = net.add_share("A", master, cfg);
        net.add_share("Bystander", derive_readonly(master), cfg);
        Bytes content = SeededRng(seed * 31).bytes(2048 + seed * 17);
        net.add_file("A", share, "target.bin", content);
        net.add_file("Bystander", share, "target.bin", content);

        Node& inv = net.add_node("investigator", {"10.99.0.99", 3839}, "forensics");
        inv.dht_member = false;

        // enumeration restricted to the supplied list, then recovery
        EnumerationContext ctx;
        ctx.net = &net;
        ctx.investigator = &inv;
        ctx.known_hosts = {Endpoint{"10.0.0.1", 3839}};
        auto peers = enumerate_peers(share, {DiscoverySource::KnownHosts}, ctx);

        TargetFile target;
        target.share = share;
        target.path = "target.bin";
        target.reason = TargetReason::DELETED_LOCALLY;
        target.expected_hash = sha1(content);
        target.meta = *net.nodes().at("A").shares.at(share).manifest.find_meta("target.bin");

        RecoveryPolicy policy;
        policy.known_peers_only = true;
        EvidenceRecord r = recover(target, peers, derive_readonly(master), policy, net, inv);
        REQUIRE(r.verification.status == VerifyStatus::FULL_MATCH);

        for (const TraceEntry& t : net.trace()) {
            if (t.src == inv.addr) REQUIRE(t.dst == Endpoint{"10.0.0.1", 3839});
        }
    }
    pass(8, "zero investigator messages outside the supplied list, 100 seeds");
}

// ---------------------------------------------------------------------------

TEST_CASE("9: corroboration matrix matches the metadata-location table") {
    TempDir out("acc9");
    REQUIRE(run_quiet({"simulate", poc_scenario().string(), "--out", out.path().string()}) ==
            kExitOk);

    EntryPointBundle bundle;
    bundle.disk = locate_artifacts(out.path() / "ComputerB", OsProfile::Linux);
    bundle.memory = read_file(out.path() / "ComputerB" / "memory.bin");
    bundle.network_log = netlog_from_json(read_file(out.path() / "netlog.json"));
    CorroborationMatrix m = corroborate(bundle);

    // Independent copy of the published table: which cells are marked at all
    // (R or P); everything else must be not-applicable.
    // columns: Network, RAM, sync.dat, .SyncID, ShareID.db, sync.log
    const bool applicable[kEvidenceItems][kEvidenceSources] = {
        {true, true, true, true, false, true},     // ShareID
        {false, true, true, false, false, false},  // Secret
        {true, true, false, false, true, false},   // PeerID
        {false, true, false, false, true, true},   // FileList
        {false, true, false, false, true, false},  // FileHash
        {true, true, false, false, true, true},    // RemotePeers
        {true, true, false, false, false, true},   // Ports
    };
    for (size_t i = 0; i < kEvidenceItems; ++i)
        for (size_t s = 0; s < kEvidenceSources; ++s) {
            CellState state =
                m.cell(static_cast<EvidenceItem>(i), static_cast<EvidenceSource>(s)).state;
            if (!applicable[i][s]) {
                REQUIRE(state == CellState::NotApplicable);
            } else {
                REQUIRE(state != CellState::NotApplicable);
            }
        }

    // every R-marked cell the scenario populates is reported found
    const std::vector<std::pair<EvidenceItem, EvidenceSource>> populated_r_cells = {
        {EvidenceItem::ShareID, EvidenceSource::Network},
        {EvidenceItem::ShareID, EvidenceSource::RAM},
        {EvidenceItem::ShareID, EvidenceSource::SyncDat},
        {EvidenceItem::ShareID, EvidenceSource::SyncID},
        {EvidenceItem::Secret, EvidenceSource::RAM},
        {EvidenceItem::Secret, EvidenceSource::SyncDat},
        {EvidenceItem::PeerID, EvidenceSource::Network},
        {EvidenceItem::FileList, EvidenceSource::ShareDb},
        {EvidenceItem::FileList, EvidenceSource::SyncLog},
        {EvidenceItem::FileHash, EvidenceSource::ShareDb},
        {EvidenceItem::RemotePeers, EvidenceSource::Network},
        {EvidenceItem::RemotePeers, EvidenceSource::SyncLog},
        {EvidenceItem::Ports, EvidenceSource::Network},
        {EvidenceItem::Ports, EvidenceSource::RAM},
        {EvidenceItem::Ports, EvidenceSource::SyncLog},
    };
    for (const auto& [item, source] : populated_r_cells) {
        INFO("cell (", to_string(item), ", ", to_string(source), ")");
        REQUIRE(m.cell(item, source).state == CellState::Found);
    }

    // Secret from the RAM scan and from sync.dat agree
    CHECK(m.cell(EvidenceItem::Secret, EvidenceSource::RAM).values ==
          m.cell(EvidenceItem::Secret, EvidenceSource::SyncDat).values);
    CHECK(m.verdict(EvidenceItem::Secret) == ItemVerdict::AGREE);
    pass(9, "R cells found, blanks not-applicable, RAM/sync.dat secret AGREE");
}

// ---------------------------------------------------------------------------

TEST_CASE("10: identity invariants and the memory-scan oracle") {
    for (uint64_t seed = 1; seed <= 1000; ++seed) {
        SeededRng rng(seed);
        Secret master = generate_secret(AccessLevel::Master, rng);
        Secret ro = derive_readonly(master);
        REQUIRE(derive_share_id(master) == derive_share_id(ro));
        REQUIRE(decode_secret(encode_secret(master)) == master);
        REQUIRE(decode_secret(encode_secret(ro)) == ro);
    }

    for (uint64_t seed = 1; seed <= 50; ++seed) {
        SeededRng noise(seed);
        Bytes blob = noise.bytes(1 << 20);
        SeededRng secret_rng(seed + 5000);
        Secret secret = generate_secret(AccessLevel::Master, secret_rng);
        std::string text = encode_secret(secret);
        size_t offset = 4096 + static_cast<size_t>(noise.bounded((1 << 20) - 8192));
        blob[offset - 1] = '\n';
        std::copy(text.begin(), text.end(), blob.begin() + static_cast<ptrdiff_t>(offset));
        blob[offset + text.size()] = '\n';

        MemoryFindings found = scan_memory(blob);
        REQUIRE(found.secrets.size() == 1);  // zero false positives
        REQUIRE(found.secrets[0].offset == offset);
        REQUIRE(found.secrets[0].secret == secret);
    }
    pass(10, "1000-seed identity invariants; 50-seed plant-and-scan, zero false positives");
}
