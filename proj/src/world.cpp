#include "dsync/world.hpp"

#include <fstream>

#include "json.hpp"

namespace dsync {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// file helpers

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, std::string_view bytes) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool safe_rel_path(std::string_view path) {
    if (path.empty() || path.front() == '/' || path.back() == '/') return false;
    size_t start = 0;
    while (start <= path.size()) {
        size_t end = path.find('/', start);
        if (end == std::string_view::npos) end = path.size();
        std::string_view part = path.substr(start, end - start);
        if (part.empty() || part == "." || part == "..") return false;
        start = end + 1;
        if (end == path.size()) break;
    }
    return true;
}

// ---------------------------------------------------------------------------
// netlog

std::vector<NetlogEntry> netlog_from_trace(const std::vector<TraceEntry>& trace) {
    std::vector<NetlogEntry> out;
    out.reserve(trace.size());
    for (const auto& t : trace) {
        NetlogEntry e;
        e.t_ms = t.t_ms;
        e.src = t.src.text();
        e.dst = t.dst.text();
        e.kind = to_string(t.kind);
        if (t.share) e.share_hex = t.share->hex();
        if (t.peer) e.peer_hex = t.peer->hex();
        out.push_back(std::move(e));
    }
    return out;
}

std::string netlog_to_json(const std::vector<NetlogEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) {
        json o;
        o["t_ms"] = e.t_ms;
        o["src"] = e.src;
        o["dst"] = e.dst;
        o["kind"] = e.kind;
        if (!e.share_hex.empty()) o["share"] = e.share_hex;
        if (!e.peer_hex.empty()) o["peer"] = e.peer_hex;
        arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
}

std::vector<NetlogEntry> netlog_from_json(std::string_view text) {
    json arr = json::parse(text);
    std::vector<NetlogEntry> out;
    for (const auto& o : arr) {
        NetlogEntry e;
        e.t_ms = o.value("t_ms", int64_t{0});
        e.src = o.value("src", "");
        e.dst = o.value("dst", "");
        e.kind = o.value("kind", "");
        e.share_hex = o.value("share", "");
        e.peer_hex = o.value("peer", "");
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// memory image

namespace {

void plant(Bytes& img, size_t offset, std::string_view text) {
    if (offset == 0 || offset + text.size() + 1 > img.size()) return;
    img[offset - 1] = '\n';
    std::copy(text.begin(), text.end(), img.begin() + static_cast<ptrdiff_t>(offset));
    img[offset + text.size()] = '\n';
}

}  // namespace

Bytes build_memory_image(const Node& n, uint64_t seed, size_t size) {
    SeededRng rng(seed);
    Bytes img = rng.bytes(size);

    std::vector<std::string> plants;
    for (const auto& [share, ss] : n.shares) plants.push_back(encode_secret(ss.secret));
    plants.push_back("peerid " + n.peer_id.hex());
    plants.push_back("lport " + std::to_string(n.addr.port));

    if (size < 8192) return img;
    const size_t region = (size - 8192) / plants.size();
    for (size_t k = 0; k < plants.size(); ++k) {
        size_t slack = region > plants[k].size() + 512 ? region - plants[k].size() - 512 : 1;
        size_t offset = 4096 + k * region + static_cast<size_t>(rng.bounded(slack));
        plant(img, offset, plants[k]);
    }
    return img;
}

// ---------------------------------------------------------------------------
// write_world

namespace {

json tracker_entries_json(const std::vector<TrackerEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) {
        json o;
        o["peer"] = e.peer.hex();
        o["host"] = e.addr.host;
        o["port"] = e.addr.port;
        o["last_checkin_ms"] = e.last_checkin_ms;
        arr.push_back(std::move(o));
    }
    return arr;
}

std::vector<TrackerEntry> tracker_entries_from(const json& arr) {
    std::vector<TrackerEntry> out;
    for (const auto& o : arr) {
        TrackerEntry e;
        e.peer = PeerID::from_hex(o.at("peer").get<std::string>());
        e.addr = {o.at("host").get<std::string>(), o.at("port").get<uint16_t>()};
        e.last_checkin_ms = o.at("last_checkin_ms").get<int64_t>();
        out.push_back(std::move(e));
    }
    return out;
}

// Piece sidecar for partially-held files: bencoded
// {"piece_len": n, "pieces": {"<index>": bytes...}, "size": n}.
Bytes encode_piece_sidecar(const StoredFile& f) {
    bencode::BDict pieces;
    for (const auto& [index, bytes] : f.pieces)
        pieces.emplace(std::to_string(index), bytes);
    bencode::BDict d;
    d.emplace("piece_len", f.piece_len);
    d.emplace("pieces", std::move(pieces));
    d.emplace("size", f.size);
    return bencode::encode(bencode::BValue(std::move(d)));
}

StoredFile decode_piece_sidecar(std::string_view bytes) {
    bencode::BValue v = bencode::decode(bytes);
    const bencode::BDict& d = v.dict();
    StoredFile f;
    f.piece_len = bencode::require_int(d, "piece_len");
    f.size = bencode::require_int(d, "size");
    for (const auto& [key, val] : bencode::require_dict(d, "pieces"))
        f.pieces[static_cast<uint32_t>(std::stoul(key))] = val.str();
    return f;
}

}  // namespace

WorldFiles write_world(Network& net, const fs::path& out_dir) {
    fs::create_directories(out_dir);

    json world;
    world["end_ms"] = net.clock.now_ms();
    world["epoch_base"] = net.epoch_base();
    world["latency_lo_ms"] = net.params().latency_lo_ms;
    world["latency_hi_ms"] = net.params().latency_hi_ms;
    world["ttl_minutes"] = net.params().ttl_minutes;

    json nodes = json::array();
    uint64_t node_index = 0;
    for (auto& [name, n] : net.nodes()) {
        fs::path node_dir = out_dir / name;
        fs::path app = node_dir / app_dir_for(n.os);
        fs::create_directories(app);

        std::vector<SyncDatConfig> configs;
        json archive_records = json::array();
        json partial_records = json::array();
        for (auto& [share, ss] : n.shares) {
            configs.push_back(ss.config);
            write_file(app / (share.hex() + ".db"), write_manifest(ss.manifest));

            if (!safe_rel_path(ss.config.path))
                throw std::runtime_error("unsafe share folder path: " + ss.config.path);
            fs::path folder = node_dir / fs::path(ss.config.path);
            fs::create_directories(folder);
            write_file(folder / ".SyncID", share.raw());

            for (const auto& [path, stored] : ss.content) {
                if (!safe_rel_path(path)) throw std::runtime_error("unsafe file path: " + path);
                if (stored.complete()) {
                    write_file(folder / fs::path(path), stored.assemble());
                } else {
                    write_file(app / "partial" / share.hex() / fs::path(path + ".pieces"),
                               encode_piece_sidecar(stored));
                    json rec;
                    rec["share"] = share.hex();
                    rec["path"] = path;
                    partial_records.push_back(std::move(rec));
                }
            }
            for (const auto& [path, bytes] : ss.invalid_content) {
                if (!safe_rel_path(path)) throw std::runtime_error("unsafe file path: " + path);
                write_file(folder / fs::path(path), bytes);
            }
            for (const auto& [path, arch] : ss.archive) {
                if (arch.expires_ms <= net.clock.now_ms()) continue;  // retention lapsed
                if (!safe_rel_path(path)) throw std::runtime_error("unsafe file path: " + path);
                write_file(folder / ".SyncArchive" / fs::path(path), arch.content);
                json rec;
                rec["share"] = share.hex();
                rec["path"] = path;
                rec["expires_ms"] = arch.expires_ms;
                archive_records.push_back(std::move(rec));
            }
        }
        write_file(app / "sync.dat", write_sync_dat_file(configs));
        write_file(app / "settings.dat", write_settings(n.settings));
        write_file(app / "sync.log", render_sync_log(n.log));
        write_file(node_dir / "memory.bin",
                   build_memory_image(n, net.params().seed * 1000003 + node_index));

        json jn;
        jn["name"] = name;
        jn["os"] = to_string(n.os);
        jn["host"] = n.addr.host;
        jn["port"] = n.addr.port;
        jn["lan"] = n.lan_domain;
        jn["online"] = n.online;
        jn["peer_id"] = n.peer_id.hex();
        jn["byzantine_corrupt_first"] = n.byzantine.corrupt_first_n;
        jn["archive"] = std::move(archive_records);
        jn["partial"] = std::move(partial_records);
        json dht = json::array();
        for (const auto& [share, entries] : n.dht_store) {
            json o;
            o["share"] = share.hex();
            o["peers"] = tracker_entries_json(entries);
            dht.push_back(std::move(o));
        }
        jn["dht_store"] = std::move(dht);
        nodes.push_back(std::move(jn));
        ++node_index;
    }
    world["nodes"] = std::move(nodes);

    json registry = json::array();
    for (const auto& [share, entries] : net.tracker().registry()) {
        json o;
        o["share"] = share.hex();
        o["peers"] = tracker_entries_json(entries);
        registry.push_back(std::move(o));
    }
    world["tracker"] = std::move(registry);

    std::string trace_digest = net.trace_digest();
    world["trace_digest"] = trace_digest;

    write_file(out_dir / "trace.log", net.trace_text());
    write_file(out_dir / "trace.digest", trace_digest + "\n");
    write_file(out_dir / "netlog.json", netlog_to_json(netlog_from_trace(net.trace())));
    write_file(out_dir / "net.json", world.dump(2) + "\n");

    return {out_dir, trace_digest};
}

// ---------------------------------------------------------------------------
// load_world

std::unique_ptr<Network> load_world(const fs::path& out_dir, uint64_t seed) {
    json world = json::parse(read_file(out_dir / "net.json"));

    NetParams params;
    params.seed = seed;
    params.latency_lo_ms = world.value("latency_lo_ms", int64_t{5});
    params.latency_hi_ms = world.value("latency_hi_ms", int64_t{25});
    params.ttl_minutes = world.value("ttl_minutes", int64_t{30});
    params.epoch_base = world.value("epoch_base", int64_t{1400000000});

    auto net_ptr = std::make_unique<Network>(params);
    Network& net = *net_ptr;
    net.clock.advance_to(world.value("end_ms", int64_t{0}));

    for (const auto& jn : world.at("nodes")) {
        std::string name = jn.at("name").get<std::string>();
        auto os = os_profile_from_string(jn.at("os").get<std::string>());
        if (!os) throw std::runtime_error("unknown os profile in net.json");
        fs::path node_dir = out_dir / name;
        ArtifactSet artifacts = locate_artifacts(node_dir, *os);

        Settings settings;
        if (artifacts.settings_dat) settings = parse_settings(read_file(*artifacts.settings_dat));

        Endpoint addr{jn.at("host").get<std::string>(), jn.at("port").get<uint16_t>()};
        Node& n = net.add_node(name, addr, jn.at("lan").get<std::string>(), *os, settings);
        n.peer_id = PeerID::from_hex(jn.at("peer_id").get<std::string>());
        n.byzantine.corrupt_first_n = jn.value("byzantine_corrupt_first", 0);

        std::map<std::pair<std::string, std::string>, int64_t> archive_expiry;
        for (const auto& rec : jn.value("archive", json::array()))
            archive_expiry[{rec.at("share").get<std::string>(),
                            rec.at("path").get<std::string>()}] =
                rec.at("expires_ms").get<int64_t>();

        if (artifacts.sync_dat) {
            fs::path app = node_dir / app_dir_for(*os);
            for (SyncDatConfig& cfg : parse_sync_dat_file(read_file(*artifacts.sync_dat))) {
                ShareID share = derive_share_id(cfg.secret);
                ShareState ss;
                ss.secret = cfg.secret;
                ss.config = cfg;
                ss.manifest.share_id = share;

                fs::path manifest_path = app / (share.hex() + ".db");
                if (fs::exists(manifest_path))
                    ss.manifest = parse_manifest(read_file(manifest_path));

                fs::path folder = node_dir / fs::path(cfg.path);
                for (const FileEntry& entry : ss.manifest.files) {
                    if (!safe_rel_path(entry.path)) continue;
                    const FileMeta* meta = ss.manifest.find_meta(entry.path);
                    int64_t piece_len = meta != nullptr ? meta->piece_len : settings.piece_len;
                    fs::path file_path = folder / fs::path(entry.path);
                    if (entry.state == 1 && entry.invalidated == 0) {
                        if (fs::exists(file_path)) {
                            ss.content[entry.path] =
                                StoredFile::from_bytes(read_file(file_path), piece_len);
                        } else {
                            fs::path sidecar =
                                app / "partial" / share.hex() / fs::path(entry.path + ".pieces");
                            if (fs::exists(sidecar))
                                ss.content[entry.path] = decode_piece_sidecar(read_file(sidecar));
                        }
                    } else if (entry.invalidated == 1 && fs::exists(file_path)) {
                        ss.invalid_content[entry.path] = read_file(file_path);
                    }
                    fs::path arch_path = folder / ".SyncArchive" / fs::path(entry.path);
                    if (fs::exists(arch_path)) {
                        ArchivedFile arch;
                        arch.content = read_file(arch_path);
                        auto it = archive_expiry.find({share.hex(), entry.path});
                        arch.expires_ms =
                            it != archive_expiry.end()
                                ? it->second
                                : net.clock.now_ms() + settings.archive_days * 86'400'000;
                        ss.archive[entry.path] = std::move(arch);
                    }
                }
                n.shares[share] = std::move(ss);
            }
        }

        for (const auto& o : jn.value("dht_store", json::array()))
            n.dht_store[ShareID::from_hex(o.at("share").get<std::string>())] =
                tracker_entries_from(o.at("peers"));

        if (!jn.value("online", true)) net.set_online(name, false);
    }

    for (const auto& o : world.value("tracker", json::array()))
        net.tracker().restore(ShareID::from_hex(o.at("share").get<std::string>()),
                              tracker_entries_from(o.at("peers")));

    return net_ptr;
}

}  // namespace dsync
