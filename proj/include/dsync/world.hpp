#pragma once

#include <filesystem>
#include <string>

#include "dsync/syncnet.hpp"

namespace dsync {

// Persistence bridge between `simulate` and `acquire`: each node's artifact
// tree (sync.dat, settings.dat, sync.log, .SyncID, <ShareID>.db, content
// store, archive, memory image) is written under <out>/<node>/ in the exact
// formats of the artifacts module, plus a world manifest net.json, a global
// observation log netlog.json and the event trace.

struct WorldFiles {
    std::filesystem::path out_dir;
    std::string trace_digest;
};

// Writes every node's artifact tree plus net.json / netlog.json / trace.log.
WorldFiles write_world(Network& net, const std::filesystem::path& out_dir);

// Rebuilds a live network from an out-dir previously written by write_world.
// The clock resumes at the simulation's end time; `seed` drives the new run's
// latency and identifier draws.
std::unique_ptr<Network> load_world(const std::filesystem::path& out_dir, uint64_t seed);

// Synthetic RAM image for a node: seeded noise with the node's share secrets
// planted as Base32 runs plus "peerid <40hex>" and "lport <port>" fragments.
// Plants are flanked by newline bytes so offsets are unambiguous.
Bytes build_memory_image(const Node& n, uint64_t seed, size_t size = 1 << 20);

// Netlog observation entry (message summary, the network-traffic entry point).
struct NetlogEntry {
    int64_t t_ms = 0;
    std::string src;   // host:port
    std::string dst;   // host:port
    std::string kind;
    std::string share_hex;  // empty when the message carries no share
    std::string peer_hex;   // empty when the message carries no peer
};

std::vector<NetlogEntry> netlog_from_trace(const std::vector<TraceEntry>& trace);
std::string netlog_to_json(const std::vector<NetlogEntry>& entries);
std::vector<NetlogEntry> netlog_from_json(std::string_view text);

// Binary-safe whole-file helpers.
Bytes read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view bytes);

// True for a relative '/'-separated path without "." or ".." components —
// the only shape allowed to touch the filesystem.
bool safe_rel_path(std::string_view path);

}  // namespace dsync
