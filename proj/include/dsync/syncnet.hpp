#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsync/artifacts.hpp"
#include "dsync/bencode.hpp"
#include "dsync/bytes.hpp"
#include "dsync/identity.hpp"
#include "dsync/integrity.hpp"

namespace dsync {

// Deterministic discrete-event simulation of the synchronization network:
// nodes with shares, a tracker, a simplified DHT, LAN multicast domains,
// manifest exchange and piece transfer. All protocol logic runs on a single
// logical scheduler; identical (seed, scenario) inputs reproduce identical
// event traces byte for byte.

enum class NetErr {
    UnknownNode,
    NodeOffline,
    UnknownShare,
    AuthFailed,
    BadToken,
    UnknownFile,
    PieceUnavailable,
    NoReachableStorageNodes,
    Timeout,
};

class NetError : public std::runtime_error {
public:
    NetError(NetErr kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
    NetErr kind;
};

// ---------------------------------------------------------------------------

struct Endpoint {
    std::string host;
    uint16_t port = 0;

    std::string text() const { return host + ":" + std::to_string(port); }
    static Endpoint parse(std::string_view text);  // throws std::invalid_argument

    auto operator<=>(const Endpoint&) const = default;
};

// ---------------------------------------------------------------------------

class SimClock {
public:
    int64_t now_ms() const { return now_; }

    // Events fire in (time, insertion sequence) order.
    uint64_t schedule(int64_t delay_ms, std::function<void()> fn);

    // Processes every event due at or before t and advances the clock to t.
    // Returns the number of events processed. An event that itself pumps the
    // clock (synchronous exchanges) may leave now() past t.
    size_t run_until(int64_t t_ms);

    bool has_due_events() const { return !queue_.empty(); }
    int64_t next_event_time() const;  // INT64_MAX when empty
    bool run_one();                   // pop + execute the next event, advancing now
    void advance_to(int64_t t_ms) {
        if (t_ms > now_) now_ = t_ms;
    }

private:
    struct Entry {
        int64_t at;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Entry& o) const {
            return at != o.at ? at > o.at : seq > o.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
    int64_t now_ = 0;
    uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------

struct Datagram {
    Endpoint src;
    Endpoint dst;
    Bytes payload;
};

using DatagramHandler = std::function<void(const Datagram&)>;

// Abstract datagram transport. The deterministic in-memory implementation is
// the default for every test; the UDP loopback one exists for demonstration.
class Bus {
public:
    virtual ~Bus() = default;
    virtual void attach(const Endpoint& ep, DatagramHandler handler) = 0;
    virtual void detach(const Endpoint& ep) = 0;
    virtual void send(const Datagram& d) = 0;
    // Drain externally-arriving datagrams (loopback only). Returns true if
    // anything was delivered.
    virtual bool poll(int max_wait_ms) { (void)max_wait_ms; return false; }
};

class MemoryBus : public Bus {
public:
    MemoryBus(SimClock& clock, SeededRng& rng, int64_t latency_lo, int64_t latency_hi)
        : clock_(clock), rng_(rng), lo_(latency_lo), hi_(latency_hi) {}

    void attach(const Endpoint& ep, DatagramHandler handler) override;
    void detach(const Endpoint& ep) override;
    void send(const Datagram& d) override;

    bool attached(const Endpoint& ep) const { return handlers_.count(ep) > 0; }

private:
    SimClock& clock_;
    SeededRng& rng_;
    int64_t lo_, hi_;
    std::map<Endpoint, DatagramHandler> handlers_;
};

// Real UDP datagrams over 127.0.0.1; sim endpoints map to ephemeral local
// ports. Timing is wall-driven, so runs are not reproducible — excluded from
// acceptance runs.
class LoopbackBus : public Bus {
public:
    LoopbackBus();
    ~LoopbackBus() override;

    void attach(const Endpoint& ep, DatagramHandler handler) override;
    void detach(const Endpoint& ep) override;
    void send(const Datagram& d) override;
    bool poll(int max_wait_ms) override;

private:
    struct Slot {
        int fd = -1;
        DatagramHandler handler;
    };
    std::map<Endpoint, Slot> slots_;
    std::map<Endpoint, uint16_t> real_ports_;
    int tx_fd_ = -1;
};

// ---------------------------------------------------------------------------

enum class MsgKind {
    MULTICAST_PING,
    TRACKER_ANNOUNCE,
    TRACKER_RESPONSE,
    DHT_ANNOUNCE,
    DHT_GET_PEERS,
    DHT_PEERS,
    HELLO,
    CHALLENGE,
    AUTH,
    MANIFEST_REQUEST,
    MANIFEST_RESPONSE,
    PIECE_REQUEST,
    PIECE_RESPONSE,
    ERROR,
};

const char* to_string(MsgKind k);
std::optional<MsgKind> msg_kind_from(std::string_view s);

// Canonical bencoded dictionary with an "m" key naming the kind. Every body
// carries "share" (20 raw bytes) except HELLO.
struct WireMessage {
    MsgKind kind = MsgKind::ERROR;
    bencode::BDict body;

    Bytes encode() const;
    // Lenient decode: network input from misbehaving peers must not crash.
    static std::optional<WireMessage> decode(std::string_view payload);
};

// ---------------------------------------------------------------------------

enum class DiscoverySource { Multicast, Tracker, Dht, KnownHosts, SyncLogHistory };

const char* to_string(DiscoverySource s);

struct PeerRecord {
    PeerID peer;
    Endpoint addr;
    int64_t last_seen = 0;  // epoch seconds
    std::set<DiscoverySource> sources;
};

struct TrackerEntry {
    PeerID peer;
    Endpoint addr;
    int64_t last_checkin_ms = 0;
};

// Share registry with check-in expiry: an entry whose last check-in is
// strictly older than the TTL is never returned.
class Tracker {
public:
    explicit Tracker(int64_t ttl_ms) : ttl_ms_(ttl_ms) {}

    // Registers/refreshes (peer, now) and returns all other live entries.
    std::vector<TrackerEntry> announce(const ShareID& share, const TrackerEntry& entry,
                                       int64_t now_ms);
    std::vector<TrackerEntry> live_entries(const ShareID& share, int64_t now_ms) const;

    const std::map<ShareID, std::vector<TrackerEntry>>& registry() const { return registry_; }
    void restore(const ShareID& share, std::vector<TrackerEntry> entries);
    int64_t ttl_ms() const { return ttl_ms_; }

private:
    int64_t ttl_ms_;
    std::map<ShareID, std::vector<TrackerEntry>> registry_;
};

// ---------------------------------------------------------------------------

struct StoredFile {
    int64_t size = 0;
    int64_t piece_len = kDefaultPieceLen;
    std::map<uint32_t, Bytes> pieces;

    bool complete() const {
        return static_cast<int64_t>(pieces.size()) == piece_count_for(size, piece_len);
    }
    Bytes assemble() const;  // requires complete()
    static StoredFile from_bytes(std::string_view content, int64_t piece_len);
};

struct ArchivedFile {
    Bytes content;
    int64_t expires_ms = 0;
};

struct ShareState {
    Secret secret;
    SyncDatConfig config;
    ShareManifest manifest;
    std::map<std::string, StoredFile> content;        // valid piece data only
    std::map<std::string, Bytes> invalid_content;     // bytes after offline modification
    std::map<std::string, ArchivedFile> archive;
};

struct Session {
    ShareID share;
    AccessLevel scope = AccessLevel::ReadOnly;  // Master grants bidirectional
    PeerID client;
    Endpoint client_addr;
};

struct ByzantineConfig {
    // Number of piece responses to corrupt before behaving honestly;
    // -1 corrupts every response.
    int corrupt_first_n = 0;
};

struct Node {
    std::string name;
    PeerID peer_id;
    Endpoint addr;
    std::string lan_domain;
    OsProfile os = OsProfile::Linux;
    bool online = true;
    bool dht_member = true;  // investigator nodes query without joining the DHT
    Settings settings;
    ByzantineConfig byzantine;
    std::map<ShareID, ShareState> shares;
    std::vector<LogEvent> log;
    std::map<Bytes, Session> sessions;                       // token -> session
    std::map<std::pair<Bytes, Bytes>, Bytes> pending_nonces; // (peer raw, share raw) -> nonce
    std::map<ShareID, std::vector<TrackerEntry>> dht_store;
};

struct SessionToken {
    Endpoint server;
    ShareID share;
    Bytes token;
    AccessLevel scope = AccessLevel::ReadOnly;
};

struct SyncReport {
    bool no_peers = false;
    size_t peers_contacted = 0;
    size_t files_downloaded = 0;
    size_t pieces_transferred = 0;
    std::vector<std::string> downloaded_paths;
    std::vector<std::string> adopted_deletions;
    std::vector<std::string> errors;
};

struct TraceEntry {
    int64_t t_ms = 0;
    uint64_t seq = 0;
    Endpoint src;
    Endpoint dst;
    MsgKind kind = MsgKind::ERROR;
    std::optional<ShareID> share;
    std::optional<PeerID> peer;
    size_t size = 0;
    bool delivered = true;
};

struct NetParams {
    uint64_t seed = 1;
    int64_t latency_lo_ms = 5;
    int64_t latency_hi_ms = 25;
    int64_t ttl_minutes = 30;  // tracker and DHT check-in TTL
    int64_t epoch_base = 1400000000;
    bool loopback = false;  // demonstration transport; wall-driven, non-reproducible
};

// ---------------------------------------------------------------------------

class Network {
public:
    explicit Network(NetParams params);

    // Bus handlers capture `this`; the object must stay put.
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    // -- topology ------------------------------------------------------------
    Node& add_node(const std::string& name, const Endpoint& addr, const std::string& lan_domain,
                   OsProfile os = OsProfile::Linux, Settings settings = {});
    Node& node(const std::string& name);
    const Node* find_node(const std::string& name) const;
    Node* find_node_at(const Endpoint& addr);
    void set_online(const std::string& name, bool online);
    std::vector<std::string> node_names() const;

    ShareID add_share(const std::string& node_name, const Secret& secret, SyncDatConfig config);
    void add_file(const std::string& node_name, const ShareID& share, const std::string& path,
                  Bytes content, std::optional<int64_t> mtime_epoch = std::nullopt);
    // Partial possession: full metadata, only the listed pieces held.
    void add_partial_file(const std::string& node_name, const ShareID& share,
                          const std::string& path, Bytes content,
                          const std::vector<uint32_t>& pieces_held);

    // Periodic tracker/DHT check-ins for every share whose flags enable them.
    void start_checkins();

    // -- discovery and transfer (spec operations) ----------------------------
    std::vector<PeerRecord> tracker_announce(Node& from, const ShareID& share);
    void dht_announce(Node& from, const ShareID& share);
    std::vector<PeerRecord> dht_get_peers(Node& from, const ShareID& share);
    std::vector<PeerRecord> multicast_ping(Node& from, const ShareID& share);
    std::optional<PeerRecord> hello_probe(Node& from, const Endpoint& target);

    SessionToken session_handshake(Node& client, const Endpoint& server, const ShareID& share,
                                   const Secret& secret);
    ShareManifest fetch_manifest(Node& client, const SessionToken& token);
    Bytes fetch_piece(Node& client, const SessionToken& token, const std::string& path,
                      uint32_t index);

    SyncReport node_sync(Node& n, const ShareID& share);

    // -- local mutations ------------------------------------------------------
    void delete_file(Node& n, const ShareID& share, const std::string& path);
    void secure_delete(Node& n, const ShareID& share, const std::string& path);
    void modify_offline(Node& n, const ShareID& share, const std::string& path, Bytes content);

    // -- infrastructure -------------------------------------------------------
    SimClock clock;
    SeededRng rng;

    int64_t epoch_now() const { return params_.epoch_base + clock.now_ms() / 1000; }
    int64_t epoch_base() const { return params_.epoch_base; }
    int64_t ttl_ms() const { return params_.ttl_minutes * 60'000; }
    const NetParams& params() const { return params_; }

    Tracker& tracker() { return tracker_; }
    const Endpoint& tracker_endpoint() const { return tracker_ep_; }

    const std::vector<TraceEntry>& trace() const { return trace_; }
    std::string trace_text() const;
    std::string trace_digest() const;  // SHA-1 hex of the trace text

    std::map<std::string, Node>& nodes() { return nodes_; }
    const std::map<std::string, Node>& nodes() const { return nodes_; }

    // Send a request and pump the scheduler until its reply arrives or the
    // deadline passes. Returns std::nullopt on timeout.
    std::optional<WireMessage> rpc(Node& from, const Endpoint& to, WireMessage request);

    int64_t rpc_timeout_ms() const { return 4 * params_.latency_hi_ms + 100; }

private:
    void attach_node(Node& n);
    void handle_message(Node& n, const Datagram& d);
    void handle_tracker(const Datagram& d);
    void reply(const Endpoint& from, const Datagram& request, int64_t rid, WireMessage response);
    void send_from(const Endpoint& src, const Endpoint& dst, const WireMessage& msg);
    void error_reply(const Endpoint& from, const Datagram& request, int64_t rid, NetErr code,
                     const std::string& detail, const std::optional<ShareID>& share);

    std::vector<Node*> online_nodes();
    std::vector<PeerRecord> parse_peer_list(const bencode::BDict& body);
    void record_trace(const Datagram& d, bool delivered);
    void schedule_checkin(const std::string& node_name, const ShareID& share, bool immediate);
    void do_checkin(const std::string& node_name, const ShareID& share);

    // node_sync helpers
    bool pull_file(Node& n, ShareState& ss, const SessionToken& token, const PeerRecord& peer,
                   const FileEntry& remote_entry, const FileMeta& remote_meta, SyncReport& report);
    std::vector<PeerRecord> discover_for_sync(Node& n, const ShareID& share, const ShareState& ss);

    NetParams params_;
    std::unique_ptr<Bus> bus_;
    Tracker tracker_;
    Endpoint tracker_ep_{"t.usyncapp.com", 3000};
    std::map<std::string, Node> nodes_;
    std::map<Endpoint, std::string> by_addr_;
    std::vector<TraceEntry> trace_;
    uint64_t next_rid_ = 1;
    uint64_t trace_seq_ = 0;

    struct PendingRpc {
        std::string waiter;  // node name
        std::optional<WireMessage> reply;
        std::optional<Endpoint> reply_src;
    };
    struct PendingMulti {
        std::string waiter;
        std::vector<std::pair<Endpoint, WireMessage>> replies;
    };
    std::map<int64_t, PendingRpc> pending_;
    std::map<int64_t, PendingMulti> pending_multi_;
};

// XOR metric over 20-byte identifiers, compared big-endian lexicographically.
bool xor_closer(const PeerID& a, const PeerID& b, const ShareID& target);

}  // namespace dsync
