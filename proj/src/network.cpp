#include <algorithm>

#include "dsync/syncnet.hpp"

namespace dsync {

using bencode::BDict;
using bencode::BList;
using bencode::BValue;

namespace {

const char* net_err_code(NetErr e) {
    switch (e) {
        case NetErr::UnknownShare: return "UnknownShare";
        case NetErr::AuthFailed: return "AuthFailed";
        case NetErr::BadToken: return "BadToken";
        case NetErr::UnknownFile: return "UnknownFile";
        case NetErr::PieceUnavailable: return "PieceUnavailable";
        case NetErr::NoReachableStorageNodes: return "NoReachableStorageNodes";
        case NetErr::Timeout: return "Timeout";
        case NetErr::UnknownNode: return "UnknownNode";
        case NetErr::NodeOffline: return "NodeOffline";
    }
    return "Error";
}

NetErr net_err_from_code(std::string_view code) {
    for (NetErr e : {NetErr::UnknownShare, NetErr::AuthFailed, NetErr::BadToken, NetErr::UnknownFile,
                     NetErr::PieceUnavailable, NetErr::NoReachableStorageNodes, NetErr::Timeout,
                     NetErr::UnknownNode, NetErr::NodeOffline})
        if (code == net_err_code(e)) return e;
    return NetErr::Timeout;
}

[[noreturn]] void throw_error_message(const WireMessage& msg) {
    std::string code, detail;
    if (const BValue* c = bencode::find(msg.body, "code"); c != nullptr && c->is_string())
        code = c->str();
    if (const BValue* d = bencode::find(msg.body, "detail"); d != nullptr && d->is_string())
        detail = d->str();
    throw NetError(net_err_from_code(code), code + ": " + detail);
}

std::optional<ShareID> share_of(const BDict& body) {
    const BValue* s = bencode::find(body, "share");
    if (s == nullptr || !s->is_string() || s->str().size() != 20) return std::nullopt;
    return ShareID::from_raw(s->str());
}

std::optional<PeerID> peer_of(const BDict& body) {
    const BValue* p = bencode::find(body, "peer");
    if (p == nullptr || !p->is_string() || p->str().size() != 20) return std::nullopt;
    return PeerID::from_raw(p->str());
}

BValue peer_list_value(const std::vector<TrackerEntry>& entries) {
    BList out;
    for (const auto& e : entries) {
        BDict d;
        d.emplace("host", e.addr.host);
        d.emplace("last", e.last_checkin_ms);
        d.emplace("peer", e.peer.raw());
        d.emplace("port", static_cast<int64_t>(e.addr.port));
        out.emplace_back(std::move(d));
    }
    return BValue(std::move(out));
}

std::vector<TrackerEntry> peer_list_from(const BDict& body) {
    std::vector<TrackerEntry> out;
    const BValue* v = bencode::find(body, "peers");
    if (v == nullptr || !v->is_list()) return out;
    for (const BValue& item : v->list()) {
        if (!item.is_dict()) continue;
        const BDict& d = item.dict();
        auto peer = peer_of(d);
        const BValue* host = bencode::find(d, "host");
        const BValue* port = bencode::find(d, "port");
        const BValue* last = bencode::find(d, "last");
        if (!peer || host == nullptr || !host->is_string() || port == nullptr || !port->is_int())
            continue;
        TrackerEntry e;
        e.peer = *peer;
        e.addr = {host->str(), static_cast<uint16_t>(port->integer())};
        e.last_checkin_ms = last != nullptr && last->is_int() ? last->integer() : 0;
        out.push_back(e);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// construction / topology

Network::Network(NetParams params)
    : rng(params.seed),
      params_(params),
      bus_(params.loopback
               ? std::unique_ptr<Bus>(std::make_unique<LoopbackBus>())
               : std::unique_ptr<Bus>(std::make_unique<MemoryBus>(clock, rng, params.latency_lo_ms,
                                                                  params.latency_hi_ms))),
      tracker_(params.ttl_minutes * 60'000) {
    bus_->attach(tracker_ep_, [this](const Datagram& d) { handle_tracker(d); });
}

Node& Network::add_node(const std::string& name, const Endpoint& addr,
                        const std::string& lan_domain, OsProfile os, Settings settings) {
    if (nodes_.count(name) > 0) throw std::invalid_argument("duplicate node name: " + name);
    if (by_addr_.count(addr) > 0)
        throw std::invalid_argument("duplicate node address: " + addr.text());
    Node n;
    n.name = name;
    n.peer_id = generate_peer_id(rng);
    n.addr = addr;
    n.lan_domain = lan_domain;
    n.os = os;
    n.settings = settings;
    auto [it, _] = nodes_.emplace(name, std::move(n));
    by_addr_[addr] = name;
    attach_node(it->second);
    return it->second;
}

void Network::attach_node(Node& n) {
    std::string name = n.name;
    bus_->attach(n.addr, [this, name](const Datagram& d) {
        auto it = nodes_.find(name);
        if (it == nodes_.end() || !it->second.online) return;
        handle_message(it->second, d);
    });
}

Node& Network::node(const std::string& name) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw NetError(NetErr::UnknownNode, "unknown node: " + name);
    return it->second;
}

const Node* Network::find_node(const std::string& name) const {
    auto it = nodes_.find(name);
    return it == nodes_.end() ? nullptr : &it->second;
}

Node* Network::find_node_at(const Endpoint& addr) {
    auto it = by_addr_.find(addr);
    return it == by_addr_.end() ? nullptr : &nodes_.at(it->second);
}

void Network::set_online(const std::string& name, bool online) {
    Node& n = node(name);
    if (n.online == online) return;
    n.online = online;
    if (online)
        attach_node(n);
    else
        bus_->detach(n.addr);
}

std::vector<std::string> Network::node_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : nodes_) out.push_back(name);
    return out;
}

ShareID Network::add_share(const std::string& node_name, const Secret& secret,
                           SyncDatConfig config) {
    Node& n = node(node_name);
    ShareID share = derive_share_id(secret);
    config.secret = secret;
    ShareState ss;
    ss.secret = secret;
    ss.config = std::move(config);
    ss.manifest.share_id = share;
    n.shares[share] = std::move(ss);
    return share;
}

void Network::add_file(const std::string& node_name, const ShareID& share, const std::string& path,
                       Bytes content, std::optional<int64_t> mtime_epoch) {
    Node& n = node(node_name);
    auto it = n.shares.find(share);
    if (it == n.shares.end()) throw NetError(NetErr::UnknownShare, "node does not hold share");
    ShareState& ss = it->second;
    FileIndex idx = index_file(content, n.settings.piece_len);
    FileEntry entry;
    entry.path = path;
    entry.size = idx.size;
    entry.mtime = mtime_epoch.value_or(epoch_now());
    entry.state = 1;
    entry.invalidated = 0;
    entry.hash20 = idx.whole_file_hash;
    std::erase_if(ss.manifest.files, [&](const FileEntry& f) { return f.path == path; });
    std::erase_if(ss.manifest.meta, [&](const FileMeta& m) { return m.path == path; });
    ss.manifest.files.push_back(entry);
    ss.manifest.meta.push_back(idx.to_meta(path));
    ss.content[path] = StoredFile::from_bytes(content, n.settings.piece_len);
}

void Network::add_partial_file(const std::string& node_name, const ShareID& share,
                               const std::string& path, Bytes content,
                               const std::vector<uint32_t>& pieces_held) {
    add_file(node_name, share, path, content);
    Node& n = node(node_name);
    StoredFile& f = n.shares.at(share).content.at(path);
    std::set<uint32_t> keep(pieces_held.begin(), pieces_held.end());
    std::erase_if(f.pieces, [&](const auto& kv) { return keep.count(kv.first) == 0; });
}

// ---------------------------------------------------------------------------
// trace + send

void Network::record_trace(const Datagram& d, bool delivered) {
    TraceEntry t;
    t.t_ms = clock.now_ms();
    t.seq = trace_seq_++;
    t.src = d.src;
    t.dst = d.dst;
    t.size = d.payload.size();
    t.delivered = delivered;
    if (auto msg = WireMessage::decode(d.payload)) {
        t.kind = msg->kind;
        t.share = share_of(msg->body);
        t.peer = peer_of(msg->body);
    }
    trace_.push_back(std::move(t));
}

void Network::send_from(const Endpoint& src, const Endpoint& dst, const WireMessage& msg) {
    Datagram d{src, dst, msg.encode()};
    bool deliverable = dst == tracker_ep_;
    if (!deliverable) {
        auto it = by_addr_.find(dst);
        deliverable = it != by_addr_.end() && nodes_.at(it->second).online;
    }
    record_trace(d, deliverable);
    bus_->send(d);
}

void Network::reply(const Endpoint& from, const Datagram& request, int64_t rid,
                    WireMessage response) {
    if (rid != 0) response.body["rid"] = rid;
    send_from(from, request.src, response);
}

void Network::error_reply(const Endpoint& from, const Datagram& request, int64_t rid, NetErr code,
                          const std::string& detail, const std::optional<ShareID>& share) {
    WireMessage err;
    err.kind = MsgKind::ERROR;
    err.body["rid"] = rid;
    err.body["code"] = Bytes(net_err_code(code));
    err.body["detail"] = Bytes(detail);
    if (share) err.body["share"] = share->raw();
    send_from(from, request.src, err);
}

std::optional<WireMessage> Network::rpc(Node& from, const Endpoint& to, WireMessage request) {
    if (!from.online) throw NetError(NetErr::NodeOffline, from.name + " is offline");
    int64_t rid = static_cast<int64_t>(next_rid_++);
    request.body["rid"] = rid;
    request.body["q"] = 1;  // request marker; a node can rpc itself (DHT self-storage)
    pending_[rid] = PendingRpc{from.name, std::nullopt, std::nullopt};
    send_from(from.addr, to, request);

    const int64_t deadline = clock.now_ms() + rpc_timeout_ms();
    while (true) {
        auto& slot = pending_[rid];
        if (slot.reply) {
            WireMessage out = std::move(*slot.reply);
            pending_.erase(rid);
            return out;
        }
        if (clock.now_ms() >= deadline) break;
        if (clock.has_due_events() && clock.next_event_time() <= deadline) {
            clock.run_one();
            continue;
        }
        if (bus_->poll(2)) {  // loopback transport: wall-driven arrivals
            clock.advance_to(clock.now_ms() + 1);
            continue;
        }
        clock.advance_to(deadline);  // in-memory bus: nothing can arrive anymore
    }
    pending_.erase(rid);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// message handling

void Network::handle_tracker(const Datagram& d) {
    auto msg = WireMessage::decode(d.payload);
    if (!msg || msg->kind != MsgKind::TRACKER_ANNOUNCE) return;
    int64_t rid = 0;
    if (const BValue* r = bencode::find(msg->body, "rid"); r != nullptr && r->is_int())
        rid = r->integer();
    auto share = share_of(msg->body);
    auto peer = peer_of(msg->body);
    const BValue* port = bencode::find(msg->body, "port");
    if (!share || !peer || port == nullptr || !port->is_int()) return;
    TrackerEntry entry{*peer, {d.src.host, static_cast<uint16_t>(port->integer())},
                       clock.now_ms()};
    std::vector<TrackerEntry> others = tracker_.announce(*share, entry, clock.now_ms());
    WireMessage resp;
    resp.kind = MsgKind::TRACKER_RESPONSE;
    resp.body["share"] = share->raw();
    resp.body["peers"] = peer_list_value(others);
    reply(tracker_ep_, d, rid, std::move(resp));
}

void Network::handle_message(Node& n, const Datagram& d) {
    auto msg = WireMessage::decode(d.payload);
    if (!msg) return;  // garbage from the wire is dropped, never fatal

    int64_t rid = 0;
    if (const BValue* r = bencode::find(msg->body, "rid"); r != nullptr && r->is_int())
        rid = r->integer();

    // Response routing: a message without the request marker whose rid belongs
    // to one of our own pending requests is a reply, not a new request.
    const bool is_request = bencode::find(msg->body, "q") != nullptr;
    if (!is_request) {
        if (auto it = pending_.find(rid); it != pending_.end() && it->second.waiter == n.name) {
            it->second.reply = *msg;
            it->second.reply_src = d.src;
            return;
        }
        if (auto it = pending_multi_.find(rid);
            it != pending_multi_.end() && it->second.waiter == n.name) {
            it->second.replies.emplace_back(d.src, *msg);
            return;
        }
    }

    // Stale replies (the requester's wait window already closed) must never be
    // dispatched as fresh requests.
    if (const BValue* r = bencode::find(msg->body, "reply"); r != nullptr) return;

    auto share = share_of(msg->body);
    switch (msg->kind) {
        case MsgKind::HELLO: {
            WireMessage resp;
            resp.kind = MsgKind::HELLO;
            resp.body["peer"] = n.peer_id.raw();
            resp.body["port"] = static_cast<int64_t>(n.addr.port);
            resp.body["reply"] = 1;
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        case MsgKind::MULTICAST_PING: {
            if (!share || n.shares.count(*share) == 0) return;  // only holders respond
            WireMessage resp;
            resp.kind = MsgKind::MULTICAST_PING;
            resp.body["share"] = share->raw();
            resp.body["peer"] = n.peer_id.raw();
            resp.body["port"] = static_cast<int64_t>(n.addr.port);
            resp.body["reply"] = 1;
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        case MsgKind::DHT_ANNOUNCE: {
            auto peer = peer_of(msg->body);
            const BValue* port = bencode::find(msg->body, "port");
            if (!share || !peer || port == nullptr || !port->is_int()) return;
            auto& entries = n.dht_store[*share];
            Endpoint addr{d.src.host, static_cast<uint16_t>(port->integer())};
            bool found = false;
            for (auto& e : entries)
                if (e.peer == *peer && e.addr == addr) {
                    e.last_checkin_ms = clock.now_ms();
                    found = true;
                }
            if (!found) entries.push_back({*peer, addr, clock.now_ms()});
            WireMessage resp;
            resp.kind = MsgKind::DHT_ANNOUNCE;
            resp.body["ok"] = 1;
            resp.body["reply"] = 1;
            resp.body["share"] = share->raw();
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        case MsgKind::DHT_GET_PEERS: {
            if (!share) return;
            std::vector<TrackerEntry> live;
            if (auto it = n.dht_store.find(*share); it != n.dht_store.end())
                for (const auto& e : it->second)
                    if (e.last_checkin_ms >= clock.now_ms() - ttl_ms()) live.push_back(e);
            WireMessage resp;
            resp.kind = MsgKind::DHT_PEERS;
            resp.body["peers"] = peer_list_value(live);
            resp.body["share"] = share->raw();
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        case MsgKind::AUTH: {
            if (!share) return;
            auto it = n.shares.find(*share);
            if (it == n.shares.end()) {
                error_reply(n.addr, d, rid, NetErr::UnknownShare, "share not held", share);
                return;
            }
            ShareState& ss = it->second;
            auto peer = peer_of(msg->body);
            if (!peer) return;
            const BValue* digest = bencode::find(msg->body, "digest");
            if (digest == nullptr) {
                // Stage 1: session open; issue a challenge nonce.
                Bytes nonce = rng.bytes(16);
                n.pending_nonces[{peer->raw(), share->raw()}] = nonce;
                WireMessage resp;
                resp.kind = MsgKind::CHALLENGE;
                resp.body["nonce"] = nonce;
                resp.body["share"] = share->raw();
                reply(n.addr, d, rid, std::move(resp));
                return;
            }
            // Stage 2: verify SHA1(nonce || secret bytes) against the secrets
            // this node can derive for the share.
            auto nonce_it = n.pending_nonces.find({peer->raw(), share->raw()});
            if (nonce_it == n.pending_nonces.end() || !digest->is_string()) {
                error_reply(n.addr, d, rid, NetErr::AuthFailed, "no pending challenge", share);
                return;
            }
            Bytes nonce = nonce_it->second;
            n.pending_nonces.erase(nonce_it);
            std::vector<Secret> candidates{ss.secret};
            if (ss.secret.level == AccessLevel::Master)
                candidates.push_back(derive_readonly(ss.secret));
            const Bytes& given = digest->str();
            for (const Secret& cand : candidates) {
                if (given == raw(sha1(nonce + cand.raw()))) {
                    Bytes token = rng.bytes(16);
                    const BValue* port = bencode::find(msg->body, "port");
                    Endpoint client_addr{d.src.host, port != nullptr && port->is_int()
                                                         ? static_cast<uint16_t>(port->integer())
                                                         : d.src.port};
                    n.sessions[token] = Session{*share, cand.level, *peer, client_addr};
                    WireMessage resp;
                    resp.kind = MsgKind::AUTH;
                    resp.body["reply"] = 1;
                    resp.body["scope"] =
                        Bytes(cand.level == AccessLevel::Master ? "rw" : "ro");
                    resp.body["share"] = share->raw();
                    resp.body["token"] = token;
                    reply(n.addr, d, rid, std::move(resp));
                    return;
                }
            }
            error_reply(n.addr, d, rid, NetErr::AuthFailed, "challenge digest mismatch", share);
            return;
        }
        case MsgKind::MANIFEST_REQUEST: {
            const BValue* token = bencode::find(msg->body, "token");
            if (!share || token == nullptr || !token->is_string()) return;
            auto sess = n.sessions.find(token->str());
            if (sess == n.sessions.end() || !(sess->second.share == *share)) {
                error_reply(n.addr, d, rid, NetErr::BadToken, "unknown or mismatched token", share);
                return;
            }
            ShareState& ss = n.shares.at(*share);
            {
                // The peer list records everyone who synchronized to or from us.
                bool known = false;
                for (auto& p : ss.config.peers)
                    if (p.id == sess->second.client) {
                        p.last_sync_completed = epoch_now();
                        known = true;
                    }
                if (!known)
                    ss.config.peers.push_back({sess->second.client, epoch_now()});
            }
            WireMessage resp;
            resp.kind = MsgKind::MANIFEST_RESPONSE;
            resp.body["manifest"] = write_manifest(ss.manifest);
            resp.body["share"] = share->raw();
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        case MsgKind::PIECE_REQUEST: {
            const BValue* token = bencode::find(msg->body, "token");
            const BValue* path = bencode::find(msg->body, "path");
            const BValue* index = bencode::find(msg->body, "index");
            if (!share || token == nullptr || !token->is_string() || path == nullptr ||
                !path->is_string() || index == nullptr || !index->is_int())
                return;
            auto sess = n.sessions.find(token->str());
            if (sess == n.sessions.end() || !(sess->second.share == *share)) {
                error_reply(n.addr, d, rid, NetErr::BadToken, "unknown or mismatched token", share);
                return;
            }
            ShareState& ss = n.shares.at(*share);
            const FileEntry* entry = ss.manifest.find_file(path->str());
            if (entry == nullptr) {
                error_reply(n.addr, d, rid, NetErr::UnknownFile, "not in manifest", share);
                return;
            }
            const FileMeta* meta = ss.manifest.find_meta(path->str());
            uint32_t idx = static_cast<uint32_t>(index->integer());
            if (meta == nullptr || idx >= meta->piece_count()) {
                error_reply(n.addr, d, rid, NetErr::PieceUnavailable, "no such piece", share);
                return;
            }
            Bytes piece;
            bool have = false;
            if (auto c = ss.content.find(path->str()); c != ss.content.end()) {
                auto p = c->second.pieces.find(idx);
                if (p != c->second.pieces.end()) {
                    piece = p->second;
                    have = true;
                }
            }
            if (!have) {
                if (auto a = ss.archive.find(path->str()); a != ss.archive.end()) {
                    // Archived copies serve until their retention expires.
                    if (a->second.expires_ms > clock.now_ms()) {
                        size_t off = static_cast<size_t>(idx) * meta->piece_len;
                        if (off < a->second.content.size()) {
                            piece = a->second.content.substr(
                                off, static_cast<size_t>(meta->piece_len));
                            have = true;
                        }
                    } else {
                        ss.archive.erase(a);
                    }
                }
            }
            if (!have) {
                error_reply(n.addr, d, rid, NetErr::PieceUnavailable, "piece not held", share);
                return;
            }
            if (n.byzantine.corrupt_first_n != 0 && !piece.empty()) {
                piece[0] = static_cast<char>(piece[0] ^ 0x01);
                if (n.byzantine.corrupt_first_n > 0) --n.byzantine.corrupt_first_n;
            }
            if (idx == 0)
                n.log.push_back({epoch_now(), LogEventKind::UPLOAD, sess->second.client,
                                 sess->second.client_addr.text(), Bytes(path->str())});
            WireMessage resp;
            resp.kind = MsgKind::PIECE_RESPONSE;
            resp.body["data"] = std::move(piece);
            resp.body["index"] = static_cast<int64_t>(idx);
            resp.body["path"] = path->str();
            resp.body["share"] = share->raw();
            reply(n.addr, d, rid, std::move(resp));
            return;
        }
        default:
            return;  // response kinds without a pending rpc: stale, ignored
    }
}

// ---------------------------------------------------------------------------
// discovery operations

std::vector<PeerRecord> Network::parse_peer_list(const BDict& body) {
    std::vector<PeerRecord> out;
    for (const auto& e : peer_list_from(body)) {
        PeerRecord r;
        r.peer = e.peer;
        r.addr = e.addr;
        r.last_seen = params_.epoch_base + e.last_checkin_ms / 1000;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PeerRecord> Network::tracker_announce(Node& from, const ShareID& share) {
    WireMessage req;
    req.kind = MsgKind::TRACKER_ANNOUNCE;
    req.body["share"] = share.raw();
    req.body["peer"] = from.peer_id.raw();
    req.body["port"] = static_cast<int64_t>(from.addr.port);
    auto resp = rpc(from, tracker_ep_, std::move(req));
    if (!resp || resp->kind != MsgKind::TRACKER_RESPONSE) return {};
    auto peers = parse_peer_list(resp->body);
    for (auto& p : peers) p.sources.insert(DiscoverySource::Tracker);
    return peers;
}

std::vector<Node*> Network::online_nodes() {
    std::vector<Node*> out;
    for (auto& [_, n] : nodes_)
        if (n.online && n.dht_member) out.push_back(&n);
    return out;
}

namespace {
std::vector<Node*> closest_storage_nodes(std::vector<Node*> candidates, const ShareID& share,
                                         size_t k) {
    std::sort(candidates.begin(), candidates.end(), [&](const Node* a, const Node* b) {
        return xor_closer(a->peer_id, b->peer_id, share);
    });
    if (candidates.size() > k) candidates.resize(k);
    return candidates;
}
}  // namespace

void Network::dht_announce(Node& from, const ShareID& share) {
    if (!from.online) throw NetError(NetErr::NodeOffline, from.name + " is offline");
    auto storage = closest_storage_nodes(online_nodes(), share, 2);
    if (storage.empty())
        throw NetError(NetErr::NoReachableStorageNodes, "no online DHT storage nodes");
    for (Node* target : storage) {
        WireMessage req;
        req.kind = MsgKind::DHT_ANNOUNCE;
        req.body["share"] = share.raw();
        req.body["peer"] = from.peer_id.raw();
        req.body["port"] = static_cast<int64_t>(from.addr.port);
        rpc(from, target->addr, std::move(req));
    }
}

std::vector<PeerRecord> Network::dht_get_peers(Node& from, const ShareID& share) {
    if (!from.online) throw NetError(NetErr::NodeOffline, from.name + " is offline");
    auto storage = closest_storage_nodes(online_nodes(), share, 2);
    if (storage.empty())
        throw NetError(NetErr::NoReachableStorageNodes, "no online DHT storage nodes");
    std::map<std::pair<Bytes, Endpoint>, PeerRecord> merged;
    for (Node* target : storage) {
        WireMessage req;
        req.kind = MsgKind::DHT_GET_PEERS;
        req.body["share"] = share.raw();
        auto resp = rpc(from, target->addr, std::move(req));
        if (!resp || resp->kind != MsgKind::DHT_PEERS) continue;
        for (auto& p : parse_peer_list(resp->body)) {
            p.sources.insert(DiscoverySource::Dht);
            auto key = std::make_pair(p.peer.raw(), p.addr);
            auto [it, inserted] = merged.emplace(key, p);
            if (!inserted) it->second.last_seen = std::max(it->second.last_seen, p.last_seen);
        }
    }
    std::vector<PeerRecord> out;
    for (auto& [_, p] : merged)
        if (!(p.peer == from.peer_id)) out.push_back(std::move(p));
    return out;
}

std::vector<PeerRecord> Network::multicast_ping(Node& from, const ShareID& share) {
    if (!from.online) throw NetError(NetErr::NodeOffline, from.name + " is offline");
    int64_t rid = static_cast<int64_t>(next_rid_++);
    pending_multi_[rid] = PendingMulti{from.name, {}};

    WireMessage ping;
    ping.kind = MsgKind::MULTICAST_PING;
    ping.body["share"] = share.raw();
    ping.body["peer"] = from.peer_id.raw();
    ping.body["port"] = static_cast<int64_t>(from.addr.port);
    ping.body["rid"] = rid;
    for (auto& [name, n] : nodes_) {
        if (name == from.name || !n.online || n.lan_domain != from.lan_domain) continue;
        send_from(from.addr, n.addr, ping);
    }

    const int64_t window_end = clock.now_ms() + 4 * params_.latency_hi_ms + 20;
    while (clock.now_ms() < window_end) {
        if (clock.has_due_events() && clock.next_event_time() <= window_end)
            clock.run_one();
        else if (!bus_->poll(2))
            clock.advance_to(window_end);
    }

    std::vector<PeerRecord> out;
    for (auto& [src, msg] : pending_multi_[rid].replies) {
        auto peer = peer_of(msg.body);
        const BValue* port = bencode::find(msg.body, "port");
        if (!peer || port == nullptr || !port->is_int()) continue;
        PeerRecord r;
        r.peer = *peer;
        r.addr = {src.host, static_cast<uint16_t>(port->integer())};
        r.last_seen = epoch_now();
        r.sources.insert(DiscoverySource::Multicast);
        out.push_back(std::move(r));
    }
    pending_multi_.erase(rid);
    return out;
}

std::optional<PeerRecord> Network::hello_probe(Node& from, const Endpoint& target) {
    WireMessage req;
    req.kind = MsgKind::HELLO;
    req.body["peer"] = from.peer_id.raw();
    req.body["port"] = static_cast<int64_t>(from.addr.port);
    auto resp = rpc(from, target, std::move(req));
    if (!resp || resp->kind != MsgKind::HELLO) return std::nullopt;
    auto peer = peer_of(resp->body);
    if (!peer) return std::nullopt;
    PeerRecord r;
    r.peer = *peer;
    r.addr = target;
    r.last_seen = epoch_now();
    r.sources.insert(DiscoverySource::KnownHosts);
    return r;
}

// ---------------------------------------------------------------------------
// sessions and transfer

SessionToken Network::session_handshake(Node& client, const Endpoint& server, const ShareID& share,
                                        const Secret& secret) {
    WireMessage open;
    open.kind = MsgKind::AUTH;
    open.body["share"] = share.raw();
    open.body["peer"] = client.peer_id.raw();
    open.body["port"] = static_cast<int64_t>(client.addr.port);
    auto challenge = rpc(client, server, std::move(open));
    if (!challenge) throw NetError(NetErr::Timeout, "no challenge from " + server.text());
    if (challenge->kind == MsgKind::ERROR) throw_error_message(*challenge);
    if (challenge->kind != MsgKind::CHALLENGE)
        throw NetError(NetErr::AuthFailed, "unexpected handshake reply");
    const BValue* nonce = bencode::find(challenge->body, "nonce");
    if (nonce == nullptr || !nonce->is_string())
        throw NetError(NetErr::AuthFailed, "challenge carried no nonce");

    WireMessage answer;
    answer.kind = MsgKind::AUTH;
    answer.body["share"] = share.raw();
    answer.body["peer"] = client.peer_id.raw();
    answer.body["port"] = static_cast<int64_t>(client.addr.port);
    answer.body["digest"] = raw(sha1(nonce->str() + secret.raw()));
    auto grant = rpc(client, server, std::move(answer));
    if (!grant) throw NetError(NetErr::Timeout, "no auth grant from " + server.text());
    if (grant->kind == MsgKind::ERROR) throw_error_message(*grant);
    const BValue* token = bencode::find(grant->body, "token");
    const BValue* scope = bencode::find(grant->body, "scope");
    if (grant->kind != MsgKind::AUTH || token == nullptr || !token->is_string())
        throw NetError(NetErr::AuthFailed, "unexpected grant reply");
    SessionToken out;
    out.server = server;
    out.share = share;
    out.token = token->str();
    out.scope = scope != nullptr && scope->is_string() && scope->str() == "rw"
                    ? AccessLevel::Master
                    : AccessLevel::ReadOnly;
    return out;
}

ShareManifest Network::fetch_manifest(Node& client, const SessionToken& token) {
    WireMessage req;
    req.kind = MsgKind::MANIFEST_REQUEST;
    req.body["share"] = token.share.raw();
    req.body["token"] = token.token;
    auto resp = rpc(client, token.server, std::move(req));
    if (!resp) throw NetError(NetErr::Timeout, "no manifest from " + token.server.text());
    if (resp->kind == MsgKind::ERROR) throw_error_message(*resp);
    const BValue* manifest = bencode::find(resp->body, "manifest");
    if (resp->kind != MsgKind::MANIFEST_RESPONSE || manifest == nullptr || !manifest->is_string())
        throw NetError(NetErr::BadToken, "unexpected manifest reply");
    return parse_manifest(manifest->str());
}

Bytes Network::fetch_piece(Node& client, const SessionToken& token, const std::string& path,
                           uint32_t index) {
    WireMessage req;
    req.kind = MsgKind::PIECE_REQUEST;
    req.body["share"] = token.share.raw();
    req.body["token"] = token.token;
    req.body["path"] = path;
    req.body["index"] = static_cast<int64_t>(index);
    auto resp = rpc(client, token.server, std::move(req));
    if (!resp) throw NetError(NetErr::Timeout, "no piece from " + token.server.text());
    if (resp->kind == MsgKind::ERROR) throw_error_message(*resp);
    const BValue* data = bencode::find(resp->body, "data");
    if (resp->kind != MsgKind::PIECE_RESPONSE || data == nullptr || !data->is_string())
        throw NetError(NetErr::PieceUnavailable, "unexpected piece reply");
    return data->str();
}

// ---------------------------------------------------------------------------
// synchronization

std::vector<PeerRecord> Network::discover_for_sync(Node& n, const ShareID& share,
                                                   const ShareState& ss) {
    std::map<std::pair<Bytes, Endpoint>, PeerRecord> merged;
    auto absorb = [&](std::vector<PeerRecord> found) {
        for (auto& p : found) {
            if (p.peer == n.peer_id) continue;
            auto key = std::make_pair(p.peer.raw(), p.addr);
            auto [it, inserted] = merged.emplace(key, p);
            if (!inserted)
                it->second.sources.insert(p.sources.begin(), p.sources.end());
        }
    };
    if (ss.config.use_lan_broadcast) absorb(multicast_ping(n, share));
    if (ss.config.use_tracker) absorb(tracker_announce(n, share));
    if (ss.config.use_dht) {
        dht_announce(n, share);
        absorb(dht_get_peers(n, share));
    }
    if (ss.config.use_known_hosts) {
        for (const auto& host : ss.config.known_hosts) {
            Endpoint ep;
            try {
                ep = Endpoint::parse(host);
            } catch (const std::invalid_argument&) {
                continue;
            }
            if (ep == n.addr) continue;
            if (auto r = hello_probe(n, ep)) absorb({*r});
        }
    }
    std::vector<PeerRecord> out;
    for (auto& [_, p] : merged) out.push_back(std::move(p));
    return out;
}

bool Network::pull_file(Node& n, ShareState& ss, const SessionToken& token, const PeerRecord& peer,
                        const FileEntry& remote_entry, const FileMeta& remote_meta,
                        SyncReport& report) {
    std::map<uint32_t, Bytes> pieces;
    const size_t count = remote_meta.piece_count();
    for (uint32_t i = 0; i < count; ++i) {
        bool got = false;
        for (int attempt = 0; attempt < 2 && !got; ++attempt) {  // one same-source retry
            Bytes piece;
            try {
                piece = fetch_piece(n, token, remote_entry.path, i);
            } catch (const NetError& e) {
                report.errors.push_back(remote_entry.path + ": " + e.what());
                return false;
            }
            try {
                got = verify_piece(piece, i, remote_meta);
            } catch (const IntegrityError&) {
                got = false;
            }
            if (got) {
                pieces[i] = std::move(piece);
                ++report.pieces_transferred;
            }
        }
        if (!got) {
            report.errors.push_back(remote_entry.path + ": piece " + std::to_string(i) +
                                    " failed verification twice");
            return false;
        }
    }
    VerificationResult vr = verify_file(pieces, remote_meta);
    if (vr.status != VerifyStatus::FULL_MATCH) {
        report.errors.push_back(remote_entry.path + ": aggregate verification failed");
        return false;
    }

    StoredFile stored;
    stored.size = remote_meta.size;
    stored.piece_len = remote_meta.piece_len;
    stored.pieces = std::move(pieces);
    ss.content[remote_entry.path] = std::move(stored);
    ss.invalid_content.erase(remote_entry.path);

    std::erase_if(ss.manifest.files, [&](const FileEntry& f) { return f.path == remote_entry.path; });
    std::erase_if(ss.manifest.meta, [&](const FileMeta& m) { return m.path == remote_entry.path; });
    ss.manifest.files.push_back(remote_entry);
    ss.manifest.meta.push_back(remote_meta);

    n.log.push_back({epoch_now(), LogEventKind::DOWNLOAD, peer.peer, peer.addr.text(),
                     remote_entry.path});
    report.downloaded_paths.push_back(remote_entry.path);
    ++report.files_downloaded;
    return true;
}

SyncReport Network::node_sync(Node& n, const ShareID& share) {
    if (!n.online) throw NetError(NetErr::NodeOffline, n.name + " is offline");
    auto it = n.shares.find(share);
    if (it == n.shares.end()) throw NetError(NetErr::UnknownShare, "node does not hold share");
    ShareState& ss = it->second;

    SyncReport report;
    n.log.push_back({epoch_now(), LogEventKind::SYNC_START, std::nullopt, std::nullopt,
                     std::nullopt});

    std::vector<PeerRecord> peers = discover_for_sync(n, share, ss);
    std::sort(peers.begin(), peers.end(),
              [](const PeerRecord& a, const PeerRecord& b) { return a.addr < b.addr; });
    if (peers.empty()) {
        report.no_peers = true;
        return report;
    }

    for (const PeerRecord& peer : peers) {
        SessionToken token;
        try {
            token = session_handshake(n, peer.addr, share, ss.secret);
        } catch (const NetError& e) {
            report.errors.push_back(peer.addr.text() + ": " + e.what());
            continue;
        }
        ++report.peers_contacted;
        n.log.push_back({epoch_now(), LogEventKind::PEER_CONNECT, peer.peer, peer.addr.text(),
                         std::nullopt});

        ShareManifest remote;
        try {
            remote = fetch_manifest(n, token);
        } catch (const std::exception& e) {  // timeout or malformed manifest
            report.errors.push_back(peer.addr.text() + ": " + e.what());
            continue;
        }

        for (const FileEntry& re : remote.files) {
            if (re.invalidated == 1) continue;  // remote-local divergence never propagates
            FileEntry* local = nullptr;
            for (auto& f : ss.manifest.files)
                if (f.path == re.path) local = &f;
            if (local != nullptr && local->invalidated == 1) continue;  // frozen
            if (local == nullptr) {
                if (re.state == 2) {
                    // Adopt deleted-file metadata; there is no content to fetch.
                    ss.manifest.files.push_back(re);
                    if (const FileMeta* rm = remote.find_meta(re.path);
                        rm != nullptr && ss.manifest.find_meta(re.path) == nullptr)
                        ss.manifest.meta.push_back(*rm);
                    report.adopted_deletions.push_back(re.path);
                } else if (const FileMeta* rm = remote.find_meta(re.path); rm != nullptr) {
                    pull_file(n, ss, token, peer, re, *rm, report);
                }
            } else if (re.mtime > local->mtime) {  // last writer wins
                if (re.state == 2) {
                    auto held = ss.content.find(re.path);
                    if (held != ss.content.end() && held->second.complete() &&
                        n.settings.sync_archive_enabled) {
                        ArchivedFile arch;
                        arch.content = held->second.assemble();
                        arch.expires_ms =
                            clock.now_ms() + n.settings.archive_days * 86'400'000;
                        ss.archive[re.path] = std::move(arch);
                    }
                    ss.content.erase(re.path);
                    *local = re;
                    n.log.push_back({epoch_now(), LogEventKind::DELETE, peer.peer,
                                     peer.addr.text(), re.path});
                    report.adopted_deletions.push_back(re.path);
                } else if (const FileMeta* rm = remote.find_meta(re.path); rm != nullptr) {
                    pull_file(n, ss, token, peer, re, *rm, report);
                }
            }
        }

        bool known = false;
        for (auto& p : ss.config.peers)
            if (p.id == peer.peer) {
                p.last_sync_completed = epoch_now();
                known = true;
            }
        if (!known) ss.config.peers.push_back({peer.peer, epoch_now()});
    }
    return report;
}

// ---------------------------------------------------------------------------
// local mutations

namespace {
FileEntry* entry_or_throw(ShareState& ss, const std::string& path) {
    for (auto& f : ss.manifest.files)
        if (f.path == path) return &f;
    throw NetError(NetErr::UnknownFile, "no such file in share: " + path);
}
}  // namespace

void Network::delete_file(Node& n, const ShareID& share, const std::string& path) {
    auto it = n.shares.find(share);
    if (it == n.shares.end()) throw NetError(NetErr::UnknownShare, "node does not hold share");
    ShareState& ss = it->second;
    FileEntry* entry = entry_or_throw(ss, path);

    if (auto c = ss.content.find(path); c != ss.content.end()) {
        if (n.settings.sync_archive_enabled && c->second.complete()) {
            ArchivedFile arch;
            arch.content = c->second.assemble();
            arch.expires_ms = clock.now_ms() + n.settings.archive_days * 86'400'000;
            ss.archive[path] = std::move(arch);
        }
        ss.content.erase(c);
    }
    ss.invalid_content.erase(path);

    if (ss.secret.level == AccessLevel::Master) {
        // Source-side deletion: propagates as state=2.
        entry->state = 2;
        entry->mtime = epoch_now();
        n.log.push_back({epoch_now(), LogEventKind::DELETE, std::nullopt, std::nullopt, path});
    } else {
        // A read-only replica cannot propagate changes; a local deletion
        // freezes the entry instead.
        entry->invalidated = 1;
        entry->mtime = epoch_now();
        n.log.push_back({epoch_now(), LogEventKind::INVALIDATE, std::nullopt, std::nullopt, path});
    }
}

void Network::secure_delete(Node& n, const ShareID& share, const std::string& path) {
    delete_file(n, share, path);
    ShareState& ss = n.shares.at(share);
    ss.archive.erase(path);  // anti-forensic destruction reaches the archive copy
    ss.content.erase(path);
    ss.invalid_content.erase(path);
}

void Network::modify_offline(Node& n, const ShareID& share, const std::string& path,
                             Bytes content) {
    auto it = n.shares.find(share);
    if (it == n.shares.end()) throw NetError(NetErr::UnknownShare, "node does not hold share");
    ShareState& ss = it->second;
    FileEntry* entry = entry_or_throw(ss, path);
    entry->invalidated = 1;
    entry->mtime = epoch_now();
    // hash20 and meta keep the last valid version; current bytes live apart.
    ss.content.erase(path);
    ss.invalid_content[path] = std::move(content);
    n.log.push_back({epoch_now(), LogEventKind::INVALIDATE, std::nullopt, std::nullopt, path});
}

// ---------------------------------------------------------------------------
// check-ins

void Network::start_checkins() {
    for (auto& [name, n] : nodes_)
        for (auto& [share, ss] : n.shares)
            if (ss.config.use_tracker || ss.config.use_dht) schedule_checkin(name, share, true);
}

void Network::schedule_checkin(const std::string& node_name, const ShareID& share,
                               bool immediate) {
    int64_t delay = immediate ? 0 : node(node_name).settings.checkin_minutes * 60'000;
    clock.schedule(delay, [this, node_name, share]() { do_checkin(node_name, share); });
}

void Network::do_checkin(const std::string& node_name, const ShareID& share) {
    auto it = nodes_.find(node_name);
    if (it == nodes_.end()) return;
    Node& n = it->second;
    if (n.online) {
        auto ss = n.shares.find(share);
        if (ss != n.shares.end()) {
            if (ss->second.config.use_tracker) tracker_announce(n, share);
            if (ss->second.config.use_dht) {
                try {
                    dht_announce(n, share);
                } catch (const NetError&) {
                    // storage unreachable this round; retry next check-in
                }
            }
        }
    }
    schedule_checkin(node_name, share, false);
}

// ---------------------------------------------------------------------------
// trace rendering

std::string Network::trace_text() const {
    std::string out;
    for (const auto& t : trace_) {
        out += "t=" + std::to_string(t.t_ms);
        out += " seq=" + std::to_string(t.seq);
        out += " " + t.src.text() + " -> " + t.dst.text();
        out += " ";
        out += to_string(t.kind);
        if (t.share) out += " share=" + t.share->hex().substr(0, 8);
        if (t.peer) out += " peer=" + t.peer->hex().substr(0, 8);
        out += " size=" + std::to_string(t.size);
        out += t.delivered ? "" : " dropped";
        out += '\n';
    }
    return out;
}

std::string Network::trace_digest() const { return hex(sha1(trace_text())); }

}  // namespace dsync
