#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <limits>

#include "dsync/syncnet.hpp"

namespace dsync {

// ---------------------------------------------------------------------------
// Endpoint

Endpoint Endpoint::parse(std::string_view text) {
    size_t colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 >= text.size())
        throw std::invalid_argument("endpoint must be host:port");
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    std::string_view port_text = text.substr(colon + 1);
    unsigned long port = 0;
    auto [ptr, ec] = std::from_chars(port_text.begin(), port_text.end(), port);
    if (ec != std::errc() || ptr != port_text.end() || port == 0 || port > 65535)
        throw std::invalid_argument("bad port in endpoint");
    ep.port = static_cast<uint16_t>(port);
    return ep;
}

// ---------------------------------------------------------------------------
// SimClock

uint64_t SimClock::schedule(int64_t delay_ms, std::function<void()> fn) {
    if (delay_ms < 0) delay_ms = 0;
    uint64_t seq = next_seq_++;
    queue_.push(Entry{now_ + delay_ms, seq, std::move(fn)});
    return seq;
}

int64_t SimClock::next_event_time() const {
    return queue_.empty() ? std::numeric_limits<int64_t>::max() : queue_.top().at;
}

bool SimClock::run_one() {
    if (queue_.empty()) return false;
    Entry e = queue_.top();
    queue_.pop();
    if (e.at > now_) now_ = e.at;
    e.fn();
    return true;
}

size_t SimClock::run_until(int64_t t_ms) {
    size_t processed = 0;
    while (!queue_.empty() && queue_.top().at <= t_ms) {
        run_one();
        ++processed;
    }
    advance_to(t_ms);
    return processed;
}

// ---------------------------------------------------------------------------
// MemoryBus

void MemoryBus::attach(const Endpoint& ep, DatagramHandler handler) {
    handlers_[ep] = std::move(handler);
}

void MemoryBus::detach(const Endpoint& ep) { handlers_.erase(ep); }

void MemoryBus::send(const Datagram& d) {
    auto it = handlers_.find(d.dst);
    if (it == handlers_.end()) return;  // unreachable: dropped
    int64_t latency = rng_.range(lo_, hi_);
    Datagram copy = d;
    // Handlers can detach between scheduling and delivery (node goes offline
    // mid-flight), so re-resolve at fire time.
    Endpoint dst = d.dst;
    clock_.schedule(latency, [this, copy = std::move(copy), dst]() {
        auto h = handlers_.find(dst);
        if (h != handlers_.end()) h->second(copy);
    });
}

// ---------------------------------------------------------------------------
// LoopbackBus — demonstration transport over real UDP sockets.

namespace {

// Wire framing: "<srclen>:<src><dstlen>:<dst><payload>" so the receiver can
// recover sim endpoints from a real datagram.
Bytes frame(const Datagram& d) {
    std::string src = d.src.text(), dst = d.dst.text();
    Bytes out = std::to_string(src.size()) + ":" + src + std::to_string(dst.size()) + ":" + dst;
    out += d.payload;
    return out;
}

std::optional<Datagram> unframe(std::string_view buf) {
    auto take = [&](std::string& out) -> bool {
        size_t colon = buf.find(':');
        if (colon == std::string_view::npos) return false;
        size_t len = 0;
        auto [ptr, ec] = std::from_chars(buf.begin(), buf.begin() + colon, len);
        if (ec != std::errc() || ptr != buf.begin() + colon) return false;
        if (buf.size() < colon + 1 + len) return false;
        out = std::string(buf.substr(colon + 1, len));
        buf.remove_prefix(colon + 1 + len);
        return true;
    };
    std::string src, dst;
    if (!take(src) || !take(dst)) return std::nullopt;
    try {
        return Datagram{Endpoint::parse(src), Endpoint::parse(dst), Bytes(buf)};
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

}  // namespace

LoopbackBus::LoopbackBus() { tx_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0); }

LoopbackBus::~LoopbackBus() {
    for (auto& [ep, slot] : slots_)
        if (slot.fd >= 0) ::close(slot.fd);
    if (tx_fd_ >= 0) ::close(tx_fd_);
}

void LoopbackBus::attach(const Endpoint& ep, DatagramHandler handler) {
    detach(ep);
    Slot slot;
    slot.fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    slot.handler = std::move(handler);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    sa.sin_port = 0;
    if (slot.fd < 0 || ::bind(slot.fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw std::runtime_error("loopback bus: cannot bind UDP socket");
    socklen_t len = sizeof sa;
    ::getsockname(slot.fd, reinterpret_cast<sockaddr*>(&sa), &len);
    real_ports_[ep] = ntohs(sa.sin_port);
    slots_[ep] = std::move(slot);
}

void LoopbackBus::detach(const Endpoint& ep) {
    auto it = slots_.find(ep);
    if (it == slots_.end()) return;
    if (it->second.fd >= 0) ::close(it->second.fd);
    slots_.erase(it);
    real_ports_.erase(ep);
}

void LoopbackBus::send(const Datagram& d) {
    auto it = real_ports_.find(d.dst);
    if (it == real_ports_.end()) return;  // dropped
    Bytes framed = frame(d);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    sa.sin_port = htons(it->second);
    ::sendto(tx_fd_, framed.data(), framed.size(), 0, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
}

bool LoopbackBus::poll(int max_wait_ms) {
    std::vector<pollfd> fds;
    std::vector<const Slot*> order;
    for (const auto& [ep, slot] : slots_) {
        fds.push_back({slot.fd, POLLIN, 0});
        order.push_back(&slot);
    }
    if (fds.empty()) return false;
    int ready = ::poll(fds.data(), fds.size(), max_wait_ms);
    if (ready <= 0) return false;
    bool delivered = false;
    char buf[65536];
    for (size_t i = 0; i < fds.size(); ++i) {
        if (!(fds[i].revents & POLLIN)) continue;
        ssize_t n = ::recv(fds[i].fd, buf, sizeof buf, 0);
        if (n <= 0) continue;
        auto d = unframe(std::string_view(buf, static_cast<size_t>(n)));
        if (d && order[i]->handler) {
            order[i]->handler(*d);
            delivered = true;
        }
    }
    return delivered;
}

// ---------------------------------------------------------------------------
// WireMessage

const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::MULTICAST_PING: return "multicast_ping";
        case MsgKind::TRACKER_ANNOUNCE: return "tracker_announce";
        case MsgKind::TRACKER_RESPONSE: return "tracker_response";
        case MsgKind::DHT_ANNOUNCE: return "dht_announce";
        case MsgKind::DHT_GET_PEERS: return "dht_get_peers";
        case MsgKind::DHT_PEERS: return "dht_peers";
        case MsgKind::HELLO: return "hello";
        case MsgKind::CHALLENGE: return "challenge";
        case MsgKind::AUTH: return "auth";
        case MsgKind::MANIFEST_REQUEST: return "manifest_request";
        case MsgKind::MANIFEST_RESPONSE: return "manifest_response";
        case MsgKind::PIECE_REQUEST: return "piece_request";
        case MsgKind::PIECE_RESPONSE: return "piece_response";
        case MsgKind::ERROR: return "error";
    }
    return "?";
}

std::optional<MsgKind> msg_kind_from(std::string_view s) {
    for (MsgKind k :
         {MsgKind::MULTICAST_PING, MsgKind::TRACKER_ANNOUNCE, MsgKind::TRACKER_RESPONSE,
          MsgKind::DHT_ANNOUNCE, MsgKind::DHT_GET_PEERS, MsgKind::DHT_PEERS, MsgKind::HELLO,
          MsgKind::CHALLENGE, MsgKind::AUTH, MsgKind::MANIFEST_REQUEST, MsgKind::MANIFEST_RESPONSE,
          MsgKind::PIECE_REQUEST, MsgKind::PIECE_RESPONSE, MsgKind::ERROR})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

Bytes WireMessage::encode() const {
    bencode::BDict d = body;
    d["m"] = bencode::BValue(Bytes(to_string(kind)));
    return bencode::encode(bencode::BValue(std::move(d)));
}

std::optional<WireMessage> WireMessage::decode(std::string_view payload) {
    try {
        bencode::BValue v = bencode::decode(payload, bencode::DecodeMode::Lenient);
        if (!v.is_dict()) return std::nullopt;
        const bencode::BValue* m = bencode::find(v.dict(), "m");
        if (m == nullptr || !m->is_string()) return std::nullopt;
        auto kind = msg_kind_from(m->str());
        if (!kind) return std::nullopt;
        WireMessage out;
        out.kind = *kind;
        out.body = v.dict();
        return out;
    } catch (const bencode::DecodeError&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Tracker

std::vector<TrackerEntry> Tracker::live_entries(const ShareID& share, int64_t now_ms) const {
    std::vector<TrackerEntry> out;
    auto it = registry_.find(share);
    if (it == registry_.end()) return out;
    for (const auto& e : it->second)
        if (e.last_checkin_ms >= now_ms - ttl_ms_) out.push_back(e);
    return out;
}

std::vector<TrackerEntry> Tracker::announce(const ShareID& share, const TrackerEntry& entry,
                                            int64_t now_ms) {
    auto& entries = registry_[share];
    bool found = false;
    for (auto& e : entries) {
        if (e.peer == entry.peer && e.addr == entry.addr) {
            e.last_checkin_ms = now_ms;
            found = true;
            break;
        }
    }
    if (!found) entries.push_back({entry.peer, entry.addr, now_ms});
    std::vector<TrackerEntry> others;
    for (const auto& e : live_entries(share, now_ms))
        if (!(e.peer == entry.peer && e.addr == entry.addr)) others.push_back(e);
    return others;
}

void Tracker::restore(const ShareID& share, std::vector<TrackerEntry> entries) {
    registry_[share] = std::move(entries);
}

// ---------------------------------------------------------------------------
// StoredFile

Bytes StoredFile::assemble() const {
    Bytes out;
    out.reserve(static_cast<size_t>(size));
    for (const auto& [index, bytes] : pieces) out += bytes;
    return out;
}

StoredFile StoredFile::from_bytes(std::string_view content, int64_t piece_len) {
    StoredFile f;
    f.size = static_cast<int64_t>(content.size());
    f.piece_len = piece_len;
    const size_t step = static_cast<size_t>(piece_len);
    uint32_t i = 0;
    for (size_t off = 0; off < content.size(); off += step, ++i)
        f.pieces.emplace(i, Bytes(content.substr(off, step)));
    return f;
}

// ---------------------------------------------------------------------------

const char* to_string(DiscoverySource s) {
    switch (s) {
        case DiscoverySource::Multicast: return "multicast";
        case DiscoverySource::Tracker: return "tracker";
        case DiscoverySource::Dht: return "dht";
        case DiscoverySource::KnownHosts: return "known_hosts";
        case DiscoverySource::SyncLogHistory: return "sync_log";
    }
    return "?";
}

bool xor_closer(const PeerID& a, const PeerID& b, const ShareID& target) {
    for (size_t i = 0; i < 20; ++i) {
        uint8_t da = a.id[i] ^ target.id[i];
        uint8_t db = b.id[i] ^ target.id[i];
        if (da != db) return da < db;
    }
    return a.id < b.id;  // deterministic tie-break
}

}  // namespace dsync
