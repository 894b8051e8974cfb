#include "dsync/scenario.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace dsync {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw ScenarioError(field, what + " (field: " + field + ")");
}

int64_t int_or(const json& o, const char* key, int64_t fallback) {
    if (!o.contains(key)) return fallback;
    if (!o.at(key).is_number_integer()) bad(key, "must be an integer");
    return o.at(key).get<int64_t>();
}

Bytes resolve_content(const json& o, const std::string& field) {
    if (o.contains("text")) {
        if (!o.at("text").is_string()) bad(field + ".text", "must be a string");
        return o.at("text").get<std::string>();
    }
    if (o.contains("size")) {
        int64_t size = int_or(o, "size", 0);
        if (size < 0) bad(field + ".size", "must be non-negative");
        SeededRng rng(static_cast<uint64_t>(int_or(o, "content_seed", 0)));
        return rng.bytes(static_cast<size_t>(size));
    }
    bad(field, "file needs either \"text\" or \"size\" (+\"content_seed\")");
}

Secret resolve_secret(const json& share, const std::string& field) {
    Secret master;
    if (!share.contains("secret")) bad(field + ".secret", "is required");
    const json& s = share.at("secret");
    if (s.is_string()) {
        try {
            master = decode_secret(s.get<std::string>());
        } catch (const IdentityError& e) {
            bad(field + ".secret", e.what());
        }
    } else if (s.is_object() && s.contains("generate_seed")) {
        SeededRng rng(static_cast<uint64_t>(s.at("generate_seed").get<int64_t>()));
        master = generate_secret(AccessLevel::Master, rng);
    } else {
        bad(field + ".secret", "must be a Base32 string or {\"generate_seed\": n}");
    }

    std::string access = share.value("access", "master");
    if (access == "master") {
        if (master.level != AccessLevel::Master)
            bad(field + ".access", "secret is not a Master secret");
        return master;
    }
    if (access == "readonly") {
        if (master.level == AccessLevel::ReadOnly) return master;
        if (master.level != AccessLevel::Master)
            bad(field + ".access", "cannot derive ReadOnly from this secret");
        return derive_readonly(master);
    }
    bad(field + ".access", "must be \"master\" or \"readonly\"");
}

ActionKind action_kind(const std::string& name, const std::string& field) {
    if (name == "sync") return ActionKind::Sync;
    if (name == "delete") return ActionKind::Delete;
    if (name == "secure_delete") return ActionKind::SecureDelete;
    if (name == "modify_offline") return ActionKind::ModifyOffline;
    if (name == "go_offline") return ActionKind::GoOffline;
    if (name == "go_online") return ActionKind::GoOnline;
    if (name == "announce") return ActionKind::Announce;
    bad(field, "unknown action \"" + name + "\"");
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ScenarioError("<document>", std::string("not valid JSON: ") + e.what());
    }

    ScenarioSpec spec;
    spec.params.seed = static_cast<uint64_t>(int_or(doc, "seed", 1));
    spec.params.epoch_base = int_or(doc, "epoch_base", 1400000000);
    spec.params.ttl_minutes = int_or(doc, "ttl_minutes", 30);
    if (doc.contains("latency_ms")) {
        const json& lat = doc.at("latency_ms");
        if (!lat.is_array() || lat.size() != 2) bad("latency_ms", "must be [lo, hi]");
        spec.params.latency_lo_ms = lat.at(0).get<int64_t>();
        spec.params.latency_hi_ms = lat.at(1).get<int64_t>();
        if (spec.params.latency_lo_ms < 0 || spec.params.latency_hi_ms < spec.params.latency_lo_ms)
            bad("latency_ms", "needs 0 <= lo <= hi");
    }

    if (!doc.contains("nodes") || !doc.at("nodes").is_array() || doc.at("nodes").empty())
        bad("nodes", "at least one node is required");

    std::set<std::string> names;
    std::set<std::string> addresses;
    size_t ni = 0;
    for (const json& jn : doc.at("nodes")) {
        std::string nf = "nodes[" + std::to_string(ni) + "]";
        ScenarioNodeDecl node;
        if (!jn.contains("name") || !jn.at("name").is_string()) bad(nf + ".name", "is required");
        node.name = jn.at("name").get<std::string>();
        if (!names.insert(node.name).second) bad(nf + ".name", "duplicate node name");

        std::string host = jn.value("address", "10.0.0." + std::to_string(ni + 1));
        int64_t port = int_or(jn, "port", 3839);
        if (port < 1 || port > 65535) bad(nf + ".port", "must be in [1, 65535]");
        node.addr = {host, static_cast<uint16_t>(port)};
        if (!addresses.insert(node.addr.text()).second) bad(nf + ".address", "duplicate address");

        node.lan_domain = jn.value("lan", "lan0");
        auto os = os_profile_from_string(jn.value("os", "Linux"));
        if (!os) bad(nf + ".os", "must be Windows, MacOS, Linux or iOS");
        node.os = *os;

        if (jn.contains("settings")) {
            const json& js = jn.at("settings");
            node.settings.sync_archive_enabled =
                static_cast<int>(int_or(js, "sync_archive_enabled", 0));
            node.settings.archive_days = int_or(js, "archive_days", 30);
            node.settings.piece_len = int_or(js, "piece_len", kDefaultPieceLen);
            node.settings.checkin_minutes = int_or(js, "checkin_minutes", 30);
            if (node.settings.checkin_minutes < 10 || node.settings.checkin_minutes > 60)
                bad(nf + ".settings.checkin_minutes", "must be in [10, 60]");
            if (node.settings.piece_len <= 0) bad(nf + ".settings.piece_len", "must be positive");
            if (node.settings.archive_days < 0)
                bad(nf + ".settings.archive_days", "must be non-negative");
        }
        if (jn.contains("byzantine")) {
            const json& jb = jn.at("byzantine");
            node.byzantine.corrupt_first_n = static_cast<int>(int_or(jb, "corrupt_first_n", 0));
            if (jb.value("corrupt_all", false)) node.byzantine.corrupt_first_n = -1;
        }

        size_t si = 0;
        for (const json& js : jn.value("shares", json::array())) {
            std::string sf = nf + ".shares[" + std::to_string(si) + "]";
            ScenarioShareDecl share;
            share.secret = resolve_secret(js, sf);
            if (!js.contains("path") || !js.at("path").is_string())
                bad(sf + ".path", "is required");
            share.config.path = js.at("path").get<std::string>();
            if (!safe_rel_path(share.config.path))
                bad(sf + ".path", "must be a clean relative path");
            share.config.secret = share.secret;
            share.config.use_tracker = static_cast<int>(int_or(js, "use_tracker", 1));
            share.config.use_dht = static_cast<int>(int_or(js, "use_dht", 1));
            share.config.use_lan_broadcast = static_cast<int>(int_or(js, "use_lan_broadcast", 1));
            share.config.use_relay = static_cast<int>(int_or(js, "use_relay", 0));
            share.config.use_known_hosts = static_cast<int>(int_or(js, "use_known_hosts", 0));
            share.config.stopped_by_user = static_cast<int>(int_or(js, "stopped_by_user", 0));
            for (const json& h : js.value("known_hosts", json::array())) {
                if (!h.is_string()) bad(sf + ".known_hosts", "entries must be strings");
                try {
                    Endpoint::parse(h.get<std::string>());
                } catch (const std::invalid_argument&) {
                    bad(sf + ".known_hosts", "entries must be host:port");
                }
                share.config.known_hosts.push_back(h.get<std::string>());
            }

            size_t fi = 0;
            std::set<std::string> paths;
            for (const json& jf : js.value("files", json::array())) {
                std::string ff = sf + ".files[" + std::to_string(fi) + "]";
                ScenarioFileDecl file;
                if (!jf.contains("path") || !jf.at("path").is_string())
                    bad(ff + ".path", "is required");
                file.path = jf.at("path").get<std::string>();
                if (!safe_rel_path(file.path)) bad(ff + ".path", "must be a clean relative path");
                if (!paths.insert(file.path).second) bad(ff + ".path", "duplicate file path");
                file.content = resolve_content(jf, ff);
                if (jf.contains("pieces_held")) {
                    std::vector<uint32_t> held;
                    for (const json& p : jf.at("pieces_held"))
                        held.push_back(p.get<uint32_t>());
                    file.pieces_held = std::move(held);
                }
                share.files.push_back(std::move(file));
                ++fi;
            }
            node.shares.push_back(std::move(share));
            ++si;
        }
        spec.nodes.push_back(std::move(node));
        ++ni;
    }

    int64_t last_at = 0;
    size_t ti = 0;
    for (const json& ja : doc.value("timeline", json::array())) {
        std::string tf = "timeline[" + std::to_string(ti) + "]";
        ScenarioAction a;
        a.at_ms = int_or(ja, "at_ms", -1);
        if (a.at_ms < 0) bad(tf + ".at_ms", "is required and must be >= 0");
        if (a.at_ms < last_at) bad(tf + ".at_ms", "timeline times must be non-decreasing");
        last_at = a.at_ms;
        if (!ja.contains("action") || !ja.at("action").is_string())
            bad(tf + ".action", "is required");
        a.kind = action_kind(ja.at("action").get<std::string>(), tf + ".action");
        if (!ja.contains("node") || !ja.at("node").is_string()) bad(tf + ".node", "is required");
        a.node = ja.at("node").get<std::string>();

        const ScenarioNodeDecl* decl = nullptr;
        for (const auto& n : spec.nodes)
            if (n.name == a.node) decl = &n;
        if (decl == nullptr) bad(tf + ".node", "undeclared node \"" + a.node + "\"");

        bool needs_share = a.kind == ActionKind::Sync || a.kind == ActionKind::Delete ||
                           a.kind == ActionKind::SecureDelete ||
                           a.kind == ActionKind::ModifyOffline || a.kind == ActionKind::Announce;
        if (needs_share) {
            a.share_index = static_cast<size_t>(int_or(ja, "share", 0));
            if (a.share_index >= decl->shares.size())
                bad(tf + ".share", "share index out of range for node \"" + a.node + "\"");
        }
        bool needs_path = a.kind == ActionKind::Delete || a.kind == ActionKind::SecureDelete ||
                          a.kind == ActionKind::ModifyOffline;
        if (needs_path) {
            if (!ja.contains("path") || !ja.at("path").is_string())
                bad(tf + ".path", "is required for this action");
            a.path = ja.at("path").get<std::string>();
        }
        if (a.kind == ActionKind::ModifyOffline) a.content = resolve_content(ja, tf);
        spec.timeline.push_back(std::move(a));
        ++ti;
    }

    spec.end_ms = int_or(doc, "end_ms", std::max<int64_t>(last_at + 60'000, 60'000));
    if (spec.end_ms < last_at) bad("end_ms", "must not precede the last timeline action");
    return spec;
}

ScenarioRun run_scenario(const ScenarioSpec& spec, const std::filesystem::path& out_dir) {
    Network net(spec.params);

    std::map<std::string, std::vector<ShareID>> share_ids;
    for (const auto& decl : spec.nodes) {
        net.add_node(decl.name, decl.addr, decl.lan_domain, decl.os, decl.settings);
        net.node(decl.name).byzantine = decl.byzantine;
        for (const auto& share : decl.shares) {
            ShareID id = net.add_share(decl.name, share.secret, share.config);
            share_ids[decl.name].push_back(id);
            for (const auto& file : share.files) {
                if (file.pieces_held)
                    net.add_partial_file(decl.name, id, file.path, file.content,
                                         *file.pieces_held);
                else
                    net.add_file(decl.name, id, file.path, file.content);
            }
        }
    }
    net.start_checkins();

    size_t ti = 0;
    for (const auto& action : spec.timeline) {
        std::string tf = "timeline[" + std::to_string(ti++) + "]";
        net.clock.schedule(action.at_ms, [&, action, tf]() {
            Node& n = net.node(action.node);
            try {
                switch (action.kind) {
                    case ActionKind::Sync:
                        net.node_sync(n, share_ids.at(action.node).at(action.share_index));
                        break;
                    case ActionKind::Delete:
                        net.delete_file(n, share_ids.at(action.node).at(action.share_index),
                                        action.path);
                        break;
                    case ActionKind::SecureDelete:
                        net.secure_delete(n, share_ids.at(action.node).at(action.share_index),
                                          action.path);
                        break;
                    case ActionKind::ModifyOffline:
                        net.modify_offline(n, share_ids.at(action.node).at(action.share_index),
                                           action.path, action.content);
                        break;
                    case ActionKind::GoOffline:
                        net.set_online(action.node, false);
                        break;
                    case ActionKind::GoOnline:
                        net.set_online(action.node, true);
                        break;
                    case ActionKind::Announce: {
                        ShareID id = share_ids.at(action.node).at(action.share_index);
                        const ShareState& ss = n.shares.at(id);
                        if (ss.config.use_tracker) net.tracker_announce(n, id);
                        if (ss.config.use_dht) net.dht_announce(n, id);
                        break;
                    }
                }
            } catch (const NetError& e) {
                throw ScenarioError(tf, std::string(e.what()));
            }
        });
    }

    net.clock.run_until(spec.end_ms);
    WorldFiles files = write_world(net, out_dir);
    return {files.trace_digest, files.out_dir};
}

}  // namespace dsync
