#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsync/syncnet.hpp"
#include "dsync/world.hpp"

namespace dsync {

// Scenario files are JSON documents declaring nodes, LAN domains, shares,
// secrets, file contents (inline or seeded-random by size), a mutation
// timeline and the clock seed. Artifacts stay bencoded; JSON is experiment
// control only.

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string field, const std::string& what)
        : std::runtime_error(what), field(std::move(field)) {}
    std::string field;  // offending field, e.g. "timeline[2].node"
};

struct ScenarioFileDecl {
    std::string path;
    Bytes content;  // resolved: inline text or seeded bytes
    std::optional<std::vector<uint32_t>> pieces_held;
};

struct ScenarioShareDecl {
    Secret secret;  // already at the level this node holds
    SyncDatConfig config;
    std::vector<ScenarioFileDecl> files;
};

struct ScenarioNodeDecl {
    std::string name;
    Endpoint addr;
    std::string lan_domain;
    OsProfile os = OsProfile::Linux;
    Settings settings;
    ByzantineConfig byzantine;
    std::vector<ScenarioShareDecl> shares;
};

enum class ActionKind { Sync, Delete, SecureDelete, ModifyOffline, GoOffline, GoOnline, Announce };

struct ScenarioAction {
    int64_t at_ms = 0;
    ActionKind kind = ActionKind::Sync;
    std::string node;
    size_t share_index = 0;
    std::string path;
    Bytes content;  // modify_offline payload
};

struct ScenarioSpec {
    NetParams params;
    int64_t end_ms = 60'000;
    std::vector<ScenarioNodeDecl> nodes;
    std::vector<ScenarioAction> timeline;
};

ScenarioSpec parse_scenario(std::string_view json_text);

struct ScenarioRun {
    std::string trace_digest;
    std::filesystem::path out_dir;
};

// Builds the network, schedules the timeline, runs to end_ms and writes every
// node's artifact tree under out_dir.
ScenarioRun run_scenario(const ScenarioSpec& spec, const std::filesystem::path& out_dir);

}  // namespace dsync
