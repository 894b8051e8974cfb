#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dsync {

// Exit codes are a stable contract:
//   0 success, 1 parse failure, 2 usage/validation error,
//   3 verification degraded (PARTIAL/MISMATCH), 4 nothing to do.
constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegraded = 3;
constexpr int kExitNothing = 4;

struct SimulateArgs {
    std::filesystem::path scenario_file;
    std::filesystem::path out_dir;
    std::optional<uint64_t> seed_override;
    bool loopback = false;
};
int cmd_simulate(const SimulateArgs& args);

struct InspectArgs {
    std::filesystem::path artifact;
    std::string format = "text";  // text | json
};
int cmd_inspect(const InspectArgs& args);

struct ShareIdArgs {
    std::string secret_text;
};
int cmd_shareid(const ShareIdArgs& args);

struct AcquireArgs {
    std::filesystem::path evidence_dir;
    std::filesystem::path case_dir;
    std::optional<std::filesystem::path> world_dir;  // default: evidence_dir's parent
    std::optional<std::filesystem::path> memory_file;
    std::optional<std::filesystem::path> netlog_file;
    std::optional<std::filesystem::path> mobile_dir;
    std::vector<std::string> methods;      // known, tracker, dht, multicast, synclog
    std::vector<std::string> known_peers;  // host:port
    std::optional<std::string> secret_text;
    std::vector<std::string> extra_targets;
    std::optional<std::string> os_profile;  // auto-detected when absent
    std::optional<std::string> lan_domain;  // multicast domain for the investigator
    std::string case_id = "case-001";
    std::string investigator = "investigator";
    uint64_t seed = 1337;
};
int cmd_acquire(const AcquireArgs& args);

struct VerifyArgs {
    std::filesystem::path file;
    std::filesystem::path manifest;
    std::optional<std::string> path_name;  // defaults to the file's basename
};
int cmd_verify(const VerifyArgs& args);

struct ReportArgs {
    std::filesystem::path report_json;
    std::string format = "text";
};
int cmd_report(const ReportArgs& args);

// Full argv surface (CLI11); what tools/dsync.cpp and the tests drive.
int run_cli(const std::vector<std::string>& args);

}  // namespace dsync
