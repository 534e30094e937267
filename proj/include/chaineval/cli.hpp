#pragma once

#include "chaineval/data_engine.hpp"
#include "chaineval/judge.hpp"
#include "chaineval/rubric.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chaineval {

/// Parsed run configuration. Backend specs are kept as JSON until a client
/// is built so that --replay / --dry-run can override them.
struct RunConfig {
    std::map<std::string, nlohmann::json> backends;  // role name or "default" -> spec
    Weights weights;
    std::optional<std::filesystem::path> cache_dir;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;
    int max_retries = 3;
    int backoff_ms = 500;
    int backoff_cap_ms = 8000;
    int max_in_flight = 8;
    EngineConfig engine;

    /// Throws Error("InvalidConfig").
    void validate() const;
};

/// Errors: IoError, InvalidConfig.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct ClientOverrides {
    std::optional<std::filesystem::path> replay;  // every role answers from this fixture
    bool dry_run = false;                        // refuse anything but replay backends
};

/// Builds a judge client with one backend per role. Backend specs:
/// {"type": "live", "base_url", "auth_env", "model", "timeout_ms"},
/// {"type": "replay", "path", "model"}, {"type": "scripted", "responses"}.
std::unique_ptr<JudgeClient> make_client(const RunConfig& config, const ClientOverrides& overrides);

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 domain error (JSON on `err`), 2 usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, char** argv);

}  // namespace chaineval
