#pragma once

#include "chaineval/error.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chaineval {

enum class AgentRole { Reasoner, Calibrator, Summarizer, Extractor, Scorer, SemanticJudge };

std::string_view to_string(AgentRole role);
AgentRole parse_agent_role(std::string_view s);

struct Message {
    std::string speaker;  // "system", "user", "assistant"
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct JudgeRequest {
    AgentRole role = AgentRole::Scorer;
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 1024;

    /// Throws Error("InvalidRequest").
    void validate() const;
};

/// Convenience: one user message.
JudgeRequest make_request(AgentRole role, std::string prompt, std::string model = {});

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int total_tokens = 0;
};

struct JudgeResponse {
    std::string text;
    TokenUsage usage;
    nlohmann::json provider_meta = nlohmann::json::object();
    bool cache_hit = false;
    /// Served from another caller's in-flight backend call.
    bool coalesced = false;
    int retries = 0;
    std::string cache_key;
};

/// Canonical serialization: keys sorted, temperature rendered with fixed
/// precision, messages as ordered {speaker, content} objects.
std::string canonical_request(const JudgeRequest& req);
/// Lower-case hex SHA-256 of canonical_request.
std::string cache_key(const JudgeRequest& req);
JudgeRequest request_from_json(const nlohmann::json& j);
nlohmann::json request_to_json(const JudgeRequest& req);

std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct BackendReply {
    std::string text;
    TokenUsage usage;
    nlohmann::json provider_meta = nlohmann::json::object();
    /// Raw response body in chat-completions shape (what the disk cache keeps).
    std::string raw_body;
};

/// Builds a chat-completions shaped body around `text`.
std::string synthesize_completion_body(std::string_view text, const TokenUsage& usage = {});
/// Parses a chat-completions body. Throws Error("MalformedBody").
BackendReply parse_completion_body(std::string_view body);

/// Backends report failures as Error with kinds Timeout, HttpStatus (details
/// carry "status"), MalformedBody or ReplayMiss.
class Backend {
public:
    virtual ~Backend() = default;

    BackendReply call(const JudgeRequest& req, const std::string& key) {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_call(req, key);
    }

    std::size_t call_count() const { return calls_.load(std::memory_order_relaxed); }
    virtual bool is_live() const { return false; }
    /// Model used when a request leaves `model` empty.
    virtual std::string default_model() const { return {}; }
    virtual std::string describe() const = 0;

protected:
    virtual BackendReply do_call(const JudgeRequest& req, const std::string& key) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible chat-completions endpoint. The bearer token is read
/// from the environment variable named `auth_env` at call time.
class LiveEndpointBackend final : public Backend {
public:
    LiveEndpointBackend(std::string base_url, std::string auth_env, std::string model = {},
                        std::chrono::milliseconds timeout = std::chrono::seconds(120));

    bool is_live() const override { return true; }
    std::string default_model() const override { return model_; }
    std::string describe() const override { return "live:" + base_url_; }

protected:
    BackendReply do_call(const JudgeRequest& req, const std::string& key) override;

private:
    std::string base_url_;
    std::string auth_env_;
    std::string model_;
    std::chrono::milliseconds timeout_;
};

/// Answers from a fixture of recorded responses; unknown keys are errors.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(std::map<std::string, std::string> responses, std::string model = {});
    /// JSONL of {"key": ..., "response_text": ...}.
    static std::shared_ptr<ReplayBackend> from_file(const std::filesystem::path& path, std::string model = {});

    std::string default_model() const override { return model_; }
    std::string describe() const override { return "replay"; }
    std::size_t size() const { return responses_.size(); }

protected:
    BackendReply do_call(const JudgeRequest& req, const std::string& key) override;

private:
    std::map<std::string, std::string> responses_;
    std::string model_;
};

/// Hands out canned replies in order. An entry is either reply text or an
/// injected fault (HTTP status or timeout).
class ScriptedBackend final : public Backend {
public:
    struct Entry {
        std::string text;
        int status = 200;  // != 200 raises HttpStatus
        bool timeout = false;

        static Entry reply(std::string text) { return {std::move(text), 200, false}; }
        static Entry http_error(int status) { return {{}, status, false}; }
        static Entry timed_out() { return {{}, 200, true}; }
    };

    explicit ScriptedBackend(std::vector<Entry> entries, std::string model = {});
    static std::shared_ptr<ScriptedBackend> from_texts(std::vector<std::string> texts, std::string model = {});

    /// Entries not yet consumed.
    std::size_t remaining() const;
    std::string default_model() const override { return model_; }
    std::string describe() const override { return "scripted"; }

    /// Optional hook run inside every call, before the reply is chosen.
    void set_on_call(std::function<void()> hook) { on_call_ = std::move(hook); }

protected:
    BackendReply do_call(const JudgeRequest& req, const std::string& key) override;

private:
    std::vector<Entry> entries_;
    mutable std::mutex mu_;
    std::size_t next_ = 0;
    std::string model_;
    std::function<void()> on_call_;
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct ClientOptions {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_cap{8000};
    double jitter = 0.5;  // fraction of the delay that is randomized
    std::uint64_t jitter_seed = 0;
    std::optional<std::filesystem::path> cache_dir;
    std::ptrdiff_t max_in_flight = 8;
    /// Cache requests with temperature > 0 as well.
    bool pin_nonzero_temperature = false;
};

/// Shared, thread-safe chat client used by every judge-driven operation.
/// Identical cacheable requests are answered from the content-addressed
/// cache, concurrent identical misses share one backend call, and transient
/// failures (timeouts, 429, 5xx) are retried with capped exponential
/// backoff, at most max_retries times per miss.
class JudgeClient {
public:
    explicit JudgeClient(ClientOptions options = {});

    void set_backend(AgentRole role, std::shared_ptr<Backend> backend);
    bool has_backend(AgentRole role) const;
    std::shared_ptr<Backend> backend(AgentRole role) const;

    /// Errors: InvalidRequest, NoBackend, HttpStatus, MalformedBody,
    /// ReplayMiss, RetriesExhausted (wrapping the last transient error).
    JudgeResponse complete(JudgeRequest req);

    /// Total backend calls across all roles.
    std::size_t backend_calls() const;

    /// Every backend-originated (key, text) pair seen so far, for building
    /// Replay fixtures.
    std::map<std::string, std::string> recorded() const;
    void write_fixture(const std::filesystem::path& path) const;

    const ClientOptions& options() const { return options_; }

private:
    struct CachedEntry {
        std::string text;
        TokenUsage usage;
        nlohmann::json provider_meta;
        int retries = 0;
    };

    std::optional<CachedEntry> cache_lookup(const std::string& key);
    void cache_store(const std::string& key, const CachedEntry& entry, const std::string& raw_body);
    CachedEntry call_with_retries(Backend& backend, const JudgeRequest& req, const std::string& key,
                                  std::string& raw_body);
    std::chrono::milliseconds backoff_delay(int attempt);

    ClientOptions options_;
    std::map<AgentRole, std::shared_ptr<Backend>> backends_;
    mutable std::shared_mutex backends_mu_;

    std::unordered_map<std::string, CachedEntry> cache_;
    mutable std::shared_mutex cache_mu_;

    std::unordered_map<std::string, std::shared_future<CachedEntry>> in_flight_;
    std::mutex in_flight_mu_;

    std::map<std::string, std::string> recorded_;
    mutable std::mutex recorded_mu_;

    std::counting_semaphore<4096> live_slots_;
    std::mt19937_64 jitter_rng_;
    std::mutex jitter_mu_;
};

/// Reads a fixture JSONL into key -> response_text.
std::map<std::string, std::string> read_fixture(const std::filesystem::path& path);

}  // namespace chaineval
