#include "chaineval/judge.hpp"

#include "chaineval/text_util.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace chaineval {

using nlohmann::json;

namespace {

constexpr std::pair<AgentRole, std::string_view> kRoleNames[] = {
    {AgentRole::Reasoner, "reasoner"},   {AgentRole::Calibrator, "calibrator"},
    {AgentRole::Summarizer, "summarizer"}, {AgentRole::Extractor, "extractor"},
    {AgentRole::Scorer, "scorer"},       {AgentRole::SemanticJudge, "semantic_judge"},
};

bool is_transient(const Error& e) {
    if (e.kind() == "Timeout") return true;
    if (e.kind() == "HttpStatus") {
        int status = e.details().value("status", 0);
        return status == 429 || status >= 500;
    }
    return false;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(AgentRole role) {
    for (const auto& [r, name] : kRoleNames)
        if (r == role) return name;
    return "unknown";
}

AgentRole parse_agent_role(std::string_view s) {
    for (const auto& [r, name] : kRoleNames)
        if (name == s) return r;
    throw Error("SchemaError", "unknown agent role: " + std::string(s), {{"role", std::string(s)}});
}

void JudgeRequest::validate() const {
    if (messages.empty()) throw Error("InvalidRequest", "request has no messages");
    for (const auto& m : messages) {
        if (m.speaker != "system" && m.speaker != "user" && m.speaker != "assistant")
            throw Error("InvalidRequest", "unknown speaker: " + m.speaker, {{"speaker", m.speaker}});
    }
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw Error("InvalidRequest", "temperature out of range", {{"temperature", temperature}});
    if (max_tokens <= 0) throw Error("InvalidRequest", "max_tokens must be positive", {{"max_tokens", max_tokens}});
}

JudgeRequest make_request(AgentRole role, std::string prompt, std::string model) {
    JudgeRequest r;
    r.role = role;
    r.model = std::move(model);
    r.messages.push_back({"user", std::move(prompt)});
    return r;
}

json request_to_json(const JudgeRequest& req) {
    json msgs = json::array();
    for (const auto& m : req.messages) msgs.push_back({{"speaker", m.speaker}, {"content", m.content}});
    return {{"role", std::string(to_string(req.role))},
            {"model", req.model},
            {"messages", msgs},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

JudgeRequest request_from_json(const json& j) {
    try {
        JudgeRequest r;
        r.role = parse_agent_role(j.at("role").get<std::string>());
        r.model = j.value("model", std::string{});
        for (const auto& m : j.at("messages"))
            r.messages.push_back({m.at("speaker").get<std::string>(), m.at("content").get<std::string>()});
        r.temperature = j.value("temperature", 0.0);
        r.max_tokens = j.value("max_tokens", 1024);
        return r;
    } catch (const json::exception& e) {
        throw Error("SchemaError", std::string("bad request json: ") + e.what());
    }
}

std::string canonical_request(const JudgeRequest& req) {
    // Fixed precision keeps 0, 0.0 and -0.0 on one key.
    double t = req.temperature == 0.0 ? 0.0 : req.temperature;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", t);
    json j = request_to_json(req);
    j["temperature"] = std::string(buf);
    return j.dump();  // object keys are emitted sorted
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("InternalError", "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string cache_key(const JudgeRequest& req) { return sha256_hex(canonical_request(req)); }

std::string synthesize_completion_body(std::string_view text, const TokenUsage& usage) {
    json j = {{"object", "chat.completion"},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", std::string(text)}}},
                                        {"finish_reason", "stop"}}})},
              {"usage",
               {{"prompt_tokens", usage.prompt_tokens},
                {"completion_tokens", usage.completion_tokens},
                {"total_tokens", usage.total_tokens}}}};
    return j.dump();
}

BackendReply parse_completion_body(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error("MalformedBody", "response body is not a JSON object",
                    {{"body_prefix", std::string(body.substr(0, 200))}});
    BackendReply r;
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error("MalformedBody", "message content is not a string");
        r.text = content.get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            r.usage.prompt_tokens = u->value("prompt_tokens", 0);
            r.usage.completion_tokens = u->value("completion_tokens", 0);
            r.usage.total_tokens = u->value("total_tokens", 0);
        }
        for (const char* k : {"id", "model", "created"})
            if (j.contains(k)) r.provider_meta[k] = j[k];
        if (j["choices"][0].contains("finish_reason")) r.provider_meta["finish_reason"] = j["choices"][0]["finish_reason"];
    } catch (const json::exception& e) {
        throw Error("MalformedBody", std::string("missing choices[0].message.content: ") + e.what());
    }
    r.raw_body = std::string(body);
    return r;
}

// ---------------------------------------------------------------------------
// Replay / Scripted
// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open fixture: " + path.string(), {{"path", path.string()}});
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("response_text") ||
            !j["key"].is_string() || !j["response_text"].is_string())
            throw Error("SchemaError", "bad fixture line", {{"path", path.string()}, {"line", lineno}});
        out[j["key"].get<std::string>()] = j["response_text"].get<std::string>();
    }
    return out;
}

ReplayBackend::ReplayBackend(std::map<std::string, std::string> responses, std::string model)
    : responses_(std::move(responses)), model_(std::move(model)) {}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(const std::filesystem::path& path, std::string model) {
    return std::make_shared<ReplayBackend>(read_fixture(path), std::move(model));
}

BackendReply ReplayBackend::do_call(const JudgeRequest& req, const std::string& key) {
    auto it = responses_.find(key);
    if (it == responses_.end())
        throw Error("ReplayMiss", "no recorded response for request",
                    {{"key", key}, {"role", std::string(to_string(req.role))}});
    BackendReply r;
    r.text = it->second;
    r.provider_meta = {{"backend", "replay"}};
    r.raw_body = synthesize_completion_body(r.text);
    return r;
}

ScriptedBackend::ScriptedBackend(std::vector<Entry> entries, std::string model)
    : entries_(std::move(entries)), model_(std::move(model)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_texts(std::vector<std::string> texts, std::string model) {
    std::vector<Entry> entries;
    for (auto& t : texts) entries.push_back(Entry::reply(std::move(t)));
    return std::make_shared<ScriptedBackend>(std::move(entries), std::move(model));
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lk(mu_);
    return entries_.size() - next_;
}

BackendReply ScriptedBackend::do_call(const JudgeRequest& req, const std::string& key) {
    if (on_call_) on_call_();
    Entry e;
    {
        std::lock_guard lk(mu_);
        if (next_ >= entries_.size())
            throw Error("ScriptExhausted", "scripted backend has no replies left",
                        {{"key", key}, {"role", std::string(to_string(req.role))}});
        e = entries_[next_++];
    }
    if (e.timeout) throw Error("Timeout", "scripted timeout");
    if (e.status != 200)
        throw Error("HttpStatus", "scripted HTTP status " + std::to_string(e.status), {{"status", e.status}});
    BackendReply r;
    r.text = e.text;
    r.provider_meta = {{"backend", "scripted"}};
    r.raw_body = synthesize_completion_body(r.text);
    return r;
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

JudgeClient::JudgeClient(ClientOptions options)
    : options_(std::move(options)),
      live_slots_(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(options_.max_in_flight, 4096))),
      jitter_rng_(options_.jitter_seed) {
    if (options_.max_retries < 0) throw Error("InvalidConfig", "max_retries must be >= 0");
    if (options_.max_in_flight < 1) throw Error("InvalidConfig", "max_in_flight must be >= 1");
    if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

void JudgeClient::set_backend(AgentRole role, std::shared_ptr<Backend> backend) {
    std::unique_lock lk(backends_mu_);
    backends_[role] = std::move(backend);
}

bool JudgeClient::has_backend(AgentRole role) const {
    std::shared_lock lk(backends_mu_);
    return backends_.count(role) > 0;
}

std::shared_ptr<Backend> JudgeClient::backend(AgentRole role) const {
    std::shared_lock lk(backends_mu_);
    auto it = backends_.find(role);
    return it == backends_.end() ? nullptr : it->second;
}

std::size_t JudgeClient::backend_calls() const {
    std::shared_lock lk(backends_mu_);
    // A backend shared by several roles counts once.
    std::vector<const Backend*> seen;
    std::size_t total = 0;
    for (const auto& [role, b] : backends_) {
        if (std::find(seen.begin(), seen.end(), b.get()) != seen.end()) continue;
        seen.push_back(b.get());
        total += b->call_count();
    }
    return total;
}

std::optional<JudgeClient::CachedEntry> JudgeClient::cache_lookup(const std::string& key) {
    {
        std::shared_lock lk(cache_mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    if (!options_.cache_dir) return std::nullopt;
    auto path = *options_.cache_dir / (key + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    BackendReply r;
    try {
        r = parse_completion_body(read_file(path));
    } catch (const Error&) {
        return std::nullopt;  // a corrupt entry is treated as a miss and rewritten
    }
    CachedEntry e{r.text, r.usage, r.provider_meta, 0};
    std::unique_lock lk(cache_mu_);
    cache_.emplace(key, e);
    return e;
}

void JudgeClient::cache_store(const std::string& key, const CachedEntry& entry, const std::string& raw_body) {
    {
        std::unique_lock lk(cache_mu_);
        cache_[key] = entry;
    }
    if (options_.cache_dir) {
        auto path = *options_.cache_dir / (key + ".json");
        auto tmp = path;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << raw_body;
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) std::filesystem::remove(tmp, ec);
    }
}

std::chrono::milliseconds JudgeClient::backoff_delay(int attempt) {
    double base = static_cast<double>(options_.backoff_base.count());
    double cap = static_cast<double>(options_.backoff_cap.count());
    double delay = std::min(cap, base * std::ldexp(1.0, attempt));
    double u;
    {
        std::lock_guard lk(jitter_mu_);
        u = std::uniform_real_distribution<double>(0.0, 1.0)(jitter_rng_);
    }
    double j = std::clamp(options_.jitter, 0.0, 1.0);
    delay *= (1.0 - j) + j * u;
    return std::chrono::milliseconds(static_cast<long long>(std::llround(delay)));
}

JudgeClient::CachedEntry JudgeClient::call_with_retries(Backend& backend, const JudgeRequest& req,
                                                        const std::string& key, std::string& raw_body) {
    json last_error;
    for (int attempt = 0;; ++attempt) {
        try {
            BackendReply r;
            if (backend.is_live()) {
                live_slots_.acquire();
                try {
                    r = backend.call(req, key);
                } catch (...) {
                    live_slots_.release();
                    throw;
                }
                live_slots_.release();
            } else {
                r = backend.call(req, key);
            }
            raw_body = r.raw_body.empty() ? synthesize_completion_body(r.text, r.usage) : r.raw_body;
            {
                std::lock_guard lk(recorded_mu_);
                recorded_[key] = r.text;
            }
            return CachedEntry{std::move(r.text), r.usage, std::move(r.provider_meta), attempt};
        } catch (const Error& e) {
            if (!is_transient(e)) throw;
            last_error = e.to_json();
            if (attempt >= options_.max_retries)
                throw Error("RetriesExhausted",
                            "gave up after " + std::to_string(attempt + 1) + " attempts: " + e.what(),
                            {{"attempts", attempt + 1}, {"last_error", last_error}, {"key", key}});
        }
        std::this_thread::sleep_for(backoff_delay(attempt));
    }
}

JudgeResponse JudgeClient::complete(JudgeRequest req) {
    auto be = backend(req.role);
    if (!be)
        throw Error("NoBackend", "no backend configured for role " + std::string(to_string(req.role)),
                    {{"role", std::string(to_string(req.role))}});
    if (req.model.empty()) req.model = be->default_model();
    req.validate();

    JudgeResponse resp;
    resp.cache_key = cache_key(req);
    const std::string& key = resp.cache_key;
    auto fill = [&](const CachedEntry& e) {
        resp.text = e.text;
        resp.usage = e.usage;
        resp.provider_meta = e.provider_meta.is_null() ? json::object() : e.provider_meta;
    };

    bool cacheable = req.temperature == 0.0 || options_.pin_nonzero_temperature;
    if (!cacheable) {
        std::string raw;
        auto e = call_with_retries(*be, req, key, raw);
        fill(e);
        resp.retries = e.retries;
        return resp;
    }

    if (auto hit = cache_lookup(key)) {
        fill(*hit);
        resp.cache_hit = true;
        return resp;
    }

    std::promise<CachedEntry> promise;
    std::shared_future<CachedEntry> fut;
    bool leader = false;
    {
        std::lock_guard lk(in_flight_mu_);
        if (auto it = in_flight_.find(key); it != in_flight_.end()) {
            fut = it->second;
        } else if (auto hit = cache_lookup(key)) {
            // Filled between the first lookup and taking the lock.
            fill(*hit);
            resp.cache_hit = true;
            return resp;
        } else {
            fut = promise.get_future().share();
            in_flight_.emplace(key, fut);
            leader = true;
        }
    }

    if (!leader) {
        fill(fut.get());  // rethrows the leader's error
        resp.cache_hit = true;
        resp.coalesced = true;
        return resp;
    }

    try {
        std::string raw;
        CachedEntry e = call_with_retries(*be, req, key, raw);
        cache_store(key, e, raw);
        promise.set_value(e);
        {
            std::lock_guard lk(in_flight_mu_);
            in_flight_.erase(key);
        }
        fill(e);
        resp.retries = e.retries;
        return resp;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lk(in_flight_mu_);
        in_flight_.erase(key);
        throw;
    }
}

std::map<std::string, std::string> JudgeClient::recorded() const {
    std::lock_guard lk(recorded_mu_);
    return recorded_;
}

void JudgeClient::write_fixture(const std::filesystem::path& path) const {
    auto rec = recorded();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write fixture: " + path.string(), {{"path", path.string()}});
    for (const auto& [k, v] : rec) out << json{{"key", k}, {"response_text", v}}.dump() << '\n';
}

}  // namespace chaineval
