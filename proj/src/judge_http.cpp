#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "chaineval/judge.hpp"

#include <cstdlib>

namespace chaineval {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error("InvalidConfig", "endpoint url needs a scheme: " + url, {{"url", url}});
    auto path_begin = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_begin);
    std::string path = path_begin == std::string::npos ? "" : url.substr(path_begin);
    while (!path.empty() && path.back() == '/') path.pop_back();
    const std::string suffix = "/chat/completions";
    if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0)
        path += suffix;
    e.path = path;
    return e;
}

}  // namespace

LiveEndpointBackend::LiveEndpointBackend(std::string base_url, std::string auth_env, std::string model,
                                         std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), auth_env_(std::move(auth_env)), model_(std::move(model)), timeout_(timeout) {
    split_url(base_url_);
}

BackendReply LiveEndpointBackend::do_call(const JudgeRequest& req, const std::string& key) {
    Endpoint ep = split_url(base_url_);
    httplib::Client cli(ep.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!auth_env_.empty()) {
        if (const char* tok = std::getenv(auth_env_.c_str()); tok && *tok)
            headers.emplace("Authorization", std::string("Bearer ") + tok);
    }

    json msgs = json::array();
    for (const auto& m : req.messages) msgs.push_back({{"role", m.speaker}, {"content", m.content}});
    json body = {{"model", req.model},
                 {"messages", msgs},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_tokens}};

    auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error("Timeout", "transport failure: " + httplib::to_string(res.error()),
                    {{"url", base_url_}, {"key", key}, {"transport_error", httplib::to_string(res.error())}});
    }
    if (res->status != 200) {
        throw Error("HttpStatus", "endpoint returned HTTP " + std::to_string(res->status),
                    {{"status", res->status}, {"url", base_url_}, {"body_prefix", res->body.substr(0, 200)}});
    }
    BackendReply r = parse_completion_body(res->body);
    r.provider_meta["backend"] = "live";
    return r;
}

}  // namespace chaineval
