#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <utility>

namespace chaineval {

/// Every domain failure raised by the library. `kind` is a stable identifier
/// (e.g. "MalformedTriple", "ReplayMiss") that the CLI reports verbatim;
/// `details` carries structured context such as offsets or offending labels.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message, nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(message), kind_(std::move(kind)), details_(std::move(details)) {}

    const std::string& kind() const noexcept { return kind_; }
    const nlohmann::json& details() const noexcept { return details_; }

    nlohmann::json to_json() const {
        return {{"error", kind_}, {"message", what()}, {"details", details_}};
    }

private:
    std::string kind_;
    nlohmann::json details_;
};

}  // namespace chaineval
