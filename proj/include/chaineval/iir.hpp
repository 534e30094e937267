#pragma once

#include "chaineval/volume.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chaineval {

inline constexpr std::string_view kAttentionPhrase = "The question requires greater attention to ";

struct GlobalVisual {
    std::string tag;
    friend bool operator==(const GlobalVisual&, const GlobalVisual&) = default;
};
struct TaskText {
    std::string text;
    friend bool operator==(const TaskText&, const TaskText&) = default;
};
struct PriorResponse {
    int round = 0;
    std::string text;
    friend bool operator==(const PriorResponse&, const PriorResponse&) = default;
};
struct AttentionText {
    std::string organ;
    std::string text;  // kAttentionPhrase + display name
    friend bool operator==(const AttentionText&, const AttentionText&) = default;
};
struct LocalVisual {
    std::string organ;
    std::optional<Roi> roi;
    friend bool operator==(const LocalVisual&, const LocalVisual&) = default;
};

using Segment = std::variant<GlobalVisual, TaskText, PriorResponse, AttentionText, LocalVisual>;

std::string_view segment_kind(const Segment& s);
nlohmann::json segment_to_json(const Segment& s);

/// "portal_vein_and_splenic_vein" -> "portal vein and splenic vein".
std::string display_name(std::string_view merged_name);
AttentionText make_attention(std::string_view organ);

struct RoundTrace {
    int round = 0;  // 1-based
    std::vector<Segment> input;
    std::string response;
    std::vector<std::string> new_organs;
};

enum class Termination { NoNewOrgans, MaxRounds };
std::string_view to_string(Termination t);

struct IirTrace {
    std::vector<RoundTrace> rounds;
    std::vector<std::string> visited;  // pop order
    Termination terminated = Termination::NoNewOrgans;

    /// One JSON object per round.
    std::string to_jsonl() const;
};

/// True when the input matches the first-round layout [GlobalVisual,
/// TaskText] or the later-round layout [GlobalVisual, TaskText,
/// PriorResponse(i-1), AttentionText(o), LocalVisual(o)].
bool layout_valid(const RoundTrace& round);

/// Merged organ names mentioned in `response`, in first-mention order,
/// deduplicated, skipping `exclude`. Case-insensitive whole-word matching
/// over merged names, source names and synonyms; at one position the
/// longest phrase wins.
std::vector<std::string> extract_target_organs(std::string_view response, const std::set<std::string>& exclude = {});

/// Five-segment input for the round after `prior`. Throws Error("UnknownOrgan").
std::vector<Segment> build_round_input(const RoundTrace& prior, std::string_view organ, std::optional<Roi> roi,
                                       const GlobalVisual& global, const TaskText& task);

/// The model under simulation: input sequence in, response text out.
using Reasoner = std::function<std::string(const std::vector<Segment>&)>;

/// Runs the loop: one organ popped per round from a FIFO queue, until the
/// queue is empty or `max_rounds` rounds have run. Reasoner exceptions are
/// rethrown as Error("ReasonerFailure") carrying the round number.
IirTrace run_iir(const std::string& task, const Reasoner& reasoner, const LabelVolume* volume = nullptr,
                 int max_rounds = 8, std::string global_tag = "volume");

/// A reasoner replaying responses in order; past the end it answers "".
Reasoner scripted_reasoner(std::vector<std::string> responses);

}  // namespace chaineval
