#include "chaineval/iir.hpp"

#include "chaineval/text_util.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

namespace chaineval {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view segment_kind(const Segment& s) {
    return std::visit(overloaded{[](const GlobalVisual&) { return std::string_view("GlobalVisual"); },
                                 [](const TaskText&) { return std::string_view("TaskText"); },
                                 [](const PriorResponse&) { return std::string_view("PriorResponse"); },
                                 [](const AttentionText&) { return std::string_view("AttentionText"); },
                                 [](const LocalVisual&) { return std::string_view("LocalVisual"); }},
                      s);
}

json segment_to_json(const Segment& s) {
    json j = std::visit(overloaded{[](const GlobalVisual& g) { return json{{"tag", g.tag}}; },
                                   [](const TaskText& t) { return json{{"text", t.text}}; },
                                   [](const PriorResponse& p) { return json{{"round", p.round}, {"text", p.text}}; },
                                   [](const AttentionText& a) { return json{{"organ", a.organ}, {"text", a.text}}; },
                                   [](const LocalVisual& l) {
                                       return json{{"organ", l.organ}, {"roi", l.roi ? l.roi->to_json() : json()}};
                                   }},
                        s);
    j["kind"] = std::string(segment_kind(s));
    return j;
}

std::string display_name(std::string_view merged) {
    std::string s(merged);
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

AttentionText make_attention(std::string_view organ) {
    return {std::string(organ), std::string(kAttentionPhrase) + display_name(organ)};
}

std::string_view to_string(Termination t) { return t == Termination::NoNewOrgans ? "NoNewOrgans" : "MaxRounds"; }

std::string IirTrace::to_jsonl() const {
    std::string out;
    for (const auto& r : rounds) {
        json input = json::array();
        for (const auto& s : r.input) input.push_back(segment_to_json(s));
        out += json{{"round", r.round}, {"input", input}, {"response", r.response}, {"new_organs", r.new_organs}}
                   .dump() +
               "\n";
    }
    return out;
}

bool layout_valid(const RoundTrace& r) {
    const auto& in = r.input;
    if (r.round == 1)
        return in.size() == 2 && std::holds_alternative<GlobalVisual>(in[0]) && std::holds_alternative<TaskText>(in[1]);
    if (r.round < 2 || in.size() != 5) return false;
    if (!std::holds_alternative<GlobalVisual>(in[0]) || !std::holds_alternative<TaskText>(in[1])) return false;
    auto* prior = std::get_if<PriorResponse>(&in[2]);
    auto* att = std::get_if<AttentionText>(&in[3]);
    auto* local = std::get_if<LocalVisual>(&in[4]);
    if (!prior || !att || !local) return false;
    if (prior->round != r.round - 1) return false;
    if (att->organ != local->organ) return false;
    return att->text == std::string(kAttentionPhrase) + display_name(att->organ);
}

std::vector<std::string> extract_target_organs(std::string_view response, const std::set<std::string>& exclude) {
    const auto haystack = normalize_organ_name(response);
    // (position, -length, label)
    std::vector<std::tuple<std::size_t, std::ptrdiff_t, std::uint16_t>> hits;
    for (const auto& [phrase, label] : organ_synonyms()) {
        for (std::size_t pos = text::find_whole_word(haystack, phrase); pos != std::string::npos;
             pos = text::find_whole_word(haystack, phrase, pos + 1))
            hits.emplace_back(pos, -static_cast<std::ptrdiff_t>(phrase.size()), label);
    }
    std::sort(hits.begin(), hits.end());

    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t covered_until = 0;
    for (const auto& [pos, neg_len, label] : hits) {
        if (pos < covered_until) continue;  // inside a longer phrase already taken
        covered_until = pos + static_cast<std::size_t>(-neg_len);
        const auto& name = merged_name(label);
        if (exclude.count(name) || !seen.insert(name).second) continue;
        out.push_back(name);
    }
    return out;
}

std::vector<Segment> build_round_input(const RoundTrace& prior, std::string_view organ, std::optional<Roi> roi,
                                       const GlobalVisual& global, const TaskText& task) {
    const std::string canonical = merged_name(match_organ(organ));
    return {global, task, PriorResponse{prior.round, prior.response}, make_attention(canonical),
            LocalVisual{canonical, std::move(roi)}};
}

IirTrace run_iir(const std::string& task, const Reasoner& reasoner, const LabelVolume* volume, int max_rounds,
                 std::string global_tag) {
    if (max_rounds < 1) throw Error("InvalidConfig", "max_rounds must be positive", {{"max_rounds", max_rounds}});
    const GlobalVisual global{std::move(global_tag)};
    const TaskText task_text{task};

    auto ask = [&](const std::vector<Segment>& input, int round) {
        try {
            return reasoner(input);
        } catch (const Error& e) {
            throw Error("ReasonerFailure", "reasoner failed in round " + std::to_string(round) + ": " + e.what(),
                        {{"round", round}, {"cause", e.to_json()}});
        } catch (const std::exception& e) {
            throw Error("ReasonerFailure", "reasoner failed in round " + std::to_string(round) + ": " + e.what(),
                        {{"round", round}});
        }
    };

    IirTrace trace;
    std::deque<std::string> queue;
    std::set<std::string> known;  // visited or queued

    RoundTrace first;
    first.round = 1;
    first.input = {global, task_text};
    first.response = ask(first.input, 1);
    first.new_organs = extract_target_organs(first.response, known);
    for (const auto& o : first.new_organs) {
        queue.push_back(o);
        known.insert(o);
    }
    trace.rounds.push_back(std::move(first));

    while (!queue.empty() && static_cast<int>(trace.rounds.size()) < max_rounds) {
        auto organ = queue.front();
        queue.pop_front();
        trace.visited.push_back(organ);

        std::optional<Roi> roi;
        if (volume) {
            try {
                roi = extract_roi(*volume, match_organ(organ));
            } catch (const Error& e) {
                if (e.kind() != "EmptyRoi") throw;
            }
        }
        RoundTrace r;
        r.round = static_cast<int>(trace.rounds.size()) + 1;
        r.input = build_round_input(trace.rounds.back(), organ, roi, global, task_text);
        r.response = ask(r.input, r.round);
        r.new_organs = extract_target_organs(r.response, known);
        for (const auto& o : r.new_organs) {
            queue.push_back(o);
            known.insert(o);
        }
        trace.rounds.push_back(std::move(r));
    }
    trace.terminated = queue.empty() ? Termination::NoNewOrgans : Termination::MaxRounds;
    return trace;
}

Reasoner scripted_reasoner(std::vector<std::string> responses) {
    auto shared = std::make_shared<std::vector<std::string>>(std::move(responses));
    auto next = std::make_shared<std::size_t>(0);
    return [shared, next](const std::vector<Segment>&) -> std::string {
        if (*next >= shared->size()) return {};
        return (*shared)[(*next)++];
    };
}

}  // namespace chaineval
