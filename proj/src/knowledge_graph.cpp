#include "chaineval/knowledge_graph.hpp"

#include "chaineval/text_util.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace chaineval {

using nlohmann::json;

namespace {

const char kDemoGraphJsonl[] =
#include "chaineval/embedded/demo_kg.inc"
    ;

constexpr std::string_view kScopes[] = {"liver", "pancreas", "stomach", "colon", "esophagus", "general"};

const std::vector<std::size_t> kNoEdges;

std::string node_key(std::string_view entity) { return text::normalize_phrase(entity); }

}  // namespace

std::string_view to_string(Tier tier) {
    switch (tier) {
        case Tier::A: return "A";
        case Tier::B: return "B";
        case Tier::C: return "C";
    }
    return "?";
}

Tier parse_tier(std::string_view s) {
    auto t = text::trim_view(s);
    if (t == "A" || t == "a") return Tier::A;
    if (t == "B" || t == "b") return Tier::B;
    if (t == "C" || t == "c") return Tier::C;
    throw Error("UnknownTier", "tier must be A, B or C: " + std::string(s), {{"tier", std::string(s)}});
}

std::string parse_organ_scope(std::string_view s) {
    auto lower = text::to_lower(text::trim_view(s));
    for (auto scope : kScopes)
        if (lower == scope) return lower;
    throw Error("UnknownOrgan", "unknown organ scope: " + std::string(s), {{"organ", std::string(s)}});
}

bool edge_order_less(const KgEdge& a, const KgEdge& b) {
    return std::tie(a.tier, a.subject, a.relation, a.object, a.organ_scope) <
           std::tie(b.tier, b.subject, b.relation, b.object, b.organ_scope);
}

struct GraphBuilder {
    static void index(KGraph& g) {
        g.entity_index_.clear();
        g.organ_index_.clear();
        for (std::size_t i = 0; i < g.edges_.size(); ++i) {
            const auto& e = g.edges_[i];
            auto s = node_key(e.subject);
            auto o = node_key(e.object);
            g.entity_index_[s].push_back(i);
            if (o != s) g.entity_index_[o].push_back(i);
            g.organ_index_[e.organ_scope].push_back(i);
        }
    }
    static std::vector<KgEdge>& edges(KGraph& g) { return g.edges_; }
    static std::map<std::string, std::string>& synonyms(KGraph& g) { return g.synonyms_; }
};

std::string KGraph::resolve(std::string_view entity) const {
    auto key = node_key(entity);
    if (key.empty()) return {};
    if (entity_index_.count(key)) return key;
    if (auto it = synonyms_.find(key); it != synonyms_.end() && entity_index_.count(it->second)) return it->second;
    return {};
}

const std::vector<std::size_t>& KGraph::incident(const std::string& node) const {
    auto it = entity_index_.find(node);
    return it == entity_index_.end() ? kNoEdges : it->second;
}

const std::vector<std::size_t>& KGraph::scoped(const std::string& organ_scope) const {
    auto it = organ_index_.find(organ_scope);
    return it == organ_index_.end() ? kNoEdges : it->second;
}

RetrieveResult KGraph::retrieve(const std::vector<std::string>& entities, std::string_view organ,
                                std::size_t hops) const {
    return retrieve_scoped(entities, {std::string(organ)}, hops);
}

RetrieveResult KGraph::retrieve_scoped(const std::vector<std::string>& entities,
                                       const std::vector<std::string>& organs, std::size_t hops) const {
    std::set<std::string> allowed{"general"};
    for (const auto& o : organs) allowed.insert(parse_organ_scope(o));

    RetrieveResult result;
    std::map<std::string, std::size_t> dist;
    std::deque<std::string> frontier;
    for (const auto& ent : entities) {
        auto key = resolve(ent);
        if (key.empty()) {
            result.unresolved.push_back(ent);
            continue;
        }
        if (dist.emplace(key, 0).second) {
            frontier.push_back(key);
            result.seeds.push_back(key);
        }
    }

    std::vector<char> taken(edges_.size(), 0);
    auto admitted = [&](std::size_t id) { return allowed.count(edges_[id].organ_scope) > 0; };
    while (!frontier.empty()) {
        auto node = frontier.front();
        frontier.pop_front();
        std::size_t d = dist[node];
        for (std::size_t id : incident(node)) {
            if (!admitted(id)) continue;
            taken[id] = 1;
            if (d >= hops) continue;
            for (const auto* end : {&edges_[id].subject, &edges_[id].object}) {
                auto k = node_key(*end);
                if (dist.emplace(k, d + 1).second) frontier.push_back(k);
            }
        }
    }

    for (std::size_t i = 0; i < edges_.size(); ++i)
        if (taken[i]) result.edges.push_back(edges_[i]);
    std::sort(result.edges.begin(), result.edges.end(), edge_order_less);
    return result;
}

LoadResult load_graph(const std::vector<json>& records) {
    LoadResult out;
    auto& edges = GraphBuilder::edges(out.graph);
    auto& synonyms = GraphBuilder::synonyms(out.graph);
    std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::size_t line = i + 1;
        auto malformed = [&](const std::string& why) {
            return Error("MalformedEdge", "line " + std::to_string(line) + ": " + why, {{"line", line}});
        };
        if (!r.is_object()) throw malformed("record is not an object");
        if (r.contains("alias")) {
            if (!r["alias"].is_string() || !r.contains("canonical") || !r["canonical"].is_string())
                throw malformed("alias record needs string alias and canonical");
            auto alias = node_key(r["alias"].get<std::string>());
            auto canonical = node_key(r["canonical"].get<std::string>());
            if (alias.empty() || canonical.empty()) throw malformed("empty alias or canonical");
            synonyms[alias] = canonical;
            continue;
        }
        auto field = [&](const char* name, bool required) -> std::string {
            if (!r.contains(name)) {
                if (required) throw malformed(std::string("missing field ") + name);
                return {};
            }
            if (!r[name].is_string()) throw malformed(std::string("field is not a string: ") + name);
            return text::trim(r[name].get<std::string>());
        };
        KgEdge e;
        e.subject = field("subject", true);
        e.relation = field("relation", true);
        e.object = field("object", true);
        e.source = field("source", false);
        if (e.subject.empty() || e.object.empty()) throw malformed("empty subject or object");
        if (e.relation.empty()) throw malformed("empty relation");
        try {
            e.organ_scope = parse_organ_scope(field("organ", true));
            e.tier = parse_tier(field("tier", true));
        } catch (Error& err) {
            auto details = err.details();
            details["line"] = line;
            throw Error(err.kind(), "line " + std::to_string(line) + ": " + err.what(), details);
        }
        if (!seen.emplace(e.subject, e.relation, e.object, e.organ_scope).second) {
            ++out.duplicates;
            continue;
        }
        edges.push_back(std::move(e));
    }
    GraphBuilder::index(out.graph);
    return out;
}

LoadResult load_graph(std::istream& jsonl) {
    std::vector<json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(jsonl, line)) {
        ++lineno;
        if (text::is_blank(line)) {
            records.push_back(json());  // keeps record index == line number
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("MalformedEdge", "line " + std::to_string(lineno) + ": invalid JSON", {{"line", lineno}});
        records.push_back(std::move(j));
    }
    std::vector<json> kept;
    std::vector<std::size_t> line_of;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].is_null()) continue;
        kept.push_back(std::move(records[i]));
        line_of.push_back(i + 1);
    }
    try {
        return load_graph(kept);
    } catch (const Error& e) {
        if (!e.details().contains("line")) throw;
        auto idx = e.details()["line"].get<std::size_t>() - 1;
        auto details = e.details();
        details["line"] = line_of.at(idx);
        std::string msg = e.what();
        auto colon = msg.find(": ");
        throw Error(e.kind(),
                    "line " + std::to_string(line_of.at(idx)) +
                        (colon == std::string::npos ? std::string{} : msg.substr(colon)),
                    details);
    }
}

LoadResult load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open graph file: " + path, {{"path", path}});
    return load_graph(in);
}

const KGraph& demo_graph() {
    static const KGraph g = [] {
        std::istringstream in{std::string(kDemoGraphJsonl)};
        return load_graph(in).graph;
    }();
    return g;
}

void to_json(json& j, const KgEdge& e) {
    j = {{"subject", e.subject},           {"relation", e.relation},
         {"object", e.object},             {"organ", e.organ_scope},
         {"tier", std::string(to_string(e.tier))}, {"source", e.source}};
}

std::string serialize(const KGraph& graph) {
    std::string out;
    for (const auto& e : graph.edges()) out += json(e).dump() + "\n";
    for (const auto& [alias, canonical] : graph.synonyms())
        out += json{{"alias", alias}, {"canonical", canonical}}.dump() + "\n";
    return out;
}

std::string render_context(const std::vector<KgEdge>& subgraph) {
    std::string out;
    for (const auto& e : subgraph) {
        if (!out.empty()) out += '\n';
        out += e.subject + " —" + e.relation + "→ " + e.object + " [" + std::string(to_string(e.tier)) + "]";
    }
    return out;
}

}  // namespace chaineval
