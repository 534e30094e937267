#pragma once

#include "chaineval/error.hpp"

#include <json.hpp>

#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval {

enum class Tier { A, B, C };

std::string_view to_string(Tier tier);
/// Throws Error("UnknownTier").
Tier parse_tier(std::string_view s);

/// "liver", "pancreas", "stomach", "colon", "esophagus" or "general".
/// Throws Error("UnknownOrgan").
std::string parse_organ_scope(std::string_view s);

struct KgEdge {
    std::string subject;
    std::string relation;
    std::string object;
    std::string organ_scope;
    Tier tier = Tier::A;
    std::string source;

    friend bool operator==(const KgEdge&, const KgEdge&) = default;
};

/// Retrieval order: tier, then subject, relation, object, organ scope.
bool edge_order_less(const KgEdge& a, const KgEdge& b);

struct RetrieveResult {
    std::vector<KgEdge> edges;
    std::vector<std::string> seeds;       // canonical node keys actually used
    std::vector<std::string> unresolved;  // inputs with no node in the graph
};

/// Immutable after load; safe for concurrent readers.
class KGraph {
public:
    KGraph() = default;

    const std::vector<KgEdge>& edges() const { return edges_; }
    const std::map<std::string, std::string>& synonyms() const { return synonyms_; }
    std::size_t size() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }

    /// Node key for an entity or alias (normalized), or "" when unknown.
    std::string resolve(std::string_view entity) const;
    /// Edge ids incident to a node key.
    const std::vector<std::size_t>& incident(const std::string& node) const;
    /// Edge ids scoped to an organ (or "general").
    const std::vector<std::size_t>& scoped(const std::string& organ_scope) const;

    /// Edges within `hops` undirected hops of any seed, restricted to edges
    /// scoped to `organ` or "general". hops = 0 yields edges incident to the
    /// seeds; hops = k yields edges incident to any node at distance <= k.
    RetrieveResult retrieve(const std::vector<std::string>& entities, std::string_view organ,
                            std::size_t hops = 1) const;

    /// Same, with several organ scopes admitted at once.
    RetrieveResult retrieve_scoped(const std::vector<std::string>& entities, const std::vector<std::string>& organs,
                                   std::size_t hops = 1) const;

    friend bool operator==(const KGraph& a, const KGraph& b) {
        return a.edges_ == b.edges_ && a.synonyms_ == b.synonyms_;
    }

private:
    friend struct GraphBuilder;

    std::vector<KgEdge> edges_;
    std::map<std::string, std::string> synonyms_;  // normalized alias -> canonical node key
    std::map<std::string, std::vector<std::size_t>> entity_index_;
    std::map<std::string, std::vector<std::size_t>> organ_index_;
};

struct LoadResult {
    KGraph graph;
    std::size_t duplicates = 0;
};

/// Records are edges {subject, relation, object, organ, tier, source} or
/// aliases {alias, canonical}. `line` numbers in MalformedEdge are 1-based
/// record positions. Errors: MalformedEdge, UnknownOrgan, UnknownTier.
LoadResult load_graph(const std::vector<nlohmann::json>& records);
LoadResult load_graph(std::istream& jsonl);
LoadResult load_graph_file(const std::string& path);

/// Bundled demonstration graph (about fifty edges per organ).
const KGraph& demo_graph();

/// JSONL: edges in graph order, then aliases sorted.
std::string serialize(const KGraph& graph);

/// One line per edge (subject, arrowed relation, object, bracketed tier), in
/// the given order.
std::string render_context(const std::vector<KgEdge>& subgraph);

void to_json(nlohmann::json& j, const KgEdge& e);

}  // namespace chaineval
