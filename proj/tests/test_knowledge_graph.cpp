#include "chaineval/knowledge_graph.hpp"
#include "chaineval/text_util.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace chaineval;
using nlohmann::json;

namespace {

json edge(const std::string& s, const std::string& r, const std::string& o, const std::string& organ = "liver",
          const std::string& tier = "A") {
    return {{"subject", s}, {"relation", r}, {"object", o}, {"organ", organ}, {"tier", tier}, {"source", "test"}};
}

std::string kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return "none";
}

struct RandomGraph {
    std::vector<json> records;
    std::vector<oracle::ToyEdge> toy;  // aligned with the deduplicated edge list
};

RandomGraph random_graph(std::mt19937_64& rng, std::size_t n_edges, std::size_t n_nodes) {
    static const char* scopes[] = {"liver", "pancreas", "stomach", "colon", "esophagus", "general"};
    static const char* tiers[] = {"A", "B", "C"};
    RandomGraph g;
    std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
    for (std::size_t i = 0; i < n_edges; ++i) {
        auto s = "n" + std::to_string(rng() % n_nodes);
        auto o = "n" + std::to_string(rng() % n_nodes);
        auto r = "r" + std::to_string(rng() % 4);
        std::string scope = scopes[rng() % 6];
        g.records.push_back(edge(s, r, o, scope, tiers[rng() % 3]));
        if (seen.emplace(s, r, o, scope).second) g.toy.push_back({s, r, o, scope});
    }
    return g;
}

std::set<std::tuple<std::string, std::string, std::string, std::string>> as_set(const std::vector<KgEdge>& es) {
    std::set<std::tuple<std::string, std::string, std::string, std::string>> out;
    for (const auto& e : es) out.emplace(e.subject, e.relation, e.object, e.organ_scope);
    return out;
}

}  // namespace

TEST_SUITE("knowledge_graph") {
    TEST_CASE("load deduplicates exact duplicates") {
        auto res = load_graph(std::vector<json>{edge("a", "r", "b"), edge("a", "r", "b"), edge("b", "r", "c")});
        CHECK(res.graph.size() == 2);
        CHECK(res.duplicates == 1);
    }

    TEST_CASE("load errors") {
        CHECK(kind_of([] { load_graph(std::vector<json>{edge("a", "r", "b", "liver", "D")}); }) == "UnknownTier");
        CHECK(kind_of([] { load_graph(std::vector<json>{edge("a", "r", "b", "kidney")}); }) == "UnknownOrgan");
        CHECK(kind_of([] { load_graph(std::vector<json>{edge("", "r", "b")}); }) == "MalformedEdge");
        std::istringstream in(edge("a", "r", "b").dump() + "\n\n{\"subject\": \"x\"}\n");
        try {
            load_graph(in);
            FAIL("expected MalformedEdge");
        } catch (const Error& e) {
            CHECK(e.kind() == "MalformedEdge");
            CHECK(e.details().at("line") == 3);
        }
    }

    TEST_CASE("empty source is an empty valid graph") {
        auto res = load_graph(std::vector<json>{});
        CHECK(res.graph.empty());
        CHECK(res.graph.retrieve({"a"}, "liver").edges.empty());
    }

    TEST_CASE("toy chain a-b-c") {
        auto g = load_graph(std::vector<json>{edge("a", "to", "b"), edge("b", "to", "c")}).graph;
        auto h0 = g.retrieve({"a"}, "liver", 0);
        REQUIRE(h0.edges.size() == 1);
        CHECK(h0.edges[0].object == "b");
        CHECK(g.retrieve({"a"}, "liver", 1).edges.size() == 2);
        CHECK(g.retrieve({}, "liver", 3).edges.empty());
    }

    TEST_CASE("aliases resolve to the canonical node") {
        auto g = load_graph(std::vector<json>{edge("hepatocellular carcinoma", "shows", "washout"),
                                              edge("hepatocellular carcinoma", "arises in", "cirrhosis"),
                                              edge("cyst", "shows", "no enhancement"),
                                              {{"alias", "HCC"}, {"canonical", "hepatocellular carcinoma"}}})
                     .graph;
        auto r = g.retrieve({"hcc", "unknown thing"}, "liver", 0);
        CHECK(r.edges.size() == 2);
        CHECK(r.seeds == std::vector<std::string>{"hepatocellular carcinoma"});
        CHECK(r.unresolved == std::vector<std::string>{"unknown thing"});
    }

    TEST_CASE("organ scoping always admits general edges") {
        auto g = load_graph(std::vector<json>{edge("node", "r", "x", "liver"), edge("node", "r", "y", "pancreas"),
                                              edge("node", "r", "z", "general")})
                     .graph;
        for (std::string organ : {"liver", "pancreas", "stomach", "colon", "esophagus"}) {
            auto r = g.retrieve({"node"}, organ, 0);
            bool has_general = std::any_of(r.edges.begin(), r.edges.end(),
                                           [](const KgEdge& e) { return e.organ_scope == "general"; });
            CHECK(has_general);
            for (const auto& e : r.edges) CHECK((e.organ_scope == organ || e.organ_scope == "general"));
        }
    }

    TEST_CASE("retrieval order is tier then lexicographic") {
        auto g = load_graph(std::vector<json>{edge("a", "r", "z", "liver", "C"), edge("a", "r", "y", "liver", "A"),
                                              edge("a", "q", "x", "liver", "B"), edge("a", "p", "w", "liver", "A")})
                     .graph;
        auto r = g.retrieve({"a"}, "liver", 0).edges;
        REQUIRE(r.size() == 4);
        CHECK(r[0].object == "w");
        CHECK(r[1].object == "y");
        CHECK(r[2].object == "x");
        CHECK(r[3].object == "z");
        CHECK(std::is_sorted(r.begin(), r.end(), edge_order_less));
    }

    TEST_CASE("retrieve matches the relaxation oracle and is monotone in hops") {
        std::mt19937_64 rng(314);
        const char* organs[] = {"liver", "pancreas", "stomach", "colon", "esophagus"};
        for (int trial = 0; trial < 60; ++trial) {
            auto n_edges = 1 + rng() % 1000;
            auto n_nodes = 2 + rng() % 400;
            auto rg = random_graph(rng, n_edges, n_nodes);
            auto g = load_graph(rg.records).graph;
            REQUIRE(g.size() == rg.toy.size());

            std::vector<std::string> seeds;
            std::set<std::string> seed_set;
            for (int k = 1 + static_cast<int>(rng() % 3); k > 0; --k) {
                auto s = "n" + std::to_string(rng() % n_nodes);
                seeds.push_back(s);
                seed_set.insert(s);
            }
            std::string organ = organs[rng() % 5];
            std::set<std::tuple<std::string, std::string, std::string, std::string>> prev;
            for (std::size_t hops = 0; hops <= 3; ++hops) {
                auto got = as_set(g.retrieve(seeds, organ, hops).edges);
                auto want_idx = oracle::khop_edges(rg.toy, seed_set, {organ, "general"}, hops);
                std::set<std::tuple<std::string, std::string, std::string, std::string>> want;
                for (auto i : want_idx) want.emplace(rg.toy[i].s, rg.toy[i].r, rg.toy[i].o, rg.toy[i].scope);
                CHECK(got == want);
                CHECK(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
                prev = got;
            }
        }
    }

    TEST_CASE("load(serialize(G)) == G") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            auto rg = random_graph(rng, 1 + rng() % 200, 50);
            rg.records.push_back({{"alias", "Alias " + std::to_string(trial)}, {"canonical", "n1"}});
            auto g = load_graph(rg.records).graph;
            std::istringstream in(serialize(g));
            CHECK(load_graph(in).graph == g);
        }
        const auto& demo = demo_graph();
        std::istringstream in(serialize(demo));
        CHECK(load_graph(in).graph == demo);
    }

    TEST_CASE("demo graph covers every organ") {
        const auto& g = demo_graph();
        for (std::string organ : {"liver", "pancreas", "stomach", "colon", "esophagus"})
            CHECK(g.scoped(organ).size() >= 45);
        CHECK(g.scoped("general").size() >= 1);
        CHECK_FALSE(g.resolve("HCC").empty());
    }

    TEST_CASE("render_context") {
        CHECK(render_context({}).empty());
        auto g = load_graph(std::vector<json>{edge("a", "r", "b", "liver", "B"), edge("a", "s", "c", "liver", "A")})
                     .graph;
        auto sub = g.retrieve({"a"}, "liver", 0).edges;
        auto text = render_context(sub);
        CHECK(text == "a \xE2\x80\x94s\xE2\x86\x92 c [A]\na \xE2\x80\x94r\xE2\x86\x92 b [B]");
        CHECK(render_context(sub) == text);
    }
}
