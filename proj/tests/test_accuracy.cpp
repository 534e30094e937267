#include "chaineval/accuracy.hpp"
#include "chaineval/text_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>

using namespace chaineval;

namespace {

Verdict verdict(bool correct, std::string model = "m", std::string subtask = "shape") {
    Verdict v;
    v.sample_id = "s";
    v.correct = correct;
    v.model = std::move(model);
    v.subtask = std::move(subtask);
    return v;
}

}  // namespace

TEST_SUITE("accuracy_eval") {
    const std::vector<std::string> options = {"pancreatic head", "pancreatic tail", "liver", "stomach"};

    TEST_CASE("bare label and labelled text") {
        CHECK(match_choice("B", "B", options).correct);
        CHECK(match_choice("b) pancreatic tail", "pancreatic tail", options).correct);
        CHECK_FALSE(match_choice("A", "pancreatic tail", options).correct);
    }

    TEST_CASE("prediction naming two options is ambiguous") {
        CHECK_THROWS_WITH_AS(resolve_option("either liver or stomach", options), doctest::Contains("option"), Error);
        try {
            match_choice("liver or stomach", "liver", options);
            FAIL("expected AmbiguousPrediction");
        } catch (const Error& e) {
            CHECK(e.kind() == "AmbiguousPrediction");
        }
    }

    TEST_CASE("normalize_answer is idempotent") {
        std::mt19937_64 rng(4);
        const std::string alphabet = "AbC d,.;:!?()-_ 12 e";
        for (int i = 0; i < 500; ++i) {
            std::string s;
            for (int k = static_cast<int>(rng() % 24); k > 0; --k) s += alphabet[rng() % alphabet.size()];
            auto once = normalize_answer(s);
            CHECK(normalize_answer(once) == once);
        }
    }

    TEST_CASE("semantic prompt") {
        auto p = build_semantic_prompt("Where is the lesion?", "pancreatic tail", "tail of pancreas");
        CHECK(p.find("VERDICT:") != std::string::npos);
        CHECK(p.find("pancreatic tail") != std::string::npos);
        CHECK(p.find("tail of pancreas") != std::string::npos);
        CHECK(p == build_semantic_prompt("Where is the lesion?", "pancreatic tail", "tail of pancreas"));
        CHECK_THROWS_AS(build_semantic_prompt("q", "", "p"), Error);
    }

    TEST_CASE("parse_verdict") {
        auto v = parse_verdict("VERDICT: correct\nSame lesion location.");
        CHECK(v.correct);
        CHECK(v.rationale == "Same lesion location.");
        CHECK_FALSE(parse_verdict("VERDICT: incorrect wrong segment").correct);
        try {
            parse_verdict("maybe");
            FAIL("expected NoVerdictLine");
        } catch (const Error& e) {
            CHECK(e.kind() == "NoVerdictLine");
        }
    }

    TEST_CASE("aggregate_accuracy basics") {
        auto t = aggregate_accuracy({verdict(true), verdict(false), verdict(true), verdict(false)}, {GroupField::Model});
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0].accuracy == doctest::Approx(50.0));
        CHECK(t.to_csv().find("50.00") != std::string::npos);

        auto noted = aggregate_accuracy({verdict(true)}, {GroupField::Model}, {{{"model", "ghost"}}});
        CHECK(noted.rows.size() == 1);
        CHECK(noted.notes.size() == 1);
    }

    TEST_CASE("accuracy properties") {
        std::mt19937_64 rng(6);
        for (int i = 0; i < 300; ++i) {
            std::vector<Verdict> vs;
            for (int k = 1 + static_cast<int>(rng() % 20); k > 0; --k)
                vs.push_back(verdict(rng() % 2, "m" + std::to_string(rng() % 2)));
            auto base = aggregate_accuracy(vs, {GroupField::Model});
            for (const auto& r : base.rows) {
                CHECK(r.accuracy >= 0.0);
                CHECK(r.accuracy <= 100.0);
            }
            auto perm = vs;
            std::shuffle(perm.begin(), perm.end(), rng);
            auto again = aggregate_accuracy(perm, {GroupField::Model});
            REQUIRE(again.rows.size() == base.rows.size());
            for (std::size_t k = 0; k < base.rows.size(); ++k)
                CHECK(again.rows[k].accuracy == doctest::Approx(base.rows[k].accuracy));

            auto more = vs;
            more.push_back(verdict(true, vs[0].model));
            auto grown = aggregate_accuracy(more, {GroupField::Model});
            for (std::size_t k = 0; k < base.rows.size(); ++k)
                if (grown.rows[k].key == base.rows[k].key) CHECK(grown.rows[k].accuracy >= base.rows[k].accuracy - 1e-12);
        }
    }

    TEST_CASE("block means follow an unweighted subtask mean") {
        auto row = benchmark_row("model-a", {{"organ_position", 99.97}, {"tumor_position", 97.57}});
        CHECK(text::format_2dp(row.block_mean.at("Position")) == "98.77");
        CHECK(benchmark_columns().size() == 12);
    }

    TEST_CASE("benchmark average over twelve subtasks") {
        std::map<std::string, double> acc;
        for (const auto& c : benchmark_columns()) acc[c.subtask] = 50.0;
        acc[benchmark_columns()[0].subtask] = 62.0;
        auto row = benchmark_row("m", acc);
        REQUIRE(row.average.has_value());
        CHECK(*row.average == doctest::Approx(51.0));
    }

    TEST_CASE("verdict JSON round trip") {
        auto v = verdict(true);
        v.organ = "liver";
        nlohmann::json j = v;
        auto back = j.get<Verdict>();
        CHECK(back.correct);
        CHECK(back.organ == "liver");
    }
}
