#include "chaineval/rubric.hpp"
#include "chaineval/text_util.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <string>

using namespace chaineval;

namespace {

// The published fragment elides s2/s3 as "{...}"; those levels are filled
// with full dimension sets so the object is valid JSON.
const char* kScorecardFragment = R"({"scoring": {
  "s1_finding": {"existence_match": "8/10", "completeness": "7/10", "accuracy": "9/10"},
  "s2_impression": {"clarity": "7/10", "consistency": "8/10", "medical_utility": "6/10"},
  "s3_reasoning": {"logical_completeness": "6/10", "reasoning_depth": "5/10", "clinical_relevance": "7/10",
                   "evidence_integration": "6/10"},
  "overall_score": "xx/100"}})";

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
    auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

SampleScore sample(double fc, double ic, double lrc, std::string model = "m", std::string task = "t",
                   std::string organ = "liver") {
    SampleScore s;
    s.sample_id = "x";
    s.model = std::move(model);
    s.task = std::move(task);
    s.organ = std::move(organ);
    s.s_fc = fc;
    s.s_ic = ic;
    s.s_lrc = lrc;
    return s;
}

Scorecard random_card(std::mt19937_64& rng) {
    Scorecard c;
    for (auto level : kAllLevels)
        for (const auto& d : rubric_for(level).dimensions)
            c.dims[level].push_back({d.name, static_cast<int>(rng() % 11)});
    if (rng() % 2) c.judge_overall_raw = static_cast<int>(rng() % 101);
    return c;
}

}  // namespace

TEST_SUITE("rubric_scoring") {
    TEST_CASE("rubric shapes") {
        CHECK(rubric_for(ChainLevel::FC).dimensions.size() == 3);
        CHECK(rubric_for(ChainLevel::FC).dimensions[0].name == "existence_match");
        const auto& lrc = rubric_for(ChainLevel::LRC);
        CHECK(lrc.dimensions.size() == 4);
        CHECK(lrc.find("evidence_integration") != nullptr);
    }

    TEST_CASE("every band set partitions 0..10") {
        for (auto level : kAllLevels) {
            for (const auto& dim : rubric_for(level).dimensions) {
                std::multiset<int> seen;
                for (const auto& band : dim.bands) seen.insert(band.scores.begin(), band.scores.end());
                CHECK(seen.size() == 11);
                for (int v = 0; v <= 10; ++v) CHECK(seen.count(v) == 1);
            }
        }
    }

    TEST_CASE("scorecard fragment parses") {
        auto card = parse_scorecard(kScorecardFragment);
        const auto& fc = card.dims.at(ChainLevel::FC);
        REQUIRE(fc.size() == 3);
        CHECK(fc[0] == DimScore{"existence_match", 8});
        CHECK(fc[1] == DimScore{"completeness", 7});
        CHECK(fc[2] == DimScore{"accuracy", 9});
        CHECK_FALSE(card.judge_overall_raw.has_value());
        CHECK(chain_score(fc) == doctest::Approx(80.00));
    }

    TEST_CASE("scorecard parsing errors") {
        auto kind_of = [](const std::string& text) {
            try {
                parse_scorecard(text);
            } catch (const Error& e) {
                return e.kind();
            }
            return std::string("none");
        };
        CHECK(kind_of(replace_once(kScorecardFragment, R"("completeness": "7/10", )", "")) == "SchemaError");
        CHECK(kind_of(replace_once(kScorecardFragment, R"("8/10")", R"("11/10")")) == "RangeError");
        CHECK(kind_of(replace_once(kScorecardFragment, R"("8/10")", R"("4/5")")) == "FormatError");
        CHECK(kind_of("no json here") == "NoJsonFound");
        CHECK(kind_of(R"({"other": 1})") == "SchemaError");
    }

    TEST_CASE("all zero is valid") {
        Scorecard c;
        for (auto level : kAllLevels)
            for (const auto& d : rubric_for(level).dimensions) c.dims[level].push_back({d.name, 0});
        auto back = parse_scorecard(render_scorecard(c));
        for (auto level : kAllLevels) {
            for (const auto& d : back.dims.at(level)) CHECK(d.value == 0);
            CHECK(chain_score(back.dims.at(level)) == 0.0);
        }
    }

    TEST_CASE("judge prose around the object is tolerated") {
        auto card = parse_scorecard(std::string("Here is my assessment:\n```json\n") + kScorecardFragment + "\n```");
        CHECK(card.dims.at(ChainLevel::FC)[0].value == 8);
    }

    TEST_CASE("render/parse round trip") {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 500; ++i) {
            auto c = random_card(rng);
            CHECK(parse_scorecard(render_scorecard(c)) == c);
        }
    }

    TEST_CASE("chain_score arithmetic") {
        CHECK(chain_score({{"existence_match", 10}, {"completeness", 10}, {"accuracy", 10}}) == 100.0);
        CHECK(chain_score({{"existence_match", 0}, {"completeness", 0}, {"accuracy", 0}}) == 0.0);
        CHECK(chain_score({{"existence_match", 8}, {"completeness", 7}, {"accuracy", 9}},
                          {{"accuracy", 2.0}}) == doctest::Approx(82.5));
        CHECK_THROWS_AS(chain_score({{"existence_match", 8}}), Error);
    }

    TEST_CASE("chain_score is monotone") {
        std::mt19937_64 rng(8);
        for (int i = 0; i < 500; ++i) {
            auto level = kAllLevels[rng() % 3];
            std::vector<DimScore> dims;
            for (const auto& d : rubric_for(level).dimensions) dims.push_back({d.name, static_cast<int>(rng() % 11)});
            auto base = chain_score(dims);
            auto k = rng() % dims.size();
            if (dims[k].value == 10) continue;
            ++dims[k].value;
            CHECK(chain_score(dims) >= base);
        }
    }

    TEST_CASE("cot_e reproduces the published rows against the integer oracle") {
        struct Row {
            long long fc, ic, lrc;
            double printed;
        };
        const Row rows[] = {{6422, 6642, 5509, 61.23}, {6310, 5769, 4512, 54.28}, {5931, 4366, 3080, 43.21},
                            {4915, 2289, 1209, 26.45}};
        for (const auto& r : rows) {
            auto v = cot_e({sample(r.fc / 100.0, r.ic / 100.0, r.lrc / 100.0)});
            auto milli = oracle::cot_e_milli(r.fc, r.ic, r.lrc);
            CHECK(v == doctest::Approx(static_cast<double>(milli) / 1000.0).epsilon(1e-12));
            CHECK(oracle::round_milli_to_cents(milli) == std::llround(r.printed * 100));
            CHECK(text::round_half_even(v, 2) == doctest::Approx(r.printed));
        }
    }

    TEST_CASE("known discrepancy in the published 7B row") {
        auto v = cot_e({sample(62.37, 62.60, 52.57)});
        CHECK(text::format_2dp(v) == "58.52");
        CHECK(text::format_2dp(v) != "58.33");
    }

    TEST_CASE("degenerate weights pick one level") {
        std::vector<SampleScore> s = {sample(10, 20, 30), sample(50, 60, 70)};
        CHECK(cot_e(s, {1, 0, 0}) == doctest::Approx(30.0));
        CHECK(cot_e(s, {0, 0, 1}) == doctest::Approx(50.0));
        CHECK_THROWS_AS(cot_e({}, {}), Error);
        CHECK_THROWS_AS((Weights{0.5, 0.5, 0.5}.validate()), Error);
    }

    TEST_CASE("cot_e properties: convexity, permutation invariance, linearity") {
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        for (int i = 0; i < 300; ++i) {
            std::vector<SampleScore> s;
            for (int k = 1 + static_cast<int>(rng() % 10); k > 0; --k) s.push_back(sample(u(rng), u(rng), u(rng)));
            double mf = 0, mi = 0, ml = 0;
            for (const auto& x : s) mf += x.s_fc, mi += x.s_ic, ml += x.s_lrc;
            mf /= s.size(), mi /= s.size(), ml /= s.size();
            auto v = cot_e(s);
            CHECK(v >= std::min({mf, mi, ml}) - 1e-9);
            CHECK(v <= std::max({mf, mi, ml}) + 1e-9);

            auto shuffled = s;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            CHECK(cot_e(shuffled) == doctest::Approx(v).epsilon(1e-12));

            double c = 0.25 + (rng() % 100) / 100.0;
            auto scaled = s;
            for (auto& x : scaled) x.s_fc *= c, x.s_ic *= c, x.s_lrc *= c;
            CHECK(cot_e(scaled) == doctest::Approx(c * v).epsilon(1e-9));
        }
    }

    TEST_CASE("aggregate_corpus") {
        auto rep = aggregate_corpus({sample(60, 60, 60), sample(80, 80, 80)});
        REQUIRE(rep.rows.size() == 1);
        CHECK(rep.rows[0].n == 2);
        CHECK(rep.rows[0].s_fc == doctest::Approx(70.0));
        CHECK(rep.rows[0].cot_e == doctest::Approx(70.0));

        auto gem = aggregate_corpus({sample(63.10, 57.69, 45.12, "gemini")});
        CHECK(text::format_2dp(gem.rows[0].cot_e) == "54.28");

        auto noted = aggregate_corpus({sample(60, 60, 60)}, {}, {GroupKey{"absent", "t", "liver"}});
        CHECK(noted.rows.size() == 1);
        REQUIRE(noted.notes.size() == 1);
        CHECK(noted.notes[0].find("absent") != std::string::npos);
        CHECK(rep.to_csv().find("70.00") != std::string::npos);
    }

    TEST_CASE("score_sample recomputes chain scores and keeps the judge total aside") {
        auto card = parse_scorecard(replace_once(kScorecardFragment, "xx/100", "95/100"));
        auto s = score_sample("id1", card);
        CHECK(s.s_fc == doctest::Approx(80.0));
        CHECK(s.s_ic == doctest::Approx(70.0));
        CHECK(s.s_lrc == doctest::Approx(60.0));
        CHECK(s.judge_overall_raw == 95);
        nlohmann::json j = s;
        auto back = j.get<SampleScore>();
        CHECK(back.s_lrc == doctest::Approx(60.0));
    }

    TEST_CASE("scoring prompt") {
        CoTRecord gt = segment_cot("Lesion seen. Thus, the answer is HCC.");
        gt.chains = build_chains({make_triplet("liver", "shows", "lesion")}, RelationLexicon::builtin());
        CoTRecord pred = gt;
        auto p = build_scoring_prompt(gt, pred);
        CHECK(p.find("s1_finding") != std::string::npos);
        CHECK(p == build_scoring_prompt(gt, pred));
        CoTRecord empty = segment_cot("x. Thus, the answer is y.");
        try {
            build_scoring_prompt(gt, empty);
            FAIL("expected MissingTriples");
        } catch (const Error& e) {
            CHECK(e.kind() == "MissingTriples");
        }
    }
}
