#include "chaineval/accuracy.hpp"
#include "chaineval/cli.hpp"
#include "chaineval/triplets.hpp"
#include "chaineval/volume.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace chaineval;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

const char* kScorecard = R"({"scoring": {
  "s1_finding": {"existence_match": "8/10", "completeness": "7/10", "accuracy": "9/10"},
  "s2_impression": {"clarity": "7/10", "consistency": "7/10", "medical_utility": "7/10"},
  "s3_reasoning": {"logical_completeness": "6/10", "reasoning_depth": "6/10", "clinical_relevance": "6/10",
                   "evidence_integration": "6/10"},
  "overall_score": "72/100"}})";

const char* kGtText =
    "The right hemicolon shows no wall thickening. Findings suggest localized inflammatory change. "
    "Thus, the answer is benign inflammation.";
const char* kPredText = "Colon wall looks normal. Thus, the answer is no tumor.";

CoTRecord gt_cot() {
    auto c = segment_cot(kGtText);
    c.chains = build_chains({make_triplet("Right hemicolon", "not observed", "wall thickening"),
                             make_triplet("findings", "suggests", "localized inflammatory change"),
                             make_triplet("imaging features", "consistent with", "benign inflammation")},
                            RelationLexicon::builtin());
    return c;
}

const char* kPredTriples = "(colon wall, shows, normal thickness);\n(findings, suggests, no tumor);";

/// Writes gt/pred inputs and a replay fixture answering the extractor for
/// the prediction and the scorer for the pair.
void write_score_inputs(const oracle::TempDir& dir) {
    json gt = {{"id", "s1"}, {"task", "CotReport"}, {"organ", "colon"}, {"cot", gt_cot()}};
    json pred = {{"id", "s1"}, {"model", "demo-model"}, {"text", kPredText}};
    std::ofstream(dir / "gt.jsonl") << gt.dump() << "\n";
    std::ofstream(dir / "pred.jsonl") << pred.dump() << "\n";

    auto pred_cot = segment_cot(kPredText);
    auto extract_req = make_request(AgentRole::Extractor, build_extraction_prompt(pred_cot.reconstruct()));
    pred_cot.chains = build_chains(parse_triples(kPredTriples).triples, RelationLexicon::builtin());
    auto score_req = make_request(AgentRole::Scorer, build_scoring_prompt(gt_cot(), pred_cot));
    std::ofstream fx(dir / "fixtures.jsonl");
    fx << json{{"key", cache_key(extract_req)}, {"response_text", kPredTriples}}.dump() << "\n";
    fx << json{{"key", cache_key(score_req)}, {"response_text", kScorecard}}.dump() << "\n";
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit 2") {
        auto r = run({"frobnicate"});
        CHECK(r.code == 2);
        CHECK(r.err.find("Usage") != std::string::npos);
        CHECK(run({}).code == 2);
        CHECK(run({"split"}).code == 2);
        CHECK(run({"--help"}).code == 0);
    }

    TEST_CASE("split writes 900/100") {
        oracle::TempDir dir;
        {
            std::ofstream ids(dir / "ids.txt");
            for (int i = 0; i < 1000; ++i) ids << "P" << i << "\n";
        }
        auto r = run({"split", "--ids", (dir / "ids.txt").string(), "--ratio", "0.9", "--seed", "42"});
        REQUIRE(r.code == 0);
        auto train = lines_of(slurp(dir / "train.txt"));
        auto test = lines_of(slurp(dir / "test.txt"));
        CHECK(train.size() == 900);
        CHECK(test.size() == 100);
        auto first = slurp(dir / "train.txt");
        CHECK(run({"split", "--ids", (dir / "ids.txt").string(), "--seed", "42"}).code == 0);
        CHECK(slurp(dir / "train.txt") == first);

        std::ofstream(dir / "dup.txt") << "a\na\n";
        auto d = run({"split", "--ids", (dir / "dup.txt").string()});
        CHECK(d.code == 1);
        CHECK(json::parse(d.err).at("error") == "DuplicateIds");
    }

    TEST_CASE("score-cot from replay fixtures") {
        oracle::TempDir dir;
        write_score_inputs(dir);
        auto r = run({"--replay", (dir / "fixtures.jsonl").string(), "--dry-run", "score-cot", "--gt",
                      (dir / "gt.jsonl").string(), "--pred", (dir / "pred.jsonl").string(), "--out",
                      (dir / "scores.jsonl").string(), "--summary-csv", (dir / "summary.csv").string()});
        INFO(r.err);
        REQUIRE(r.code == 0);
        auto scores = lines_of(slurp(dir / "scores.jsonl"));
        REQUIRE(scores.size() == 1);
        auto s = json::parse(scores[0]);
        CHECK(s.at("s_fc").get<double>() == doctest::Approx(80.0));
        CHECK(s.at("s_ic").get<double>() == doctest::Approx(70.0));
        CHECK(s.at("s_lrc").get<double>() == doctest::Approx(60.0));
        CHECK(s.at("model") == "demo-model");
        // 0.3 * 80 + 0.3 * 70 + 0.4 * 60 = 69
        CHECK(r.out.find("CoT_e (all samples): 69.00") != std::string::npos);
        CHECK(slurp(dir / "summary.csv").find("demo-model") != std::string::npos);

        auto again = run({"--replay", (dir / "fixtures.jsonl").string(), "score-cot", "--gt",
                          (dir / "gt.jsonl").string(), "--pred", (dir / "pred.jsonl").string(), "--out",
                          (dir / "scores2.jsonl").string()});
        CHECK(again.code == 0);
        CHECK(slurp(dir / "scores2.jsonl") == slurp(dir / "scores.jsonl"));
    }

    TEST_CASE("score-cot with an incomplete fixture reports ReplayMiss") {
        oracle::TempDir dir;
        write_score_inputs(dir);
        std::ofstream(dir / "empty.jsonl") << "";
        auto r = run({"--replay", (dir / "empty.jsonl").string(), "--dry-run", "score-cot", "--gt",
                      (dir / "gt.jsonl").string(), "--pred", (dir / "pred.jsonl").string()});
        CHECK(r.code == 1);
        CHECK(json::parse(r.err).at("error") == "ReplayMiss");
    }

    TEST_CASE("dry-run refuses non-replay backends") {
        oracle::TempDir dir;
        write_score_inputs(dir);
        std::ofstream(dir / "cfg.json") << R"({"backends": {"default": {"type": "scripted", "responses": []}}})";
        auto r = run({"--config", (dir / "cfg.json").string(), "--dry-run", "score-cot", "--gt",
                      (dir / "gt.jsonl").string(), "--pred", (dir / "pred.jsonl").string()});
        CHECK(r.code == 2);
    }

    TEST_CASE("config parsing") {
        oracle::TempDir dir;
        std::ofstream(dir / "cfg.json") << R"({"weights": {"fc": 0.2, "ic": 0.3, "lrc": 0.5}, "cache_dir": "cache",
            "parallelism": 4, "seed": 9, "engine": {"max_calibration_retries": 3}})";
        auto cfg = load_run_config(dir / "cfg.json");
        CHECK(cfg.weights.w_lrc == doctest::Approx(0.5));
        CHECK(cfg.parallelism == 4);
        CHECK(cfg.engine.max_calibration_retries == 3);
        REQUIRE(cfg.cache_dir.has_value());
        CHECK(*cfg.cache_dir == dir / "cache");
        CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"weights": {"fc": 1, "ic": 1, "lrc": 1}})")), Error);
        CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"parallelism": 0})")), Error);
    }

    TEST_CASE("engine run with scripted backends, then byte-identical replay") {
        oracle::TempDir dir;
        auto report = fixture::liver_report("CASE-1");
        {
            std::ofstream cases(dir / "cases.jsonl");
            cases << json{{"patient_id", "CASE-1"}, {"report_text", "Liver: hypodense round lesion in segment VII."},
                          {"pathology_text", "HCC"}}
                         .dump()
                  << "\n";
        }
        json cfg = {{"seed", 3},
                    {"backends",
                     {{"extractor", {{"type", "scripted"}, {"responses", {json(report).dump()}}}},
                      {"reasoner", {{"type", "scripted"}, {"responses", {fixture::reasoning(0), fixture::reasoning(1)}}}},
                      {"calibrator", {{"type", "scripted"}, {"responses", {fixture::kFail, fixture::kPass}}}},
                      {"summarizer", {{"type", "scripted"}, {"responses", {fixture::kPass}}}}}}};
        std::ofstream(dir / "cfg.json") << cfg.dump();
        auto first = run({"--config", (dir / "cfg.json").string(), "--record", (dir / "fx.jsonl").string(), "engine",
                          "run", "--cases", (dir / "cases.jsonl").string(), "--out", (dir / "out1").string()});
        INFO(first.err);
        REQUIRE(first.code == 0);
        CHECK(json::parse(first.out).at("done") == 1);
        CHECK(lines_of(slurp(dir / "out1" / "vqa.jsonl")).size() == 12);

        std::ofstream(dir / "replay.json") << json{{"seed", 3}}.dump();
        auto second = run({"--config", (dir / "replay.json").string(), "--replay", (dir / "fx.jsonl").string(),
                           "--dry-run", "engine", "run", "--cases", (dir / "cases.jsonl").string(), "--out",
                           (dir / "out2").string()});
        INFO(second.err);
        REQUIRE(second.code == 0);
        CHECK(slurp(dir / "out1" / "trace.jsonl") == slurp(dir / "out2" / "trace.jsonl"));
        CHECK(slurp(dir / "out1" / "vqa.jsonl") == slurp(dir / "out2" / "vqa.jsonl"));
        CHECK(run({"engine", "run", "--cases", (dir / "cases.jsonl").string(), "--out", (dir / "o").string()}).code == 2);
    }

    TEST_CASE("kg query against the demo graph") {
        auto r = run({"kg", "query", "--entities", "hcc", "--organ", "liver", "--hops", "0", "--format", "json"});
        REQUIRE(r.code == 0);
        auto lines = lines_of(r.out);
        CHECK_FALSE(lines.empty());
        auto bad = run({"kg", "query", "--entities", "x", "--organ", "kidney"});
        CHECK(bad.code == 1);
        CHECK(json::parse(bad.err).at("error") == "UnknownOrgan");
    }

    TEST_CASE("kg load normalizes and counts duplicates") {
        oracle::TempDir dir;
        json e = {{"subject", "a"}, {"relation", "r"}, {"object", "b"}, {"organ", "liver"}, {"tier", "A"}, {"source", ""}};
        std::ofstream(dir / "g.jsonl") << e.dump() << "\n" << e.dump() << "\n";
        auto r = run({"kg", "load", "--in", (dir / "g.jsonl").string(), "--out", (dir / "n.jsonl").string()});
        REQUIRE(r.code == 0);
        CHECK(lines_of(slurp(dir / "n.jsonl")).size() == 1);
    }

    TEST_CASE("relabel and roi") {
        oracle::TempDir dir;
        auto v = LabelVolume::zeros(6, 6, 6);
        v.at(1, 2, 3) = 20;  // colon
        v.at(4, 2, 3) = 20;
        v.at(0, 0, 0) = 27;  // a lumbar vertebra
        write_volume(v, dir / "src.raw");
        auto rl = run({"relabel", "--in", (dir / "src.raw").string(), "--out", (dir / "merged.raw").string()});
        REQUIRE(rl.code == 0);
        CHECK(read_volume(dir / "merged.raw").at(0, 0, 0) == 25);

        auto roi = run({"roi", "--in", (dir / "merged.raw").string(), "--organ", "Colon"});
        REQUIRE(roi.code == 0);
        auto j = json::parse(roi.out);
        CHECK(j.at("label") == 20);
        CHECK(j.at("bbox") == json::parse("[[1,4],[2,2],[3,3]]"));
        CHECK(j.at("voxel_count") == 2);

        auto typo = run({"roi", "--in", (dir / "merged.raw").string(), "--organ", "pancrease"});
        CHECK(typo.code == 1);
        CHECK(json::parse(typo.err).at("error") == "UnknownOrgan");
        auto missing = run({"roi", "--in", (dir / "none.raw").string(), "--organ", "liver"});
        CHECK(missing.code == 1);
    }

    TEST_CASE("iir from a script") {
        oracle::TempDir dir;
        std::ofstream(dir / "script.jsonl") << R"("The pancreas looks enlarged.")" << "\n"
                                            << R"({"response": "The liver has a lesion."})" << "\n"
                                            << R"("Nothing else.")" << "\n";
        auto r = run({"iir", "--task", "Find the tumor", "--script", (dir / "script.jsonl").string(), "--max-rounds",
                      "8", "--out", (dir / "trace.jsonl").string()});
        REQUIRE(r.code == 0);
        CHECK(lines_of(slurp(dir / "trace.jsonl")).size() == 3);
        auto summary = json::parse(r.out);
        CHECK(summary.at("visited") == json::parse(R"(["pancreas", "liver"])"));
        CHECK(summary.at("terminated") == "NoNewOrgans");
    }

    TEST_CASE("report over scores and verdicts") {
        oracle::TempDir dir;
        SampleScore s;
        s.sample_id = "a";
        s.model = "m";
        s.s_fc = 64.22;
        s.s_ic = 66.42;
        s.s_lrc = 55.09;
        std::ofstream(dir / "scores.jsonl") << json(s).dump() << "\n";
        auto r = run({"report", "--scores", (dir / "scores.jsonl").string(), "--format", "csv"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("61.23") != std::string::npos);

        Verdict v;
        v.sample_id = "x";
        v.model = "m";
        v.subtask = "organ_position";
        v.correct = true;
        std::ofstream(dir / "verdicts.jsonl") << json(v).dump() << "\n";
        auto b = run({"report", "--verdicts", (dir / "verdicts.jsonl").string()});
        REQUIRE(b.code == 0);
        CHECK(b.out.find("100.00") != std::string::npos);
    }

    TEST_CASE("eval-accuracy with multiple choice and a semantic judge") {
        oracle::TempDir dir;
        VqaRecord mc;
        mc.id = "p:liver:organ_position";
        mc.patient_id = "p";
        mc.subtask = "organ_position";
        mc.format = AnswerFormat::MultipleChoice;
        mc.question = "Which organ?";
        mc.answer_gt = "liver";
        mc.options = {"liver", "pancreas", "stomach"};
        VqaRecord oe;
        oe.id = "p:liver:shape";
        oe.patient_id = "p";
        oe.task = TaskType::LesionAttribute;
        oe.subtask = "shape";
        oe.question = "What is the shape?";
        oe.answer_gt = "round";
        std::ofstream(dir / "vqa.jsonl") << json(mc).dump() << "\n" << json(oe).dump() << "\n";
        std::ofstream(dir / "pred.jsonl") << json{{"id", mc.id}, {"model", "m"}, {"answer", "A"}}.dump() << "\n"
                                          << json{{"id", oe.id}, {"model", "m"}, {"answer", "oval"}}.dump() << "\n";
        auto req = make_request(AgentRole::SemanticJudge, build_semantic_prompt(oe.question, "round", "oval"));
        std::ofstream(dir / "fx.jsonl")
            << json{{"key", cache_key(req)}, {"response_text", "VERDICT: incorrect\nOval is not round."}}.dump() << "\n";
        auto r = run({"--replay", (dir / "fx.jsonl").string(), "eval-accuracy", "--vqa", (dir / "vqa.jsonl").string(),
                      "--pred", (dir / "pred.jsonl").string(), "--out", (dir / "verdicts.jsonl").string()});
        INFO(r.err);
        REQUIRE(r.code == 0);
        auto vs = lines_of(slurp(dir / "verdicts.jsonl"));
        REQUIRE(vs.size() == 2);
        CHECK(json::parse(vs[0]).at("correct") == true);
        CHECK(json::parse(vs[1]).at("correct") == false);
    }
}
