#include "chaineval/rubric.hpp"

#include "chaineval/text_util.hpp"
#include "chaineval/triplets.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

namespace chaineval {

namespace {

DimensionSpec dim(std::string name, std::string display, std::string description,
                  std::array<std::string, 6> criteria) {
    static const std::vector<int> band_scores[6] = {{10}, {8, 9}, {6, 7}, {4, 5}, {1, 2, 3}, {0}};
    DimensionSpec spec{std::move(name), std::move(display), std::move(description), {}};
    for (std::size_t i = 0; i < 6; ++i) spec.bands[i] = ScoreBand{band_scores[i], std::move(criteria[i])};
    return spec;
}

Rubric make_fc() {
    return {ChainLevel::FC,
            {dim("existence_match", "Existence Match",
                 "Degree to which predicted facts match the ground-truth (GT) facts.",
                 {"Prediction contains all key GT facts with no omission or redundancy.",
                  "Prediction covers the vast majority of GT facts, with only minor omissions or redundancies "
                  "(<10%).",
                  "Prediction covers some GT facts but exhibits moderate omissions or redundancies (10–30%).",
                  "Prediction covers only a small portion of GT facts; substantial omissions or redundancies "
                  "(30–50%).",
                  "Low match rate; only a few facts are correct and the error rate is very high.",
                  "Prediction includes none of the GT facts."}),
             dim("completeness", "Completeness",
                 "Extent to which key facts are fully expressed without missing or spurious content.",
                 {"Prediction covers 100% of GT facts with no omissions.",
                  "Only minor omissions (<10%), high coverage.",
                  "Noticeable omissions (10–30%), coverage is moderately compromised.",
                  "Majority of key facts are missing (30–50%), poor coverage.",
                  "Extensive omissions (>50%), very low coverage.",
                  "Prediction fails to cover any key facts."}),
             dim("accuracy", "Accuracy", "Correctness of factual statements in the prediction.",
                 {"All predicted entries are accurate with no invalid or incorrect statements.",
                  "Vast majority accurate (<10% problematic), only minor issues.",
                  "Moderate errors or invalid entries (10–30%) that negatively affect overall quality.",
                  "Numerous erroneous entries (>30%), only a small fraction correct.",
                  "Very few accurate entries (>50% error rate).",
                  "All predictions are invalid; no correct entries."})}};
}

Rubric make_ic() {
    return {ChainLevel::IC,
            {dim("clarity", "Clarity", "Medical clarity of the impression statement.",
                 {"Impression is completely clear, logically coherent, and unambiguous.",
                  "Description is clear with only minor incomplete expressions or slight ambiguity (<10%).",
                  "Basically clear but contains some ambiguities that moderately hinder understanding.",
                  "Blurry description with numerous ambiguities significantly affecting medical interpretation.",
                  "Very difficult to understand; almost unusable due to severe ambiguity.",
                  "Impression chain is empty or entirely invalid and unclear."}),
             dim("consistency", "Consistency",
                 "Logical consistency of the impression with the underlying FINDING chain.",
                 {"Fully consistent with the factual chain; all impressions are derived from facts with no "
                  "unreasonable content.",
                  "Overall consistent with only minor (<10%) deviations from the factual chain.",
                  "Partially inconsistent with the factual chain, showing moderate deviation (10–30%).",
                  "Large proportion of content inconsistent with or weakly related to the factual chain "
                  "(30–50%).",
                  "Impression content is mostly illogical and unrelated to the factual chain.",
                  "Impression is entirely invalid or completely contradicts the factual chain."}),
             dim("medical_utility", "Medical Utility",
                 "Clinical usefulness of the impression for diagnosis and decision-making.",
                 {"Impression chain is highly useful, directly supporting diagnosis and clinical decision-making "
                  "with no additional input needed.",
                  "High clinical utility; most content is medically meaningful with only minor adjustments "
                  "required.",
                  "Partial diagnostic value but considerable portions lack utility or have vague meaning "
                  "(10–30%).",
                  "Very limited clinical utility (>50% of content lacks diagnostic value).",
                  "Impression provides almost no diagnostic significance or is largely incorrect.",
                  "Impression chain is invalid or contains no medically meaningful statements."})}};
}

Rubric make_lrc() {
    return {ChainLevel::LRC,
            {dim("logical_completeness", "Logical Completeness",
                 "Logical closure and completeness of higher-order reasoning.",
                 {"The reasoning chain perfectly covers all key points, with no logical gaps or omissions.",
                  "Reasoning is largely complete, with only minor (<10%) logical gaps or omitted details.",
                  "Some logical interruptions or omissions exist, but most reasoning paths remain valid "
                  "(10–30%).",
                  "Significant logical gaps, missing many key points, and notable interruptions in reasoning "
                  "(30–50%).",
                  "Most of the reasoning chain is invalid; significant logical flaws, key derivations "
                  "incomplete.",
                  "No reasoning process or the reasoning chain completely fails."}),
             dim("reasoning_depth", "Reasoning Depth",
                 "Whether the reasoning depth reflects cross-entity and hierarchical associations.",
                 {"Reasoning demonstrates highly complex hierarchical relationships and deep cross-entity "
                  "connections.",
                  "Reasoning shows moderate depth; most steps are reasonable with minor (<10%) missing "
                  "complexity.",
                  "Reasoning depth is insufficient; logical chains are relatively shallow, capturing only "
                  "surface-level inference (10–30% missing depth).",
                  "Reasoning lacks depth, limited to single-layer derivations or simple restatements of facts.",
                  "Reasoning is very superficial; most content invalid or lacks analytical depth.",
                  "Reasoning chain has no depth; no higher-order inference."}),
             dim("clinical_relevance", "Clinical Relevance",
                 "Whether the reasoning contributes to diagnosis and aligns with medical context.",
                 {"Reasoning fully aligns with medical context and is highly relevant and practical.",
                  "Most reasoning is medically meaningful; only minor content is irrelevant (<10%).",
                  "Some reasoning entries are meaningful, but overall relevance is limited (10–30% invalid "
                  "content).",
                  "Majority of content lacks medical significance; only a few entries provide support (>30% "
                  "clinically irrelevant).",
                  "Reasoning is almost clinically useless; content shows deviation from medical background.",
                  "Reasoning chain is entirely meaningless or invalid."}),
             dim("evidence_integration", "Evidence Integration",
                 "Whether multiple findings and cues are integrated reasonably.",
                 {"Reasoning seamlessly integrates all evidence from finding/impression chains, supporting "
                  "conclusions.",
                  "Most evidence is integrated, with minor (<10%) gaps or weak concentration.",
                  "Partial integration; some information not adopted or weakly related (10–30%).",
                  "Integration is poor; reasoning is limited to single evidence items (>30% weak integration).",
                  "Integration is largely insufficient; evidence shows no clear relation.",
                  "Reasoning completely detached from evidence; no integration or logical coherence."})}};
}

std::string band_label(const ScoreBand& band) {
    if (band.scores.size() == 1) return std::to_string(band.scores.front());
    return std::to_string(band.scores.front()) + "-" + std::to_string(band.scores.back());
}

std::string chain_level_title(ChainLevel level) {
    switch (level) {
        case ChainLevel::FC: return "Finding Chain (FC)";
        case ChainLevel::IC: return "Impression Chain (IC)";
        case ChainLevel::LRC: return "Long Reasoning Chain (LRC)";
    }
    return "";
}

std::string dimension_key(std::string_view raw) {
    std::string key;
    for (char c : text::to_lower(text::trim_view(raw))) key.push_back(c == ' ' || c == '-' ? '_' : c);
    return key;
}

struct Fraction {
    int numerator;
    int denominator;
};

std::optional<Fraction> parse_fraction(const nlohmann::json& value) {
    if (!value.is_string()) return std::nullopt;
    static const std::regex pattern(R"(^\s*(-?\d{1,6})\s*/\s*(\d{1,6})\s*$)");
    std::smatch m;
    const auto& s = value.get_ref<const std::string&>();
    if (!std::regex_match(s, m, pattern)) return std::nullopt;
    return Fraction{std::stoi(m[1].str()), std::stoi(m[2].str())};
}

double sorted_sum(std::vector<double> values) {
    // Summing in sorted order makes the result independent of input order.
    std::sort(values.begin(), values.end());
    return std::accumulate(values.begin(), values.end(), 0.0);
}

const Rubric* rubric_matching(const std::vector<DimScore>& dims) {
    std::set<std::string> names;
    for (const auto& d : dims) names.insert(d.dimension);
    if (names.size() != dims.size()) return nullptr;
    for (auto level : kAllLevels) {
        const auto& rubric = rubric_for(level);
        std::set<std::string> expected;
        for (const auto& spec : rubric.dimensions) expected.insert(spec.name);
        if (expected == names) return &rubric;
    }
    return nullptr;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const DimensionSpec* Rubric::find(std::string_view dimension) const {
    for (const auto& d : dimensions) {
        if (d.name == dimension) return &d;
    }
    return nullptr;
}

const Rubric& rubric_for(ChainLevel level) {
    static const Rubric fc = make_fc();
    static const Rubric ic = make_ic();
    static const Rubric lrc = make_lrc();
    switch (level) {
        case ChainLevel::FC: return fc;
        case ChainLevel::IC: return ic;
        case ChainLevel::LRC: return lrc;
    }
    return fc;
}

std::string_view scorecard_key(ChainLevel level) {
    switch (level) {
        case ChainLevel::FC: return "s1_finding";
        case ChainLevel::IC: return "s2_impression";
        case ChainLevel::LRC: return "s3_reasoning";
    }
    return "s1_finding";
}

void Weights::validate() const {
    if (!(w_fc >= 0.0 && w_ic >= 0.0 && w_lrc >= 0.0)) {
        throw Error("InvalidWeights", "weights must be non-negative",
                    {{"w_fc", w_fc}, {"w_ic", w_ic}, {"w_lrc", w_lrc}});
    }
    if (std::fabs(w_fc + w_ic + w_lrc - 1.0) > 1e-9) {
        throw Error("InvalidWeights", "weights must sum to 1", {{"w_fc", w_fc}, {"w_ic", w_ic}, {"w_lrc", w_lrc}});
    }
}

double chain_score(const std::vector<DimScore>& dims, const DimensionWeights& weights) {
    const Rubric* rubric = rubric_matching(dims);
    if (!rubric) {
        nlohmann::json names = nlohmann::json::array();
        for (const auto& d : dims) names.push_back(d.dimension);
        throw Error("IncompleteDims", "dimension scores do not cover exactly one rubric level",
                    {{"dimensions", names}});
    }
    double weighted = 0.0;
    double total_weight = 0.0;
    for (const auto& d : dims) {
        if (d.value < 0 || d.value > 10) {
            throw Error("RangeError", "dimension score outside 0..10: " + d.dimension,
                        {{"dimension", d.dimension}, {"value", d.value}});
        }
        auto it = weights.find(d.dimension);
        double w = it == weights.end() ? 1.0 : it->second;
        if (!(w >= 0.0)) throw Error("InvalidWeights", "negative dimension weight: " + d.dimension);
        weighted += w * d.value;
        total_weight += w;
    }
    if (total_weight <= 0.0) throw Error("InvalidWeights", "dimension weights sum to zero");
    return text::round_half_even(10.0 * weighted / total_weight, 2);
}

double cot_e(const std::vector<SampleScore>& samples, const Weights& w) {
    if (samples.empty()) throw Error("EmptyCorpus", "cannot compute CoT_e over zero samples");
    w.validate();
    std::vector<double> fc, ic, lrc;
    fc.reserve(samples.size());
    ic.reserve(samples.size());
    lrc.reserve(samples.size());
    for (const auto& s : samples) {
        fc.push_back(s.s_fc);
        ic.push_back(s.s_ic);
        lrc.push_back(s.s_lrc);
    }
    const double n = static_cast<double>(samples.size());
    return w.w_fc * (sorted_sum(fc) / n) + w.w_ic * (sorted_sum(ic) / n) + w.w_lrc * (sorted_sum(lrc) / n);
}

// ---------------------------------------------------------------------------

std::string build_scoring_prompt(const CoTRecord& gt, const CoTRecord& pred) {
    if (gt.chains.empty() || !gt.has_triples()) {
        throw Error("MissingTriples", "ground-truth record carries no extracted chains", {{"side", "gt"}});
    }
    if (pred.chains.empty()) {
        throw Error("MissingTriples", "prediction record carries no extracted chains", {{"side", "pred"}});
    }

    std::ostringstream out;
    out << "You are an expert radiologist grading a model's chain-of-thought against the ground truth.\n"
           "Both reasoning processes have been extracted into (subject, relation, object) triples and split "
           "into three chains: the Finding Chain (FC) holds directly observed radiological facts, the "
           "Impression Chain (IC) holds intermediate impressions derived from findings, and the Long Reasoning "
           "Chain (LRC) holds higher-order diagnostic reasoning that integrates findings and impressions.\n"
           "Compare the prediction (Pred) with the ground truth (GT) chain by chain and rate every dimension "
           "below on a 10-point scale.\n\n";

    for (auto level : kAllLevels) {
        const auto& rubric = rubric_for(level);
        out << "## " << chain_level_title(level) << " scoring criteria\n";
        for (const auto& d : rubric.dimensions) {
            out << "### " << d.display_name << " (" << d.name << "): " << d.description << "\n";
            for (const auto& band : d.bands) out << "- " << band_label(band) << ": " << band.criterion << "\n";
        }
        out << "\n";
    }

    auto emit_chains = [&out](const char* label, const CoTRecord& record) {
        out << "## " << label << " chains\n";
        for (auto level : kAllLevels) {
            out << "[" << to_string(level) << "]\n";
            auto it = record.chains.find(level);
            if (it == record.chains.end() || it->second.triplets.empty()) {
                out << "(none)\n";
            } else {
                out << format_triples(it->second.triplets) << "\n";
            }
        }
        out << "\n";
    };
    emit_chains("GT", gt);
    emit_chains("Pred", pred);

    out << "Respond with a single JSON object of exactly this shape, every value a string \"n/10\" and the "
           "overall score \"n/100\":\n"
           "{\"scoring\": {";
    bool first_level = true;
    for (auto level : kAllLevels) {
        if (!first_level) out << ", ";
        first_level = false;
        out << "\"" << scorecard_key(level) << "\": {";
        const auto& dims = rubric_for(level).dimensions;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) out << ", ";
            out << "\"" << dims[i].name << "\": \"n/10\"";
        }
        out << "}";
    }
    out << ", \"overall_score\": \"n/100\"}}\n";
    return out.str();
}

std::optional<std::string> extract_first_json_object(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    auto candidate = text.substr(start, i - start + 1);
                    if (nlohmann::json::accept(candidate)) return std::string(candidate);
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

Scorecard parse_scorecard(std::string_view judge_text) {
    auto object_text = extract_first_json_object(judge_text);
    if (!object_text) throw Error("NoJsonFound", "judge output contains no JSON object");
    auto root = nlohmann::json::parse(*object_text);

    if (!root.contains("scoring") || !root.at("scoring").is_object()) {
        throw Error("SchemaError", "scorecard lacks a \"scoring\" object", {{"missing", "scoring"}});
    }
    const auto& scoring = root.at("scoring");

    Scorecard card;
    for (auto level : kAllLevels) {
        std::string key(scorecard_key(level));
        if (!scoring.contains(key) || !scoring.at(key).is_object()) {
            throw Error("SchemaError", "scorecard lacks level " + key, {{"missing", key}});
        }
        std::map<std::string, nlohmann::json> provided;
        for (const auto& [raw_key, value] : scoring.at(key).items()) provided[dimension_key(raw_key)] = value;

        std::vector<DimScore> dims;
        for (const auto& spec : rubric_for(level).dimensions) {
            auto it = provided.find(spec.name);
            if (it == provided.end()) {
                throw Error("SchemaError", "scorecard lacks dimension " + key + "." + spec.name,
                            {{"missing", key + "." + spec.name}});
            }
            auto fraction = parse_fraction(it->second);
            if (!fraction) {
                throw Error("FormatError", "dimension value is not of the form \"n/10\": " + spec.name,
                            {{"dimension", spec.name}, {"value", it->second}});
            }
            if (fraction->denominator != 10) {
                throw Error("FormatError", "dimension denominator must be 10: " + spec.name,
                            {{"dimension", spec.name}, {"value", it->second}});
            }
            if (fraction->numerator < 0 || fraction->numerator > 10) {
                throw Error("RangeError", "dimension value outside 0..10: " + spec.name,
                            {{"dimension", spec.name}, {"value", it->second}});
            }
            dims.push_back({spec.name, fraction->numerator});
        }
        card.dims[level] = std::move(dims);
    }

    if (scoring.contains("overall_score") && !scoring.at("overall_score").is_null()) {
        const auto& overall = scoring.at("overall_score");
        auto fraction = parse_fraction(overall);
        if (fraction) {
            if (fraction->denominator != 100) {
                throw Error("FormatError", "overall_score denominator must be 100", {{"value", overall}});
            }
            if (fraction->numerator < 0 || fraction->numerator > 100) {
                throw Error("RangeError", "overall_score outside 0..100", {{"value", overall}});
            }
            card.judge_overall_raw = fraction->numerator;
        } else if (overall.is_string()) {
            // A placeholder numerator such as "xx/100" is tolerated as "not
            // reported"; the value is never aggregated anyway.
            static const std::regex placeholder(R"(^\s*[^/]*\s*/\s*(\d+)\s*$)");
            std::smatch m;
            const auto& s = overall.get_ref<const std::string&>();
            if (!std::regex_match(s, m, placeholder)) {
                throw Error("FormatError", "overall_score is not of the form \"n/100\"", {{"value", overall}});
            }
            if (m[1].str() != "100") {
                throw Error("FormatError", "overall_score denominator must be 100", {{"value", overall}});
            }
        } else {
            throw Error("FormatError", "overall_score is not a string", {{"value", overall}});
        }
    }
    return card;
}

std::string render_scorecard(const Scorecard& card) {
    nlohmann::json scoring = nlohmann::json::object();
    for (const auto& [level, dims] : card.dims) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& d : dims) obj[d.dimension] = std::to_string(d.value) + "/10";
        scoring[std::string(scorecard_key(level))] = obj;
    }
    if (card.judge_overall_raw) scoring["overall_score"] = std::to_string(*card.judge_overall_raw) + "/100";
    return nlohmann::json{{"scoring", scoring}}.dump();
}

SampleScore score_sample(std::string sample_id, const Scorecard& card, const DimensionWeights& weights) {
    SampleScore s;
    s.sample_id = std::move(sample_id);
    s.dims = card.dims;
    s.judge_overall_raw = card.judge_overall_raw;
    auto level_score = [&](ChainLevel level) {
        auto it = card.dims.find(level);
        if (it == card.dims.end()) {
            throw Error("IncompleteDims", "scorecard lacks level " + std::string(to_string(level)));
        }
        return chain_score(it->second, weights);
    };
    s.s_fc = level_score(ChainLevel::FC);
    s.s_ic = level_score(ChainLevel::IC);
    s.s_lrc = level_score(ChainLevel::LRC);
    return s;
}

// ---------------------------------------------------------------------------

CorpusReport aggregate_corpus(const std::vector<SampleScore>& samples, const Weights& w,
                              const std::vector<GroupKey>& expected) {
    w.validate();
    std::map<GroupKey, std::vector<SampleScore>> groups;
    for (const auto& s : samples) groups[GroupKey{s.model, s.task, s.organ}].push_back(s);

    CorpusReport report;
    for (const auto& key : expected) {
        if (!groups.count(key)) {
            report.notes.push_back("group model=" + key.model + " task=" + key.task + " organ=" + key.organ +
                                   " has no samples; row omitted");
        }
    }
    for (const auto& [key, members] : groups) {
        CorpusRow row;
        row.key = key;
        row.n = members.size();
        std::vector<double> fc, ic, lrc;
        for (const auto& s : members) {
            fc.push_back(s.s_fc);
            ic.push_back(s.s_ic);
            lrc.push_back(s.s_lrc);
        }
        const double n = static_cast<double>(row.n);
        row.s_fc = sorted_sum(fc) / n;
        row.s_ic = sorted_sum(ic) / n;
        row.s_lrc = sorted_sum(lrc) / n;
        row.cot_e = cot_e(members, w);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string CorpusReport::to_csv() const {
    std::ostringstream out;
    out << "model,task,organ,n,s_fc,s_ic,s_lrc,cot_e\n";
    for (const auto& r : rows) {
        out << csv_field(r.key.model) << ',' << csv_field(r.key.task) << ',' << csv_field(r.key.organ) << ','
            << r.n << ',' << text::format_2dp(r.s_fc) << ',' << text::format_2dp(r.s_ic) << ','
            << text::format_2dp(r.s_lrc) << ',' << text::format_2dp(r.cot_e) << '\n';
    }
    return out.str();
}

std::string CorpusReport::to_text() const {
    std::size_t model_w = 5, task_w = 4, organ_w = 5;
    for (const auto& r : rows) {
        model_w = std::max(model_w, r.key.model.size());
        task_w = std::max(task_w, r.key.task.size());
        organ_w = std::max(organ_w, r.key.organ.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(model_w)) << "model" << "  " << std::setw(static_cast<int>(task_w))
        << "task" << "  " << std::setw(static_cast<int>(organ_w)) << "organ" << std::right << "  " << std::setw(6)
        << "n" << std::setw(9) << "S_FC" << std::setw(9) << "S_IC" << std::setw(9) << "S_LRC" << std::setw(9)
        << "CoT_e" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(model_w)) << r.key.model << "  "
            << std::setw(static_cast<int>(task_w)) << r.key.task << "  " << std::setw(static_cast<int>(organ_w))
            << r.key.organ << std::right << "  " << std::setw(6) << r.n << std::setw(9) << text::format_2dp(r.s_fc)
            << std::setw(9) << text::format_2dp(r.s_ic) << std::setw(9) << text::format_2dp(r.s_lrc)
            << std::setw(9) << text::format_2dp(r.cot_e) << '\n';
    }
    for (const auto& note : notes) out << "note: " << note << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const DimScore& d) {
    j = {{"dimension", d.dimension}, {"value", d.value}};
}

void to_json(nlohmann::json& j, const SampleScore& s) {
    nlohmann::json dims = nlohmann::json::object();
    for (const auto& [level, list] : s.dims) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& d : list) obj[d.dimension] = d.value;
        dims[std::string(scorecard_key(level))] = obj;
    }
    j = {{"sample_id", s.sample_id}, {"model", s.model}, {"task", s.task},   {"organ", s.organ},
         {"s_fc", s.s_fc},           {"s_ic", s.s_ic},   {"s_lrc", s.s_lrc}, {"dims", dims}};
    j["judge_overall_raw"] = s.judge_overall_raw ? nlohmann::json(*s.judge_overall_raw) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SampleScore& s) {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.model = j.value("model", std::string{});
    s.task = j.value("task", std::string{});
    s.organ = j.value("organ", std::string{});
    s.s_fc = j.at("s_fc").get<double>();
    s.s_ic = j.at("s_ic").get<double>();
    s.s_lrc = j.at("s_lrc").get<double>();
    for (double v : {s.s_fc, s.s_ic, s.s_lrc}) {
        if (!(v >= 0.0 && v <= 100.0)) {
            throw Error("RangeError", "chain score outside 0..100", {{"sample_id", s.sample_id}, {"value", v}});
        }
    }
    s.dims.clear();
    if (j.contains("dims")) {
        for (auto level : kAllLevels) {
            std::string key(scorecard_key(level));
            if (!j.at("dims").contains(key)) continue;
            std::vector<DimScore> list;
            for (const auto& spec : rubric_for(level).dimensions) {
                const auto& obj = j.at("dims").at(key);
                if (obj.contains(spec.name)) list.push_back({spec.name, obj.at(spec.name).get<int>()});
            }
            s.dims[level] = std::move(list);
        }
    }
    s.judge_overall_raw.reset();
    if (j.contains("judge_overall_raw") && !j.at("judge_overall_raw").is_null()) {
        s.judge_overall_raw = j.at("judge_overall_raw").get<int>();
    }
}

}  // namespace chaineval
