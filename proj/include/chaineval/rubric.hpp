#pragma once

#include "chaineval/chain_model.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chaineval {

// ---------------------------------------------------------------------------
// Rubrics
// ---------------------------------------------------------------------------

struct ScoreBand {
    std::vector<int> scores;  // e.g. {8, 9}
    std::string criterion;
};

struct DimensionSpec {
    std::string name;          // snake_case key used in scorecards
    std::string display_name;  // as printed in the rubric table
    std::string description;
    std::array<ScoreBand, 6> bands;  // {10}, {8,9}, {6,7}, {4,5}, {1,2,3}, {0}
};

struct Rubric {
    ChainLevel level = ChainLevel::FC;
    std::vector<DimensionSpec> dimensions;

    const DimensionSpec* find(std::string_view dimension) const;
};

/// Built-in rubric for a chain level. FC: existence_match, completeness,
/// accuracy. IC: clarity, consistency, medical_utility. LRC:
/// logical_completeness, reasoning_depth, clinical_relevance,
/// evidence_integration.
const Rubric& rubric_for(ChainLevel level);

/// Scorecard object key for a level: s1_finding, s2_impression, s3_reasoning.
std::string_view scorecard_key(ChainLevel level);

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

struct DimScore {
    std::string dimension;
    int value = 0;  // 0..10

    friend bool operator==(const DimScore&, const DimScore&) = default;
};

struct ChainScore {
    ChainLevel level = ChainLevel::FC;
    std::vector<DimScore> dims;
    double s = 0.0;  // 0..100
};

struct Weights {
    double w_fc = 0.3;
    double w_ic = 0.3;
    double w_lrc = 0.4;

    /// Throws Error("InvalidWeights") unless all are >= 0 and sum to 1 within 1e-9.
    void validate() const;
    static Weights standard() { return {}; }
};

struct SampleScore {
    std::string sample_id;
    std::string model;
    std::string task;
    std::string organ;
    double s_fc = 0.0;
    double s_ic = 0.0;
    double s_lrc = 0.0;
    std::map<ChainLevel, std::vector<DimScore>> dims;
    /// Judge's own overall score. Recorded for audit, never aggregated.
    std::optional<int> judge_overall_raw;
};

struct Scorecard {
    std::map<ChainLevel, std::vector<DimScore>> dims;  // in rubric order
    std::optional<int> judge_overall_raw;

    friend bool operator==(const Scorecard&, const Scorecard&) = default;
};

/// Optional per-dimension weights for chain_score. Missing dimensions weigh 1.
using DimensionWeights = std::map<std::string, double>;

/// 10 x (weighted) mean of the dimension values, rounded half-even to two
/// decimals. `dims` must hold every dimension of exactly one rubric level;
/// otherwise throws Error("IncompleteDims").
double chain_score(const std::vector<DimScore>& dims, const DimensionWeights& weights = {});

/// CoT_e = w_fc * mean(s_fc) + w_ic * mean(s_ic) + w_lrc * mean(s_lrc) at
/// full precision. Throws Error("EmptyCorpus") for no samples.
double cot_e(const std::vector<SampleScore>& samples, const Weights& w = Weights::standard());

// ---------------------------------------------------------------------------
// Judge prompt and scorecard parsing
// ---------------------------------------------------------------------------

/// Scoring prompt holding all three rubrics, both chain sets and the required
/// JSON output shape. Throws Error("MissingTriples") when either record has
/// no chains.
std::string build_scoring_prompt(const CoTRecord& gt, const CoTRecord& pred);

/// First balanced `{...}` object in `text` (string literals respected), or
/// nullopt.
std::optional<std::string> extract_first_json_object(std::string_view text);

/// Parses {"scoring": {"s1_finding": {...}, "s2_impression": {...},
/// "s3_reasoning": {...}, "overall_score": "n/100"}}. Values are "n/10"
/// strings. Errors: NoJsonFound, SchemaError, RangeError, FormatError.
Scorecard parse_scorecard(std::string_view judge_text);

/// Inverse of parse_scorecard for valid scorecards.
std::string render_scorecard(const Scorecard& card);

/// Builds a SampleScore whose chain scores are recomputed locally.
SampleScore score_sample(std::string sample_id, const Scorecard& card, const DimensionWeights& weights = {});

// ---------------------------------------------------------------------------
// Corpus aggregation
// ---------------------------------------------------------------------------

struct GroupKey {
    std::string model;
    std::string task;
    std::string organ;

    friend bool operator==(const GroupKey&, const GroupKey&) = default;
    friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct CorpusRow {
    GroupKey key;
    std::size_t n = 0;
    // Full precision; round at presentation.
    double s_fc = 0.0;
    double s_ic = 0.0;
    double s_lrc = 0.0;
    double cot_e = 0.0;
};

struct CorpusReport {
    std::vector<CorpusRow> rows;  // sorted by key
    std::vector<std::string> notes;

    std::string to_csv() const;
    std::string to_text() const;
};

/// Per-group mean S_FC/S_IC/S_LRC and CoT_e. Groups listed in `expected`
/// that have no samples are omitted and noted.
CorpusReport aggregate_corpus(const std::vector<SampleScore>& samples, const Weights& w = Weights::standard(),
                              const std::vector<GroupKey>& expected = {});

void to_json(nlohmann::json& j, const DimScore& d);
void to_json(nlohmann::json& j, const SampleScore& s);
void from_json(const nlohmann::json& j, SampleScore& s);

}  // namespace chaineval
