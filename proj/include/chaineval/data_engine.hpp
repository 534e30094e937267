#pragma once

#include "chaineval/chain_model.hpp"
#include "chaineval/judge.hpp"
#include "chaineval/knowledge_graph.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chaineval {

// ---------------------------------------------------------------------------
// Structured reports
// ---------------------------------------------------------------------------

struct PatientInfo {
    std::optional<int> age;
    std::string gender;
};

struct OrganFindings {
    Organ organ = Organ::Liver;
    std::string location;
    std::string shape;
    std::string margin;
    std::string density;
    std::string count;
    /// Free-text extras, including any field the extractor returned that the
    /// schema does not name.
    nlohmann::json other = nlohmann::json::object();
};

struct Pathology {
    std::string t;  // "" when not reported
    std::string n;
    std::string m;
    std::string conclusion;
};

struct StructuredReport {
    std::string patient_id;
    PatientInfo patient;
    std::vector<OrganFindings> organs;
    Pathology pathology;

    /// Throws SchemaError (no organ entry) or TnmPatternError.
    void validate() const;
};

/// T[0-4x], N[0-3x], M[01x]. `axis` is 'T', 'N' or 'M'.
bool tnm_code_valid(char axis, std::string_view code);

std::string build_extraction_prompt_structured(std::string_view report_text, std::string_view pathology_text = {});

/// Parses extractor JSON into a StructuredReport. Errors: NoJsonFound,
/// SchemaError, UnknownOrgan, TnmPatternError.
StructuredReport parse_structured_report(std::string_view judge_text);

/// Runs the extractor role. Throws Error("EmptyInput") for a blank report.
StructuredReport extract_structured_features(std::string_view report_text, JudgeClient& judge,
                                             std::string_view pathology_text = {});

void to_json(nlohmann::json& j, const StructuredReport& r);
void from_json(const nlohmann::json& j, StructuredReport& r);

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

enum class RetryStrategy { ExpandOrganRegion, ProvideSuspectedCause };
std::string_view to_string(RetryStrategy s);

/// Uniform over the two strategies: the top bit of one draw.
RetryStrategy pick_retry_strategy(std::mt19937_64& rng);

enum class EngineState { FeatureExtract, Reason, Calibrate, Summarize, Done, Failed };
std::string_view to_string(EngineState s);
EngineState parse_engine_state(std::string_view s);
/// The transition relation of the pipeline; any state may move to Failed.
bool transition_allowed(EngineState from, EngineState to);

struct TraceEvent {
    EngineState state = EngineState::FeatureExtract;
    std::string role;  // agent role name, "" for engine-internal steps
    std::string key;   // judge cache key
    std::string outcome;
    std::optional<RetryStrategy> strategy;
    int reason_calls = 0;
    int calibration_retries = 0;
    int summarizer_reloops = 0;
};

struct EngineTrace {
    std::string patient_id;
    std::vector<TraceEvent> events;
    EngineState final_state = EngineState::FeatureExtract;
    std::string failure;  // "BudgetExhausted" or the agent error kind
    int reason_calls = 0;
    int calibration_retries = 0;  // total across re-loops
    int summarizer_reloops = 0;

    /// One JSON object per event.
    std::string to_jsonl() const;
};

struct EngineConfig {
    int max_calibration_retries = 2;
    int max_summarizer_reloops = 1;
    std::uint64_t rng_seed = 0;
    const KGraph* kg = nullptr;
    std::size_t kg_hops = 1;

    /// Throws Error("InvalidConfig") for negative budgets.
    void validate() const;
};

struct CaseResult {
    std::vector<VqaRecord> records;
    EngineTrace trace;

    bool ok() const { return trace.final_state == EngineState::Done; }
};

/// Organs adjacent to `organ` (used when expanding the organ region).
std::vector<Organ> neighbouring_organs(Organ organ);

/// Reason prompt: structured findings, KG context and accumulated
/// augmentation blocks.
std::string build_reason_prompt(const StructuredReport& report, std::string_view kg_context,
                                const std::vector<std::string>& augmentations);
std::string build_calibration_prompt(const StructuredReport& report, std::string_view cot_text);
std::string build_summary_check_prompt(const StructuredReport& report, std::string_view cot_text);

/// Drives Reason -> Calibrate -> Summarize for one case. Failures are
/// reported through trace.final_state == Failed, never thrown, so the trace
/// always survives. Requires backends for reasoner, calibrator, summarizer.
CaseResult run_case(const StructuredReport& report, JudgeClient& judge, const EngineConfig& config);

struct CaseInput {
    std::string patient_id;
    std::string report_text;
    std::string pathology_text;
};

std::vector<CaseInput> read_cases(const std::string& path);

/// FeatureExtract then run_case.
CaseResult run_case_from_text(const CaseInput& input, JudgeClient& judge, const EngineConfig& config);

/// Independent cases on up to `parallelism` threads; results in input order.
std::vector<CaseResult> run_cases(const std::vector<CaseInput>& inputs, JudgeClient& judge,
                                  const EngineConfig& config, std::size_t parallelism);

/// The VQA records emitted for an accepted chain of thought.
std::vector<VqaRecord> emit_vqa(const StructuredReport& report, const CoTRecord& cot);

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Seeded Fisher-Yates shuffle; the first floor(ratio * N) ids are train.
/// Errors: DuplicateIds, InvalidRatio.
Split patient_split(const std::vector<std::string>& ids, double ratio, std::uint64_t seed);

/// Unbiased draw in [0, bound) by rejection; identical on every platform.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace chaineval
