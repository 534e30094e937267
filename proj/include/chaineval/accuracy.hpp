#pragma once

#include "chaineval/error.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval {

struct Verdict {
    std::string sample_id;
    bool correct = false;
    std::string question_type;
    std::string rationale;
    // Group keys.
    std::string model;
    std::string task;
    std::string subtask;
    std::string organ;
};

/// Case-folds, strips punctuation and collapses whitespace. Idempotent.
std::string normalize_answer(std::string_view s);

/// Option label for index i: "A", "B", ...
std::string option_label(std::size_t index);

/// Resolves an answer (bare label, "b) text", full option text, or a
/// sentence naming exactly one option) to an option index. nullopt when
/// nothing matches; Error("AmbiguousPrediction") when several do.
std::optional<std::size_t> resolve_option(std::string_view answer, const std::vector<std::string>& options);

/// Multiple-choice exact match. `gt` is an option label or option text.
Verdict match_choice(std::string_view pred, std::string_view gt, const std::vector<std::string>& options);

inline const std::vector<std::string> kQuestionTypes = {"shape", "boundary", "density", "count", "TNM stage", "other"};

/// Open-ended semantic-consistency judge prompt. Throws Error("EmptyInput").
std::string build_semantic_prompt(std::string_view question, std::string_view gt_answer,
                                  std::string_view pred_answer);

/// Reads the first `VERDICT: correct|incorrect` line; `QUESTION_TYPE:` and
/// `FOCUS:` lines are picked up when present; everything after the verdict
/// line is the rationale. Throws Error("NoVerdictLine").
Verdict parse_verdict(std::string_view judge_text);

// ---------------------------------------------------------------------------

enum class GroupField { Model, Task, Subtask, Organ };

struct AccuracyRow {
    std::map<std::string, std::string> key;  // field name -> value
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;  // percent
};

struct AccuracyTable {
    std::vector<AccuracyRow> rows;  // sorted by key
    std::vector<std::string> notes;

    std::string to_csv() const;
};

/// accuracy = 100 * correct / total per group. `expected` lists group keys
/// (as field -> value maps) that should exist; missing ones are noted.
AccuracyTable aggregate_accuracy(const std::vector<Verdict>& verdicts, const std::vector<GroupField>& group_by,
                                 const std::vector<std::map<std::string, std::string>>& expected = {});

/// The twelve subtasks in benchmark column order, with their task blocks.
struct SubtaskColumn {
    std::string subtask;
    std::string block;  // Position, Lesion Attributes, TNM Prediction, CoT-Report
};
const std::vector<SubtaskColumn>& benchmark_columns();

/// One model's row laid out like the benchmark table: per-subtask accuracy,
/// per-block unweighted means and the unweighted mean over subtasks.
struct BenchmarkRow {
    std::string model;
    std::vector<std::optional<double>> subtask_accuracy;  // benchmark_columns() order
    std::map<std::string, double> block_mean;
    std::optional<double> average;
    std::vector<std::string> notes;
};

BenchmarkRow benchmark_row(std::string model, const std::map<std::string, double>& subtask_accuracy);
std::vector<BenchmarkRow> benchmark_table(const std::vector<Verdict>& verdicts);
std::string benchmark_table_csv(const std::vector<BenchmarkRow>& rows);

void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

}  // namespace chaineval
