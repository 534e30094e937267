#pragma once

#include "chaineval/error.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval {

// ---------------------------------------------------------------------------
// Triplets and chains
// ---------------------------------------------------------------------------

/// A (subject, relation, object) medical fact.
struct Triplet {
    std::string subject;
    std::string relation;
    std::string object;

    friend bool operator==(const Triplet&, const Triplet&) = default;
    friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// Trims all three slots and checks them against the field invariants:
/// nonempty, and free of `(`, `)` and `;`. Throws Error("InvariantViolation").
Triplet make_triplet(std::string_view subject, std::string_view relation, std::string_view object);
void validate_triplet(const Triplet& t);
bool is_valid_triplet(const Triplet& t) noexcept;

/// Finding chain < impression chain < long reasoning chain.
enum class ChainLevel { FC = 0, IC = 1, LRC = 2 };

inline constexpr ChainLevel kAllLevels[] = {ChainLevel::FC, ChainLevel::IC, ChainLevel::LRC};

std::string_view to_string(ChainLevel level);
ChainLevel parse_chain_level(std::string_view s);

struct SourceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ReasoningChain {
    ChainLevel level = ChainLevel::FC;
    std::vector<Triplet> triplets;
    std::optional<SourceSpan> source_span;
    /// Set when the chain is known to be missing from the response; the only
    /// case in which `triplets` may be empty.
    bool absent = false;

    friend bool operator==(const ReasoningChain&, const ReasoningChain&) = default;
};

/// Checks chain invariants; `origin_length`, when given, bounds source_span.
void validate_chain(const ReasoningChain& chain, std::optional<std::size_t> origin_length = std::nullopt);

// ---------------------------------------------------------------------------
// CoT responses
// ---------------------------------------------------------------------------

struct CoTRecord {
    std::string reasoning_text;
    /// Starts with the summary marker when one was found.
    std::string summary_text;
    std::map<ChainLevel, ReasoningChain> chains;
    /// No summary marker occurred; the whole response is reasoning.
    bool marker_missing = false;

    /// reasoning + " " + summary, the trimmed response up to inner whitespace.
    std::string reconstruct() const;
    bool has_triples() const;

    friend bool operator==(const CoTRecord&, const CoTRecord&) = default;
};

const std::vector<std::string>& default_summary_markers();

/// Splits a response into reasoning and summary. The first marker (in list
/// order) that occurs anywhere is used, and the split happens at its last
/// occurrence. Throws Error("EmptyInput") for blank text.
CoTRecord segment_cot(std::string_view text,
                      const std::vector<std::string>& markers = default_summary_markers());

/// Offset of the summary within the trimmed text, npos when no marker occurs.
std::size_t find_summary_offset(std::string_view trimmed_text, const std::vector<std::string>& markers);

// ---------------------------------------------------------------------------
// Relation lexicon and level classification
// ---------------------------------------------------------------------------

enum class RelationClass { Observational, Suggestive, Conclusive };

ChainLevel level_for(RelationClass cls);

class RelationLexicon {
public:
    RelationLexicon() = default;

    /// The bundled lexicon (data/relation_lexicon.json).
    static const RelationLexicon& builtin();
    /// {"observational": [...], "suggestive": [...], "conclusive": [...]}
    static RelationLexicon from_json(const nlohmann::json& j);

    void add(std::string_view phrase, RelationClass cls);
    std::optional<RelationClass> lookup(std::string_view phrase) const;
    bool contains(std::string_view phrase) const { return lookup(phrase).has_value(); }
    /// Longest lexicon phrase occurring as whole words inside `phrase`.
    std::optional<RelationClass> lookup_contained(std::string_view phrase) const;
    std::size_t size() const { return phrases_.size(); }
    std::size_t count(RelationClass cls) const;

    nlohmann::json to_json() const;

private:
    std::map<std::string, RelationClass> phrases_;  // keyed by normalized phrase
};

struct LevelAssignment {
    ChainLevel level = ChainLevel::FC;
    bool low_confidence = false;

    friend bool operator==(const LevelAssignment&, const LevelAssignment&) = default;
};

/// Observational relations map to FC, suggestive to IC, conclusive to LRC.
/// Exact phrase matches win; otherwise the longest contained lexicon phrase
/// decides; unknown relations fall back to FC with low_confidence set.
LevelAssignment classify_level(const Triplet& triplet, const RelationLexicon& lexicon);

/// Groups triplets into chains by classify_level, preserving input order.
/// Levels with no triplets are present and marked absent.
std::map<ChainLevel, ReasoningChain> build_chains(const std::vector<Triplet>& triplets,
                                                  const RelationLexicon& lexicon);

// ---------------------------------------------------------------------------
// VQA samples
// ---------------------------------------------------------------------------

enum class Organ { Liver, Pancreas, Stomach, Colon, Esophagus };
enum class TaskType { Localization, LesionAttribute, TnmPrediction, CotReport };
enum class AnswerFormat { MultipleChoice, OpenEnded };

inline constexpr Organ kTaskOrgans[] = {Organ::Liver, Organ::Pancreas, Organ::Stomach, Organ::Colon,
                                        Organ::Esophagus};
inline constexpr TaskType kTaskTypes[] = {TaskType::Localization, TaskType::LesionAttribute,
                                          TaskType::TnmPrediction, TaskType::CotReport};

std::string_view to_string(Organ organ);
std::string_view to_string(TaskType task);
std::string_view to_string(AnswerFormat format);
Organ parse_organ(std::string_view s);
TaskType parse_task(std::string_view s);
AnswerFormat parse_format(std::string_view s);

struct VqaRecord {
    std::string id;
    std::string patient_id;
    Organ organ = Organ::Liver;
    TaskType task = TaskType::Localization;
    std::string subtask;
    AnswerFormat format = AnswerFormat::OpenEnded;
    std::string question;
    std::string answer_gt;
    std::vector<std::string> options;
    std::optional<CoTRecord> cot_gt;
    // Clinician review labels.
    std::optional<bool> usable;
    std::optional<std::string> quality;

    friend bool operator==(const VqaRecord&, const VqaRecord&) = default;
};

/// Multiple-choice records need >= 2 distinct options that include answer_gt.
void validate_vqa(const VqaRecord& record);
/// Throws Error("DuplicateId") when two records share an id.
void validate_corpus(const std::vector<VqaRecord>& records);

// JSON (one object per JSONL line; field names follow the struct fields).
void to_json(nlohmann::json& j, const Triplet& t);
void from_json(const nlohmann::json& j, Triplet& t);
void to_json(nlohmann::json& j, const ReasoningChain& c);
void from_json(const nlohmann::json& j, ReasoningChain& c);
void to_json(nlohmann::json& j, const CoTRecord& r);
void from_json(const nlohmann::json& j, CoTRecord& r);
void to_json(nlohmann::json& j, const VqaRecord& r);
void from_json(const nlohmann::json& j, VqaRecord& r);

}  // namespace chaineval
