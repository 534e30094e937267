#pragma once

#include "chaineval/chain_model.hpp"

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval {

/// Parsed judge output: the triple list plus whatever prose trailed it.
struct TripleListDocument {
    std::vector<Triplet> triples;
    std::string residual_text;

    friend bool operator==(const TripleListDocument&, const TripleListDocument&) = default;
};

/// Stage-1 extraction prompt for one report. Deterministic; throws
/// Error("EmptyInput") for a blank report.
std::string build_extraction_prompt(std::string_view report_text);

/// The exemplar line embedded in every extraction prompt.
inline constexpr std::string_view kTripleExemplar = "(Right hemicolon, not observed, wall thickening);";

/// Parses `(s, r, o);` items separated by whitespace. Only the first two
/// top-level commas split slots; later commas stay in the object. Parsing
/// stops at the first non-whitespace byte that does not open an item and the
/// rest is returned as residual_text. Throws Error("MalformedTriple") with a
/// byte offset for short groups, nested or unbalanced parentheses, or empty
/// slots.
TripleListDocument parse_triples(std::string_view text);

/// parse_triples after dropping leading prose lines (anything before the
/// first line that starts with `(`), which judges commonly emit.
TripleListDocument parse_judge_triples(std::string_view text);

/// One `(s, r, o);` per line, newline separated, no trailing newline.
/// Throws Error("InvariantViolation") for fields that cannot round-trip.
std::string format_triples(const std::vector<Triplet>& triples);

/// Entity phrases (organs, structures, lesions, findings) used to detect
/// swapped relation/object slots.
class EntityLexicon {
public:
    EntityLexicon() = default;
    explicit EntityLexicon(const std::vector<std::string>& phrases);

    static const EntityLexicon& builtin();
    /// {"entities": [...]}
    static EntityLexicon from_json(const nlohmann::json& j);

    void add(std::string_view phrase);
    bool contains(std::string_view phrase) const;
    bool empty() const { return phrases_.empty(); }
    std::size_t size() const { return phrases_.size(); }

private:
    std::set<std::string> phrases_;  // normalized
};

/// Swaps relation and object when the relation slot is an entity and the
/// object slot is a relation phrase. Phrases that appear in both lexicons
/// never trigger a swap, which keeps the repair idempotent.
Triplet repair_slot_order(const Triplet& t, const RelationLexicon& relations, const EntityLexicon& entities);

}  // namespace chaineval
