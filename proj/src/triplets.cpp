#include "chaineval/triplets.hpp"

#include "chaineval/text_util.hpp"

#include <cctype>
#include <sstream>

namespace chaineval {

namespace {

const char kEntityLexiconJson[] =
#include "chaineval/embedded/entity_lexicon.inc"
    ;

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

[[noreturn]] void malformed(std::size_t offset, const std::string& reason) {
    throw Error("MalformedTriple", "malformed triple at offset " + std::to_string(offset) + ": " + reason,
                {{"position", offset}, {"reason", reason}});
}

}  // namespace

std::string build_extraction_prompt(std::string_view report_text) {
    if (text::is_blank(report_text)) throw Error("EmptyInput", "report text is blank");

    std::ostringstream out;
    out << "You are a medical fact-extraction assistant specialized in parsing knowledge from the given "
           "clinical text.\n"
           "Your task is to analyze the input and extract all factual triples (subject, relation, object), "
           "where each triple expresses a single clear medical fact.\n"
           "Ensure that all information is presented strictly in triple form, focusing on "
           "organs/structures, relations, and lesions.\n"
           "\n"
           "Output Requirements:\n"
           "In each triple, the first and third elements must be an organ or lesion, and the second element "
           "must describe their relationship.\n"
           "If the second and third positions are reversed, correct them.\n"
           "Do not use parentheses or semicolons inside an element.\n"
           "\n"
           "The output format should be:\n"
        << kTripleExemplar
        << "\n"
           "\n"
           "Clinical text:\n"
        << report_text << "\n";
    return out.str();
}

TripleListDocument parse_triples(std::string_view input) {
    TripleListDocument doc;
    std::size_t pos = 0;
    const std::size_t n = input.size();

    while (true) {
        while (pos < n && is_space(input[pos])) ++pos;
        if (pos >= n) break;
        if (input[pos] != '(') {
            doc.residual_text = std::string(input.substr(pos));
            break;
        }

        const std::size_t open = pos;
        std::size_t close = std::string_view::npos;
        std::size_t commas[2] = {0, 0};
        int comma_count = 0;
        for (std::size_t i = open + 1; i < n; ++i) {
            char c = input[i];
            if (c == ')') {
                close = i;
                break;
            }
            if (c == '(') malformed(open, "nested parenthesis at offset " + std::to_string(i));
            if (c == ';') malformed(open, "semicolon inside a triple");
            if (c == ',' && comma_count < 2) commas[comma_count++] = i;
        }
        if (close == std::string_view::npos) malformed(open, "unbalanced parenthesis");
        if (comma_count < 2) malformed(open, "fewer than three slots");

        auto subject = text::trim_view(input.substr(open + 1, commas[0] - open - 1));
        auto relation = text::trim_view(input.substr(commas[0] + 1, commas[1] - commas[0] - 1));
        auto object = text::trim_view(input.substr(commas[1] + 1, close - commas[1] - 1));
        if (subject.empty() || relation.empty() || object.empty()) malformed(open, "empty slot");
        doc.triples.push_back(Triplet{std::string(subject), std::string(relation), std::string(object)});

        pos = close + 1;
        std::size_t look = pos;
        while (look < n && (input[look] == ' ' || input[look] == '\t')) ++look;
        if (look < n && input[look] == ';') pos = look + 1;
    }
    return doc;
}

TripleListDocument parse_judge_triples(std::string_view input) {
    std::size_t line_start = 0;
    while (line_start < input.size()) {
        auto line_end = input.find('\n', line_start);
        auto line = text::trim_view(input.substr(line_start, line_end == std::string_view::npos
                                                                  ? std::string_view::npos
                                                                  : line_end - line_start));
        if (!line.empty() && line.front() == '(') return parse_triples(input.substr(line_start));
        if (line_end == std::string_view::npos) break;
        line_start = line_end + 1;
    }
    return parse_triples(input);
}

std::string format_triples(const std::vector<Triplet>& triples) {
    std::string out;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        validate_triplet(t);
        if (t.subject.find(',') != std::string::npos || t.relation.find(',') != std::string::npos) {
            throw Error("InvariantViolation", "subject and relation slots cannot contain commas",
                        {{"subject", t.subject}, {"relation", t.relation}});
        }
        if (i) out += '\n';
        out += '(';
        out += t.subject;
        out += ", ";
        out += t.relation;
        out += ", ";
        out += t.object;
        out += ");";
    }
    return out;
}

// ---------------------------------------------------------------------------

EntityLexicon::EntityLexicon(const std::vector<std::string>& phrases) {
    for (const auto& p : phrases) add(p);
}

const EntityLexicon& EntityLexicon::builtin() {
    static const EntityLexicon lexicon = from_json(nlohmann::json::parse(kEntityLexiconJson));
    return lexicon;
}

EntityLexicon EntityLexicon::from_json(const nlohmann::json& j) {
    return EntityLexicon(j.at("entities").get<std::vector<std::string>>());
}

void EntityLexicon::add(std::string_view phrase) {
    auto key = text::normalize_phrase(phrase);
    if (!key.empty()) phrases_.insert(std::move(key));
}

bool EntityLexicon::contains(std::string_view phrase) const {
    return phrases_.count(text::normalize_phrase(phrase)) != 0;
}

Triplet repair_slot_order(const Triplet& t, const RelationLexicon& relations, const EntityLexicon& entities) {
    const bool relation_is_entity = entities.contains(t.relation) && !relations.contains(t.relation);
    const bool object_is_relation = relations.contains(t.object) && !entities.contains(t.object);
    if (relation_is_entity && object_is_relation) return Triplet{t.subject, t.object, t.relation};
    return t;
}

}  // namespace chaineval
