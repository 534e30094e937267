#include "chaineval/chain_model.hpp"

#include "chaineval/text_util.hpp"

#include <algorithm>
#include <set>

namespace chaineval {

namespace {

const char kRelationLexiconJson[] =
#include "chaineval/embedded/relation_lexicon.inc"
    ;

bool has_forbidden_char(std::string_view s) {
    return s.find_first_of("();") != std::string_view::npos;
}

}  // namespace

Triplet make_triplet(std::string_view subject, std::string_view relation, std::string_view object) {
    Triplet t{text::trim(subject), text::trim(relation), text::trim(object)};
    validate_triplet(t);
    return t;
}

bool is_valid_triplet(const Triplet& t) noexcept {
    for (const std::string* field : {&t.subject, &t.relation, &t.object}) {
        if (text::is_blank(*field) || has_forbidden_char(*field)) return false;
        if (text::trim_view(*field).size() != field->size()) return false;
    }
    return true;
}

void validate_triplet(const Triplet& t) {
    const std::pair<const char*, const std::string*> fields[] = {
        {"subject", &t.subject}, {"relation", &t.relation}, {"object", &t.object}};
    for (const auto& [name, value] : fields) {
        if (text::is_blank(*value)) {
            throw Error("InvariantViolation", std::string("triplet ") + name + " is empty", {{"field", name}});
        }
        if (has_forbidden_char(*value)) {
            throw Error("InvariantViolation",
                        std::string("triplet ") + name + " contains '(' ')' or ';': " + *value,
                        {{"field", name}, {"value", *value}});
        }
        if (text::trim_view(*value).size() != value->size()) {
            throw Error("InvariantViolation", std::string("triplet ") + name + " is not trimmed",
                        {{"field", name}, {"value", *value}});
        }
    }
}

std::string_view to_string(ChainLevel level) {
    switch (level) {
        case ChainLevel::FC: return "FC";
        case ChainLevel::IC: return "IC";
        case ChainLevel::LRC: return "LRC";
    }
    return "FC";
}

ChainLevel parse_chain_level(std::string_view s) {
    if (s == "FC") return ChainLevel::FC;
    if (s == "IC") return ChainLevel::IC;
    if (s == "LRC") return ChainLevel::LRC;
    throw Error("SchemaError", "unknown chain level: " + std::string(s), {{"value", s}});
}

void validate_chain(const ReasoningChain& chain, std::optional<std::size_t> origin_length) {
    if (chain.triplets.empty() && !chain.absent) {
        throw Error("InvariantViolation", "chain has no triplets but is not marked absent",
                    {{"level", to_string(chain.level)}});
    }
    for (const auto& t : chain.triplets) validate_triplet(t);
    if (chain.source_span) {
        const auto& span = *chain.source_span;
        if (span.begin > span.end || (origin_length && span.end > *origin_length)) {
            throw Error("InvariantViolation", "source_span outside origin text",
                        {{"begin", span.begin}, {"end", span.end}});
        }
    }
}

// ---------------------------------------------------------------------------

std::string CoTRecord::reconstruct() const {
    if (reasoning_text.empty()) return summary_text;
    if (summary_text.empty()) return reasoning_text;
    return reasoning_text + " " + summary_text;
}

bool CoTRecord::has_triples() const {
    return std::any_of(chains.begin(), chains.end(),
                       [](const auto& kv) { return !kv.second.triplets.empty(); });
}

const std::vector<std::string>& default_summary_markers() {
    static const std::vector<std::string> markers = {
        "Thus, the answer is",
        "Therefore, the answer is",
        "So, the answer is",
        "The answer is",
    };
    return markers;
}

std::size_t find_summary_offset(std::string_view trimmed, const std::vector<std::string>& markers) {
    for (const auto& marker : markers) {
        if (marker.empty()) continue;
        auto pos = trimmed.rfind(marker);
        if (pos != std::string_view::npos) return pos;
    }
    return std::string_view::npos;
}

CoTRecord segment_cot(std::string_view text, const std::vector<std::string>& markers) {
    auto trimmed = text::trim_view(text);
    if (trimmed.empty()) throw Error("EmptyInput", "CoT response is blank");

    CoTRecord record;
    auto pos = find_summary_offset(trimmed, markers);
    if (pos == std::string_view::npos) {
        record.reasoning_text = std::string(trimmed);
        record.marker_missing = true;
        return record;
    }
    record.reasoning_text = std::string(text::rtrim_view(trimmed.substr(0, pos)));
    record.summary_text = std::string(trimmed.substr(pos));
    return record;
}

// ---------------------------------------------------------------------------

ChainLevel level_for(RelationClass cls) {
    switch (cls) {
        case RelationClass::Observational: return ChainLevel::FC;
        case RelationClass::Suggestive: return ChainLevel::IC;
        case RelationClass::Conclusive: return ChainLevel::LRC;
    }
    return ChainLevel::FC;
}

const RelationLexicon& RelationLexicon::builtin() {
    static const RelationLexicon lexicon = from_json(nlohmann::json::parse(kRelationLexiconJson));
    return lexicon;
}

RelationLexicon RelationLexicon::from_json(const nlohmann::json& j) {
    RelationLexicon lexicon;
    const std::pair<const char*, RelationClass> classes[] = {
        {"observational", RelationClass::Observational},
        {"suggestive", RelationClass::Suggestive},
        {"conclusive", RelationClass::Conclusive}};
    for (const auto& [key, cls] : classes) {
        if (!j.contains(key)) continue;
        if (!j.at(key).is_array()) throw Error("SchemaError", std::string("lexicon class is not a list: ") + key);
        for (const auto& phrase : j.at(key)) lexicon.add(phrase.get<std::string>(), cls);
    }
    return lexicon;
}

void RelationLexicon::add(std::string_view phrase, RelationClass cls) {
    auto key = text::normalize_phrase(phrase);
    if (key.empty()) return;
    auto [it, inserted] = phrases_.emplace(key, cls);
    if (!inserted && it->second != cls) {
        throw Error("SchemaError", "relation phrase listed in two classes: " + key, {{"phrase", key}});
    }
}

std::optional<RelationClass> RelationLexicon::lookup(std::string_view phrase) const {
    auto it = phrases_.find(text::normalize_phrase(phrase));
    if (it == phrases_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationClass> RelationLexicon::lookup_contained(std::string_view phrase) const {
    auto norm = text::normalize_phrase(phrase);
    const std::string* best = nullptr;
    std::optional<RelationClass> found;
    // std::map iteration is lexicographic, so ties on length resolve deterministically.
    for (const auto& [key, cls] : phrases_) {
        if (best && key.size() <= best->size()) continue;
        if (text::find_whole_word(norm, key) != std::string::npos) {
            best = &key;
            found = cls;
        }
    }
    return found;
}

std::size_t RelationLexicon::count(RelationClass cls) const {
    return static_cast<std::size_t>(
        std::count_if(phrases_.begin(), phrases_.end(), [cls](const auto& kv) { return kv.second == cls; }));
}

nlohmann::json RelationLexicon::to_json() const {
    nlohmann::json j = {{"observational", nlohmann::json::array()},
                        {"suggestive", nlohmann::json::array()},
                        {"conclusive", nlohmann::json::array()}};
    for (const auto& [key, cls] : phrases_) {
        switch (cls) {
            case RelationClass::Observational: j["observational"].push_back(key); break;
            case RelationClass::Suggestive: j["suggestive"].push_back(key); break;
            case RelationClass::Conclusive: j["conclusive"].push_back(key); break;
        }
    }
    return j;
}

LevelAssignment classify_level(const Triplet& triplet, const RelationLexicon& lexicon) {
    if (auto cls = lexicon.lookup(triplet.relation)) return {level_for(*cls), false};
    if (auto cls = lexicon.lookup_contained(triplet.relation)) return {level_for(*cls), false};
    return {ChainLevel::FC, true};
}

std::map<ChainLevel, ReasoningChain> build_chains(const std::vector<Triplet>& triplets,
                                                  const RelationLexicon& lexicon) {
    std::map<ChainLevel, ReasoningChain> chains;
    for (auto level : kAllLevels) chains[level] = ReasoningChain{level, {}, std::nullopt, true};
    for (const auto& t : triplets) {
        auto& chain = chains[classify_level(t, lexicon).level];
        chain.triplets.push_back(t);
        chain.absent = false;
    }
    return chains;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Organ organ) {
    switch (organ) {
        case Organ::Liver: return "liver";
        case Organ::Pancreas: return "pancreas";
        case Organ::Stomach: return "stomach";
        case Organ::Colon: return "colon";
        case Organ::Esophagus: return "esophagus";
    }
    return "liver";
}

std::string_view to_string(TaskType task) {
    switch (task) {
        case TaskType::Localization: return "Localization";
        case TaskType::LesionAttribute: return "LesionAttribute";
        case TaskType::TnmPrediction: return "TnmPrediction";
        case TaskType::CotReport: return "CotReport";
    }
    return "Localization";
}

std::string_view to_string(AnswerFormat format) {
    return format == AnswerFormat::MultipleChoice ? "multiple-choice" : "open-ended";
}

Organ parse_organ(std::string_view s) {
    auto lower = text::to_lower(text::trim_view(s));
    for (auto organ : kTaskOrgans) {
        if (lower == to_string(organ)) return organ;
    }
    throw Error("UnknownOrgan", "not one of the five task organs: " + std::string(s), {{"value", s}});
}

TaskType parse_task(std::string_view s) {
    for (auto task : kTaskTypes) {
        if (s == to_string(task)) return task;
    }
    throw Error("SchemaError", "unknown task type: " + std::string(s), {{"value", s}});
}

AnswerFormat parse_format(std::string_view s) {
    if (s == "multiple-choice") return AnswerFormat::MultipleChoice;
    if (s == "open-ended") return AnswerFormat::OpenEnded;
    throw Error("SchemaError", "unknown answer format: " + std::string(s), {{"value", s}});
}

void validate_vqa(const VqaRecord& r) {
    if (text::is_blank(r.id)) throw Error("SchemaError", "VQA record without id");
    if (r.format != AnswerFormat::MultipleChoice) return;
    std::set<std::string> distinct;
    for (const auto& o : r.options) distinct.insert(text::normalize_phrase(o));
    if (distinct.size() < 2 || distinct.size() != r.options.size()) {
        throw Error("SchemaError", "multiple-choice record needs >= 2 distinct options", {{"id", r.id}});
    }
    if (std::find(r.options.begin(), r.options.end(), r.answer_gt) == r.options.end()) {
        throw Error("SchemaError", "answer_gt is not among the options", {{"id", r.id}});
    }
}

void validate_corpus(const std::vector<VqaRecord>& records) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        validate_vqa(r);
        if (!seen.insert(r.id).second) throw Error("DuplicateId", "duplicate VQA id: " + r.id, {{"id", r.id}});
    }
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Triplet& t) {
    j = {{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}};
}

void from_json(const nlohmann::json& j, Triplet& t) {
    t = make_triplet(j.at("subject").get<std::string>(), j.at("relation").get<std::string>(),
                     j.at("object").get<std::string>());
}

void to_json(nlohmann::json& j, const ReasoningChain& c) {
    j = {{"level", to_string(c.level)}, {"triplets", c.triplets}, {"absent", c.absent}};
    if (c.source_span) {
        j["source_span"] = {c.source_span->begin, c.source_span->end};
    } else {
        j["source_span"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, ReasoningChain& c) {
    c.level = parse_chain_level(j.at("level").get<std::string>());
    c.triplets = j.value("triplets", std::vector<Triplet>{});
    c.absent = j.value("absent", c.triplets.empty());
    c.source_span.reset();
    if (j.contains("source_span") && !j.at("source_span").is_null()) {
        const auto& s = j.at("source_span");
        c.source_span = SourceSpan{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()};
    }
    validate_chain(c);
}

void to_json(nlohmann::json& j, const CoTRecord& r) {
    nlohmann::json chains = nlohmann::json::object();
    for (const auto& [level, chain] : r.chains) chains[std::string(to_string(level))] = chain;
    j = {{"reasoning_text", r.reasoning_text},
         {"summary_text", r.summary_text},
         {"chains", chains},
         {"marker_missing", r.marker_missing}};
}

void from_json(const nlohmann::json& j, CoTRecord& r) {
    r.reasoning_text = j.value("reasoning_text", std::string{});
    r.summary_text = j.value("summary_text", std::string{});
    r.marker_missing = j.value("marker_missing", false);
    r.chains.clear();
    if (j.contains("chains")) {
        for (const auto& [key, value] : j.at("chains").items()) {
            auto level = parse_chain_level(key);
            auto chain = value.get<ReasoningChain>();
            if (chain.level != level) {
                throw Error("SchemaError", "chain stored under the wrong level key", {{"key", key}});
            }
            r.chains[level] = std::move(chain);
        }
    }
}

void to_json(nlohmann::json& j, const VqaRecord& r) {
    j = {{"id", r.id},
         {"patient_id", r.patient_id},
         {"organ", to_string(r.organ)},
         {"task", to_string(r.task)},
         {"subtask", r.subtask},
         {"format", to_string(r.format)},
         {"question", r.question},
         {"answer_gt", r.answer_gt},
         {"options", r.options},
         {"cot_gt", nullptr},
         {"usable", nullptr},
         {"quality", nullptr}};
    if (r.cot_gt) j["cot_gt"] = *r.cot_gt;
    if (r.usable) j["usable"] = *r.usable;
    if (r.quality) j["quality"] = *r.quality;
}

void from_json(const nlohmann::json& j, VqaRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.patient_id = j.value("patient_id", std::string{});
    r.organ = parse_organ(j.at("organ").get<std::string>());
    r.task = parse_task(j.at("task").get<std::string>());
    r.subtask = j.value("subtask", std::string{});
    r.format = parse_format(j.at("format").get<std::string>());
    r.question = j.value("question", std::string{});
    r.answer_gt = j.at("answer_gt").get<std::string>();
    r.options = j.value("options", std::vector<std::string>{});
    r.cot_gt.reset();
    r.usable.reset();
    r.quality.reset();
    if (j.contains("cot_gt") && !j.at("cot_gt").is_null()) r.cot_gt = j.at("cot_gt").get<CoTRecord>();
    if (j.contains("usable") && !j.at("usable").is_null()) r.usable = j.at("usable").get<bool>();
    if (j.contains("quality") && !j.at("quality").is_null()) r.quality = j.at("quality").get<std::string>();
    validate_vqa(r);
}

}  // namespace chaineval
