#include "chaineval/data_engine.hpp"

#include "chaineval/accuracy.hpp"
#include "chaineval/rubric.hpp"
#include "chaineval/text_util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace chaineval {

using nlohmann::json;

namespace {

const char* const kOrganFields[] = {"location", "shape", "margin", "density", "count"};

std::string scalar_text(const json& v) {
    if (v.is_null()) return {};
    if (v.is_string()) return text::trim(v.get<std::string>());
    return v.dump();
}

std::string normalize_tnm(char axis, const json& v) {
    std::string code = scalar_text(v);
    if (code.empty()) return {};
    if (code.size() == 2 && (code[1] == 'X')) code[1] = 'x';
    if (!code.empty()) code[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(code[0])));
    if (!tnm_code_valid(axis, code))
        throw Error("TnmPatternError", std::string("invalid ") + axis + " stage code: " + scalar_text(v),
                    {{"axis", std::string(1, axis)}, {"value", scalar_text(v)}});
    return code;
}

std::optional<int> parse_age(const json& v) {
    if (v.is_null()) return std::nullopt;
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number()) return static_cast<int>(std::lround(v.get<double>()));
    if (v.is_string()) {
        auto s = text::trim(v.get<std::string>());
        std::size_t i = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i == 0) return std::nullopt;
        return std::stoi(s.substr(0, i));
    }
    throw Error("SchemaError", "patient.age has an unsupported type");
}

StructuredReport report_from_json(const json& j) {
    if (!j.is_object()) throw Error("SchemaError", "structured report must be a JSON object");
    StructuredReport r;
    r.patient_id = j.contains("patient_id") ? scalar_text(j["patient_id"]) : std::string{};
    json extras = json::object();
    for (const auto& [k, v] : j.items()) {
        if (k != "patient_id" && k != "patient" && k != "organs" && k != "pathology") extras[k] = scalar_text(v);
    }
    if (j.contains("patient")) {
        const auto& p = j["patient"];
        if (!p.is_object()) throw Error("SchemaError", "patient must be an object");
        if (p.contains("age")) r.patient.age = parse_age(p["age"]);
        if (p.contains("gender")) r.patient.gender = scalar_text(p["gender"]);
    }
    if (!j.contains("organs") || !j["organs"].is_array())
        throw Error("SchemaError", "structured report needs an organs array");
    for (const auto& o : j["organs"]) {
        if (!o.is_object() || !o.contains("organ")) throw Error("SchemaError", "organ entry needs an organ name");
        OrganFindings f;
        f.organ = parse_organ(scalar_text(o["organ"]));
        f.location = o.contains("location") ? scalar_text(o["location"]) : "";
        f.shape = o.contains("shape") ? scalar_text(o["shape"]) : "";
        f.margin = o.contains("margin") ? scalar_text(o["margin"]) : "";
        f.density = o.contains("density") ? scalar_text(o["density"]) : "";
        f.count = o.contains("count") ? scalar_text(o["count"]) : "";
        if (o.contains("other")) {
            if (o["other"].is_object()) {
                for (const auto& [k, v] : o["other"].items()) f.other[k] = scalar_text(v);
            } else if (!o["other"].is_null()) {
                f.other["note"] = scalar_text(o["other"]);
            }
        }
        for (const auto& [k, v] : o.items()) {
            bool known = k == "organ" || k == "other";
            for (auto name : kOrganFields) known = known || k == name;
            if (!known) f.other[k] = scalar_text(v);
        }
        r.organs.push_back(std::move(f));
    }
    if (!r.organs.empty())
        for (const auto& [k, v] : extras.items()) r.organs.front().other["report." + k] = v;
    if (j.contains("pathology")) {
        const auto& p = j["pathology"];
        if (!p.is_object()) throw Error("SchemaError", "pathology must be an object");
        r.pathology.t = p.contains("t") ? normalize_tnm('T', p["t"]) : "";
        r.pathology.n = p.contains("n") ? normalize_tnm('N', p["n"]) : "";
        r.pathology.m = p.contains("m") ? normalize_tnm('M', p["m"]) : "";
        r.pathology.conclusion = p.contains("conclusion") ? scalar_text(p["conclusion"]) : "";
    }
    r.validate();
    return r;
}

json findings_json(const StructuredReport& r, bool with_pathology) {
    json j;
    to_json(j, r);
    if (!with_pathology) j.erase("pathology");
    j.erase("patient_id");
    return j;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Structured reports
// ---------------------------------------------------------------------------

bool tnm_code_valid(char axis, std::string_view code) {
    if (code.size() != 2 || code[0] != axis) return false;
    char c = code[1];
    if (c == 'x') return true;
    switch (axis) {
        case 'T': return c >= '0' && c <= '4';
        case 'N': return c >= '0' && c <= '3';
        case 'M': return c == '0' || c == '1';
        default: return false;
    }
}

void StructuredReport::validate() const {
    if (organs.empty()) throw Error("SchemaError", "structured report has no organ entry");
    const std::pair<char, const std::string*> codes[] = {{'T', &pathology.t}, {'N', &pathology.n}, {'M', &pathology.m}};
    for (const auto& [axis, code] : codes) {
        if (!code->empty() && !tnm_code_valid(axis, *code))
            throw Error("TnmPatternError", std::string("invalid ") + axis + " stage code: " + *code,
                        {{"axis", std::string(1, axis)}, {"value", *code}});
    }
}

void to_json(json& j, const StructuredReport& r) {
    json organs = json::array();
    for (const auto& f : r.organs) {
        organs.push_back({{"organ", std::string(to_string(f.organ))},
                          {"location", f.location},
                          {"shape", f.shape},
                          {"margin", f.margin},
                          {"density", f.density},
                          {"count", f.count},
                          {"other", f.other}});
    }
    j = {{"patient_id", r.patient_id},
         {"patient", {{"age", r.patient.age ? json(*r.patient.age) : json()}, {"gender", r.patient.gender}}},
         {"organs", organs},
         {"pathology",
          {{"t", r.pathology.t}, {"n", r.pathology.n}, {"m", r.pathology.m}, {"conclusion", r.pathology.conclusion}}}};
}

void from_json(const json& j, StructuredReport& r) { r = report_from_json(j); }

std::string build_extraction_prompt_structured(std::string_view report_text, std::string_view pathology_text) {
    if (text::is_blank(report_text)) throw Error("EmptyInput", "report text is empty");
    std::ostringstream p;
    p << "You are a radiology information extractor. Read the CT report and the pathology report below and "
         "return one JSON object with standardized terminology and nothing else.\n\n"
         "Required shape:\n"
         "{\n"
         "  \"patient\": {\"age\": <years or null>, \"gender\": \"<male|female|unknown>\"},\n"
         "  \"organs\": [\n"
         "    {\"organ\": \"<liver|pancreas|stomach|colon|esophagus>\",\n"
         "     \"location\": \"<substructure>\", \"shape\": \"...\", \"margin\": \"...\",\n"
         "     \"density\": \"...\", \"count\": \"...\", \"other\": {\"<field>\": \"...\"}}\n"
         "  ],\n"
         "  \"pathology\": {\"t\": \"T0-T4|Tx\", \"n\": \"N0-N3|Nx\", \"m\": \"M0|M1|Mx\", \"conclusion\": \"...\"}\n"
         "}\n\n"
         "Use one organ entry per involved organ. Leave a field as \"\" when the report does not state it.\n\n"
         "CT report:\n"
      << report_text << "\n\nPathology report:\n"
      << (text::is_blank(pathology_text) ? std::string_view("(none)") : pathology_text) << "\n";
    return p.str();
}

StructuredReport parse_structured_report(std::string_view judge_text) {
    auto obj = extract_first_json_object(judge_text);
    if (!obj) throw Error("NoJsonFound", "extractor output contains no JSON object");
    return report_from_json(json::parse(*obj));
}

StructuredReport extract_structured_features(std::string_view report_text, JudgeClient& judge,
                                             std::string_view pathology_text) {
    auto prompt = build_extraction_prompt_structured(report_text, pathology_text);
    auto resp = judge.complete(make_request(AgentRole::Extractor, std::move(prompt)));
    return parse_structured_report(resp.text);
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

std::string_view to_string(RetryStrategy s) {
    return s == RetryStrategy::ExpandOrganRegion ? "ExpandOrganRegion" : "ProvideSuspectedCause";
}

RetryStrategy pick_retry_strategy(std::mt19937_64& rng) {
    return (rng() >> 63) == 0 ? RetryStrategy::ExpandOrganRegion : RetryStrategy::ProvideSuspectedCause;
}

std::string_view to_string(EngineState s) {
    switch (s) {
        case EngineState::FeatureExtract: return "FeatureExtract";
        case EngineState::Reason: return "Reason";
        case EngineState::Calibrate: return "Calibrate";
        case EngineState::Summarize: return "Summarize";
        case EngineState::Done: return "Done";
        case EngineState::Failed: return "Failed";
    }
    return "?";
}

EngineState parse_engine_state(std::string_view s) {
    for (auto st : {EngineState::FeatureExtract, EngineState::Reason, EngineState::Calibrate, EngineState::Summarize,
                    EngineState::Done, EngineState::Failed})
        if (to_string(st) == s) return st;
    throw Error("SchemaError", "unknown engine state: " + std::string(s));
}

bool transition_allowed(EngineState from, EngineState to) {
    using S = EngineState;
    if (from == S::Done || from == S::Failed) return false;
    if (to == S::Failed) return true;
    switch (from) {
        case S::FeatureExtract: return to == S::Reason;
        case S::Reason: return to == S::Calibrate;
        case S::Calibrate: return to == S::Reason || to == S::Summarize;
        case S::Summarize: return to == S::Reason || to == S::Done;
        default: return false;
    }
}

std::string EngineTrace::to_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        json j = {{"patient_id", patient_id},
                  {"step", i},
                  {"state", std::string(to_string(e.state))},
                  {"role", e.role},
                  {"key", e.key},
                  {"outcome", e.outcome},
                  {"strategy", e.strategy ? json(std::string(to_string(*e.strategy))) : json()},
                  {"budget",
                   {{"reason_calls", e.reason_calls},
                    {"calibration_retries", e.calibration_retries},
                    {"summarizer_reloops", e.summarizer_reloops}}}};
        out += j.dump() + "\n";
    }
    return out;
}

void EngineConfig::validate() const {
    if (max_calibration_retries < 0 || max_summarizer_reloops < 0)
        throw Error("InvalidConfig", "engine budgets must be non-negative",
                    {{"max_calibration_retries", max_calibration_retries},
                     {"max_summarizer_reloops", max_summarizer_reloops}});
}

std::vector<Organ> neighbouring_organs(Organ organ) {
    switch (organ) {
        case Organ::Liver: return {Organ::Stomach, Organ::Pancreas};
        case Organ::Pancreas: return {Organ::Stomach, Organ::Liver, Organ::Colon};
        case Organ::Stomach: return {Organ::Esophagus, Organ::Pancreas, Organ::Liver, Organ::Colon};
        case Organ::Colon: return {Organ::Stomach, Organ::Pancreas};
        case Organ::Esophagus: return {Organ::Stomach};
    }
    return {};
}

std::string build_reason_prompt(const StructuredReport& report, std::string_view kg_context,
                                const std::vector<std::string>& augmentations) {
    std::ostringstream p;
    p << "You are a radiologist. Using the structured CT findings and the diagnostic knowledge below, write a "
         "step-by-step reasoning process that goes from organ localization to feature observation to pathological "
         "correlation, then give the conclusion on a final line starting with \"Thus, the answer is\".\n\n"
         "Structured findings:\n"
      << findings_json(report, false).dump(2) << "\n\nDiagnostic knowledge:\n"
      << (kg_context.empty() ? std::string_view("(none retrieved)") : kg_context) << "\n";
    for (std::size_t i = 0; i < augmentations.size(); ++i)
        p << "\nRevision note " << (i + 1) << ":\n" << augmentations[i] << "\n";
    return p.str();
}

std::string build_calibration_prompt(const StructuredReport& report, std::string_view cot_text) {
    std::ostringstream p;
    p << "You are a logic calibrator. Check the reasoning below against the structured findings: every claim "
         "must be supported by a finding, and each step must follow from the previous ones.\n"
         "Reply with a line \"VERDICT: correct\" or \"VERDICT: incorrect\" followed by the issues you found.\n\n"
         "Structured findings:\n"
      << findings_json(report, false).dump(2) << "\n\nReasoning:\n"
      << cot_text << "\n";
    return p.str();
}

std::string build_summary_check_prompt(const StructuredReport& report, std::string_view cot_text) {
    std::ostringstream p;
    p << "You are a summarizer. Decide whether the reasoning and its conclusion are consistent with the "
         "pathology result.\n"
         "Reply with a line \"VERDICT: correct\" when consistent or \"VERDICT: incorrect\" when not, followed by "
         "the inconsistency.\n\n"
         "Pathology: T=" << (report.pathology.t.empty() ? "?" : report.pathology.t)
      << " N=" << (report.pathology.n.empty() ? "?" : report.pathology.n)
      << " M=" << (report.pathology.m.empty() ? "?" : report.pathology.m) << "\nConclusion: "
      << report.pathology.conclusion << "\n\nReasoning:\n"
      << cot_text << "\n";
    return p.str();
}

std::vector<VqaRecord> emit_vqa(const StructuredReport& report, const CoTRecord& cot) {
    std::vector<VqaRecord> out;
    std::vector<std::string> organ_options;
    for (auto o : kTaskOrgans) organ_options.emplace_back(to_string(o));

    auto base = [&](const OrganFindings& f, TaskType task, std::string subtask) {
        VqaRecord r;
        r.patient_id = report.patient_id;
        r.organ = f.organ;
        r.task = task;
        r.subtask = std::move(subtask);
        r.id = report.patient_id + ":" + std::string(to_string(f.organ)) + ":" + r.subtask;
        r.cot_gt = cot;
        return r;
    };
    auto open = [&](const OrganFindings& f, TaskType task, std::string subtask, std::string question,
                    std::string answer) {
        if (text::is_blank(answer)) return;
        auto r = base(f, task, std::move(subtask));
        r.format = AnswerFormat::OpenEnded;
        r.question = std::move(question);
        r.answer_gt = std::move(answer);
        out.push_back(std::move(r));
    };
    auto choice = [&](const OrganFindings& f, TaskType task, std::string subtask, std::string question,
                      std::string answer, std::vector<std::string> options) {
        if (answer.empty()) return;
        if (std::find(options.begin(), options.end(), answer) == options.end()) options.push_back(answer);
        auto r = base(f, task, std::move(subtask));
        r.format = AnswerFormat::MultipleChoice;
        r.question = std::move(question);
        r.answer_gt = std::move(answer);
        r.options = std::move(options);
        out.push_back(std::move(r));
    };

    for (const auto& f : report.organs) {
        const std::string organ(to_string(f.organ));
        choice(f, TaskType::Localization, "organ_position", "Which organ harbors the lesion?", organ, organ_options);
        open(f, TaskType::Localization, "tumor_position", "Where is the lesion located within the " + organ + "?",
             f.location);
        if (f.other.contains("segment"))
            open(f, TaskType::LesionAttribute, "segment_location", "Which segment of the " + organ + " is involved?",
                 f.other["segment"].get<std::string>());
        open(f, TaskType::LesionAttribute, "shape", "What is the shape of the " + organ + " lesion?", f.shape);
        open(f, TaskType::LesionAttribute, "boundary", "How is the margin of the " + organ + " lesion?", f.margin);
        open(f, TaskType::LesionAttribute, "density", "What is the density of the " + organ + " lesion?", f.density);
        open(f, TaskType::LesionAttribute, "count", "How many lesions are seen in the " + organ + "?", f.count);
        std::vector<std::string> others;
        for (const auto& [k, v] : f.other.items())
            if (k != "segment" && k.rfind("report.", 0) != 0 && v.is_string() && !text::is_blank(v.get<std::string>()))
                others.push_back(k + ": " + v.get<std::string>());
        open(f, TaskType::LesionAttribute, "others", "Describe any other findings of the " + organ + " lesion.",
             join(others, "; "));
        choice(f, TaskType::TnmPrediction, "tumor", "What is the T stage of the " + organ + " tumor?",
               report.pathology.t, {"T1", "T2", "T3", "T4"});
        choice(f, TaskType::TnmPrediction, "node", "What is the N stage of the " + organ + " tumor?",
               report.pathology.n, {"N0", "N1", "N2", "N3"});
        choice(f, TaskType::TnmPrediction, "metastasis", "What is the M stage of the " + organ + " tumor?",
               report.pathology.m, {"M0", "M1"});
        open(f, TaskType::CotReport, "cot_report",
             "Analyze the " + organ + " on this CT and give a diagnostic conclusion.", cot.summary_text);
    }
    return out;
}

CaseResult run_case(const StructuredReport& report, JudgeClient& judge, const EngineConfig& config) {
    config.validate();
    CaseResult result;
    EngineTrace& trace = result.trace;
    trace.patient_id = report.patient_id;
    std::mt19937_64 rng(config.rng_seed ^ fnv1a(report.patient_id));

    EngineState state = EngineState::FeatureExtract;
    auto record = [&](EngineState s, std::string role, std::string key, std::string outcome,
                      std::optional<RetryStrategy> strategy = std::nullopt) {
        if (s != state && !transition_allowed(state, s))
            throw Error("InvariantViolation", "illegal engine transition " + std::string(to_string(state)) + " -> " +
                                                  std::string(to_string(s)));
        state = s;
        trace.events.push_back({s, std::move(role), std::move(key), std::move(outcome), strategy, trace.reason_calls,
                                trace.calibration_retries, trace.summarizer_reloops});
        trace.final_state = s;
    };
    auto fail = [&](std::string why, std::string detail) {
        trace.failure = why;
        record(EngineState::Failed, "", "", why + (detail.empty() ? "" : ": " + detail));
        result.records.clear();
        return result;
    };

    try {
        report.validate();
    } catch (const Error& e) {
        return fail(e.kind(), e.what());
    }
    record(EngineState::FeatureExtract, "", "", "structured report ready");

    std::vector<std::string> scope;
    for (const auto& f : report.organs) scope.emplace_back(to_string(f.organ));
    std::size_t hops = config.kg_hops;
    std::vector<std::string> seeds;
    for (const auto& f : report.organs) {
        for (const auto* s : {&f.location, &f.shape, &f.margin, &f.density})
            if (!s->empty()) seeds.push_back(*s);
        seeds.emplace_back(to_string(f.organ));
    }
    std::vector<std::string> augmentations;
    int loop_retries = 0;

    try {
        for (;;) {
            std::string context;
            if (config.kg) context = render_context(config.kg->retrieve_scoped(seeds, scope, hops).edges);
            ++trace.reason_calls;
            auto reason = judge.complete(
                make_request(AgentRole::Reasoner, build_reason_prompt(report, context, augmentations)));
            record(EngineState::Reason, "reasoner", reason.cache_key, "ok");

            std::optional<CoTRecord> cot;
            bool passed = false;
            std::string issue;
            std::string cal_key;
            if (text::is_blank(reason.text)) {
                issue = "empty reasoning";
            } else if (cot = segment_cot(reason.text); cot->marker_missing) {
                issue = "missing summary marker";
            } else {
                auto cal = judge.complete(
                    make_request(AgentRole::Calibrator, build_calibration_prompt(report, reason.text)));
                cal_key = cal.cache_key;
                auto v = parse_verdict(cal.text);
                passed = v.correct;
                issue = v.rationale;
            }
            if (!passed) {
                if (loop_retries >= config.max_calibration_retries) {
                    record(EngineState::Calibrate, cal_key.empty() ? "" : "calibrator", cal_key, "fail");
                    return fail("BudgetExhausted", "calibration retries exhausted");
                }
                ++loop_retries;
                ++trace.calibration_retries;
                auto strategy = pick_retry_strategy(rng);
                record(EngineState::Calibrate, cal_key.empty() ? "" : "calibrator", cal_key, "fail", strategy);
                if (strategy == RetryStrategy::ExpandOrganRegion) {
                    std::set<std::string> widened(scope.begin(), scope.end());
                    for (const auto& f : report.organs)
                        for (auto n : neighbouring_organs(f.organ)) widened.emplace(to_string(n));
                    scope.assign(widened.begin(), widened.end());
                    ++hops;
                    augmentations.push_back("Expand the analysis to the surrounding organ region (" +
                                            join(scope, ", ") +
                                            ") and re-examine the findings with the widened knowledge context.");
                } else {
                    augmentations.push_back("The previous reasoning was flagged. Suspected cause: " +
                                            (text::is_blank(issue) ? std::string("unspecified") : issue) +
                                            "\nRevise the reasoning to resolve it.");
                }
                continue;
            }
            record(EngineState::Calibrate, "calibrator", cal_key, "pass");

            auto sum = judge.complete(
                make_request(AgentRole::Summarizer, build_summary_check_prompt(report, reason.text)));
            auto sv = parse_verdict(sum.text);
            if (sv.correct) {
                record(EngineState::Summarize, "summarizer", sum.cache_key, "consistent");
                result.records = emit_vqa(report, *cot);
                record(EngineState::Done, "", "", std::to_string(result.records.size()) + " records");
                return result;
            }
            if (trace.summarizer_reloops >= config.max_summarizer_reloops) {
                record(EngineState::Summarize, "summarizer", sum.cache_key, "inconsistent");
                return fail("BudgetExhausted", "summarizer re-loops exhausted");
            }
            ++trace.summarizer_reloops;
            loop_retries = 0;
            record(EngineState::Summarize, "summarizer", sum.cache_key, "inconsistent");
            augmentations.push_back("The conclusion was inconsistent with pathology: " +
                                    (text::is_blank(sv.rationale) ? std::string("unspecified") : sv.rationale) +
                                    "\nReason again from the findings.");
        }
    } catch (const Error& e) {
        return fail(e.kind(), e.what());
    }
}

std::vector<CaseInput> read_cases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open cases file: " + path, {{"path", path}});
    std::vector<CaseInput> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("patient_id") || !j.contains("report_text"))
            throw Error("SchemaError", "bad case line " + std::to_string(lineno), {{"line", lineno}});
        out.push_back({scalar_text(j["patient_id"]), j["report_text"].get<std::string>(),
                       j.value("pathology_text", std::string{})});
    }
    return out;
}

CaseResult run_case_from_text(const CaseInput& input, JudgeClient& judge, const EngineConfig& config) {
    StructuredReport report;
    std::string key;
    try {
        auto prompt = build_extraction_prompt_structured(input.report_text, input.pathology_text);
        auto resp = judge.complete(make_request(AgentRole::Extractor, std::move(prompt)));
        key = resp.cache_key;
        report = parse_structured_report(resp.text);
    } catch (const Error& e) {
        CaseResult r;
        r.trace.patient_id = input.patient_id;
        r.trace.failure = e.kind();
        r.trace.events.push_back({EngineState::FeatureExtract, "extractor", key, "error", std::nullopt, 0, 0, 0});
        r.trace.events.push_back({EngineState::Failed, "", "", e.kind() + ": " + e.what(), std::nullopt, 0, 0, 0});
        r.trace.final_state = EngineState::Failed;
        return r;
    }
    report.patient_id = input.patient_id;
    auto result = run_case(report, judge, config);
    if (!result.trace.events.empty()) {
        result.trace.events.front().role = "extractor";
        result.trace.events.front().key = key;
    }
    return result;
}

std::vector<CaseResult> run_cases(const std::vector<CaseInput>& inputs, JudgeClient& judge,
                                  const EngineConfig& config, std::size_t parallelism) {
    std::vector<CaseResult> results(inputs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) results[i] = run_case_from_text(inputs[i], judge, config);
    };
    std::size_t n = std::max<std::size_t>(1, std::min(parallelism, inputs.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return results;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw Error("InvariantViolation", "bounded_draw needs a positive bound");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

Split patient_split(const std::vector<std::string>& ids, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("InvalidRatio", "ratio must lie in (0, 1)", {{"ratio", ratio}});
    std::set<std::string> seen;
    std::vector<std::string> dups;
    for (const auto& id : ids)
        if (!seen.insert(id).second) dups.push_back(id);
    if (!dups.empty()) throw Error("DuplicateIds", "patient ids are not unique", {{"duplicates", dups}});

    std::vector<std::string> order = ids;
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded_draw(rng, i)]);

    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(order.size()) + 1e-9));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

}  // namespace chaineval
