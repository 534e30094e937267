#include "chaineval/accuracy.hpp"

#include "chaineval/text_util.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

namespace chaineval {

namespace {

std::string strip_answer_prefix(std::string_view raw) {
    static const char* const prefixes[] = {"thus, the answer is", "therefore, the answer is", "so, the answer is",
                                           "the answer is", "answer:", "answer is"};
    std::string s = text::trim(raw);
    auto lower = text::to_lower(s);
    for (const char* p : prefixes) {
        std::string_view prefix(p);
        if (lower.compare(0, prefix.size(), prefix) == 0) {
            s = text::trim(std::string_view(s).substr(prefix.size()));
            if (!s.empty() && s.front() == ':') s = text::trim(std::string_view(s).substr(1));
            break;
        }
    }
    return s;
}

std::optional<std::size_t> label_index(std::string_view label, std::size_t option_count) {
    if (label.size() != 1) return std::nullopt;
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    if (c < 'A' || c > 'Z') return std::nullopt;
    auto idx = static_cast<std::size_t>(c - 'A');
    if (idx >= option_count) return std::nullopt;
    return idx;
}

std::optional<std::size_t> exact_text_index(const std::string& norm, const std::vector<std::string>& options) {
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (normalize_answer(options[i]) == norm) return i;
    }
    return std::nullopt;
}

[[noreturn]] void ambiguous(std::string_view answer, const std::vector<std::size_t>& matches) {
    nlohmann::json labels = nlohmann::json::array();
    for (auto i : matches) labels.push_back(option_label(i));
    throw Error("AmbiguousPrediction", "answer matches more than one option: " + std::string(answer),
                {{"answer", answer}, {"options", labels}});
}

std::string key_string(const std::map<std::string, std::string>& key) {
    std::string out;
    for (const auto& [field, value] : key) {
        if (!out.empty()) out += ' ';
        out += field + "=" + value;
    }
    return out;
}

std::string_view field_name(GroupField f) {
    switch (f) {
        case GroupField::Model: return "model";
        case GroupField::Task: return "task";
        case GroupField::Subtask: return "subtask";
        case GroupField::Organ: return "organ";
    }
    return "model";
}

const std::string& field_value(const Verdict& v, GroupField f) {
    switch (f) {
        case GroupField::Model: return v.model;
        case GroupField::Task: return v.task;
        case GroupField::Subtask: return v.subtask;
        case GroupField::Organ: return v.organ;
    }
    return v.model;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
    return text::normalize_phrase(s);
}

std::string option_label(std::size_t index) {
    return std::string(1, static_cast<char>('A' + index));
}

std::optional<std::size_t> resolve_option(std::string_view answer, const std::vector<std::string>& options) {
    const std::string raw = strip_answer_prefix(answer);
    if (raw.empty()) return std::nullopt;

    // "B", "(B)", "b) text", "B. text", "B: text"
    static const std::regex labelled(R"(^\(?([A-Za-z])(?:\)|\.|:|\s*$)\s*([\s\S]*)$)");
    std::smatch m;
    if (std::regex_match(raw, m, labelled)) {
        if (auto idx = label_index(m[1].str(), options.size())) {
            auto rest = normalize_answer(m[2].str());
            if (rest.empty()) return idx;
            auto by_text = exact_text_index(rest, options);
            if (by_text && *by_text != *idx) ambiguous(answer, {*idx, *by_text});
            return idx;
        }
    }

    const auto norm = normalize_answer(raw);
    if (auto idx = exact_text_index(norm, options)) return idx;

    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < options.size(); ++i) {
        auto opt = normalize_answer(options[i]);
        if (!opt.empty() && text::find_whole_word(norm, opt) != std::string::npos) hits.push_back(i);
    }
    // Drop options whose text is contained in another matched option's text.
    std::vector<std::size_t> maximal;
    for (auto i : hits) {
        auto oi = normalize_answer(options[i]);
        bool dominated = std::any_of(hits.begin(), hits.end(), [&](std::size_t j) {
            if (j == i) return false;
            auto oj = normalize_answer(options[j]);
            return oj.size() > oi.size() && text::find_whole_word(oj, oi) != std::string::npos;
        });
        if (!dominated) maximal.push_back(i);
    }
    if (maximal.size() > 1) ambiguous(answer, maximal);
    if (maximal.size() == 1) return maximal.front();
    return std::nullopt;
}

Verdict match_choice(std::string_view pred, std::string_view gt, const std::vector<std::string>& options) {
    if (options.empty()) throw Error("PreconditionViolation", "multiple-choice question without options");
    std::optional<std::size_t> gt_idx = label_index(text::trim_view(gt), options.size());
    if (!gt_idx) gt_idx = exact_text_index(normalize_answer(gt), options);
    if (!gt_idx) {
        throw Error("PreconditionViolation", "ground truth is not one of the options: " + std::string(gt),
                    {{"gt", gt}});
    }

    Verdict v;
    v.question_type = "multiple-choice";
    auto pred_idx = resolve_option(pred, options);
    v.correct = pred_idx == gt_idx;
    v.rationale = pred_idx ? "prediction resolved to option " + option_label(*pred_idx) + ", ground truth is option " +
                                 option_label(*gt_idx)
                           : "prediction matched no option";
    return v;
}

std::string build_semantic_prompt(std::string_view question, std::string_view gt_answer,
                                  std::string_view pred_answer) {
    if (text::is_blank(question) || text::is_blank(gt_answer) || text::is_blank(pred_answer)) {
        throw Error("EmptyInput", "question, reference answer and model answer must all be nonempty");
    }
    std::ostringstream out;
    out << "You are evaluating an open-ended answer to a question about a CT scan.\n"
           "Step 1: classify the question type as one of: ";
    for (std::size_t i = 0; i < kQuestionTypes.size(); ++i) out << (i ? ", " : "") << kQuestionTypes[i];
    out << ".\n"
           "Step 2: identify the key clinical focus of the question.\n"
           "Step 3: compare the model answer with the reference answer. Judge it correct if the essential "
           "medical meaning and main clinical finding are preserved, regardless of minor differences in "
           "expression or reasoning process; otherwise judge it incorrect.\n"
           "\n"
           "Question:\n"
        << question
        << "\n\nReference answer:\n"
        << gt_answer << "\n\nModel answer:\n"
        << pred_answer
        << "\n\n"
           "Reply in exactly this format:\n"
           "QUESTION_TYPE: <type>\n"
           "FOCUS: <key clinical focus>\n"
           "VERDICT: correct|incorrect\n"
           "<one short paragraph of rationale>\n";
    return out.str();
}

Verdict parse_verdict(std::string_view judge_text) {
    Verdict v;
    auto lines = text::split(judge_text, '\n');
    std::optional<std::size_t> verdict_line;
    std::string same_line_rest;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = text::trim_view(lines[i]);
        auto lower = text::to_lower(line);
        auto take = [&](std::string_view tag) -> std::optional<std::string> {
            if (lower.compare(0, tag.size(), tag) != 0) return std::nullopt;
            return text::trim(line.substr(tag.size()));
        };
        if (auto qt = take("question_type:"); qt && v.question_type.empty()) {
            v.question_type = *qt;
            continue;
        }
        if (auto value = take("verdict:")) {
            auto norm = text::normalize_phrase(*value);
            auto first_word = norm.substr(0, norm.find(' '));
            if (first_word == "correct" || first_word == "incorrect") {
                v.correct = first_word == "correct";
                verdict_line = i;
                auto pos = text::to_lower(*value).find(first_word);
                same_line_rest = text::trim(std::string_view(*value).substr(pos + first_word.size()));
                while (!same_line_rest.empty() && (same_line_rest.front() == '.' || same_line_rest.front() == '-' ||
                                                   same_line_rest.front() == ':')) {
                    same_line_rest = text::trim(std::string_view(same_line_rest).substr(1));
                }
                break;
            }
        }
    }
    if (!verdict_line) throw Error("NoVerdictLine", "judge output has no VERDICT: correct|incorrect line");

    std::string rationale = same_line_rest;
    for (std::size_t i = *verdict_line + 1; i < lines.size(); ++i) {
        if (!rationale.empty()) rationale += '\n';
        rationale += lines[i];
    }
    v.rationale = text::trim(rationale);
    if (v.question_type.empty()) v.question_type = "other";
    return v;
}

// ---------------------------------------------------------------------------

AccuracyTable aggregate_accuracy(const std::vector<Verdict>& verdicts, const std::vector<GroupField>& group_by,
                                 const std::vector<std::map<std::string, std::string>>& expected) {
    std::map<std::map<std::string, std::string>, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& v : verdicts) {
        std::map<std::string, std::string> key;
        for (auto f : group_by) key[std::string(field_name(f))] = field_value(v, f);
        auto& [total, correct] = counts[key];
        ++total;
        if (v.correct) ++correct;
    }

    AccuracyTable table;
    for (const auto& key : expected) {
        if (!counts.count(key)) table.notes.push_back("group " + key_string(key) + " has no verdicts; row omitted");
    }
    for (const auto& [key, tc] : counts) {
        AccuracyRow row;
        row.key = key;
        row.total = tc.first;
        row.correct = tc.second;
        row.accuracy = 100.0 * static_cast<double>(tc.second) / static_cast<double>(tc.first);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string AccuracyTable::to_csv() const {
    std::ostringstream out;
    std::vector<std::string> fields;
    if (!rows.empty()) {
        for (const auto& [field, value] : rows.front().key) fields.push_back(field);
    }
    for (const auto& f : fields) out << f << ',';
    out << "total,correct,accuracy\n";
    for (const auto& r : rows) {
        for (const auto& f : fields) out << r.key.at(f) << ',';
        out << r.total << ',' << r.correct << ',' << text::format_2dp(r.accuracy) << '\n';
    }
    return out.str();
}

const std::vector<SubtaskColumn>& benchmark_columns() {
    static const std::vector<SubtaskColumn> columns = {
        {"organ_position", "Position"},        {"tumor_position", "Position"},
        {"segment_location", "Lesion Attributes"}, {"shape", "Lesion Attributes"},
        {"boundary", "Lesion Attributes"},     {"density", "Lesion Attributes"},
        {"count", "Lesion Attributes"},        {"others", "Lesion Attributes"},
        {"tumor", "TNM Prediction"},           {"node", "TNM Prediction"},
        {"metastasis", "TNM Prediction"},      {"cot_report", "CoT-Report"},
    };
    return columns;
}

BenchmarkRow benchmark_row(std::string model, const std::map<std::string, double>& subtask_accuracy) {
    BenchmarkRow row;
    row.model = std::move(model);
    std::map<std::string, std::pair<double, int>> blocks;
    double sum = 0.0;
    int present = 0;
    for (const auto& col : benchmark_columns()) {
        auto it = subtask_accuracy.find(col.subtask);
        if (it == subtask_accuracy.end()) {
            row.subtask_accuracy.push_back(std::nullopt);
            row.notes.push_back("subtask " + col.subtask + " has no verdicts; column omitted");
            continue;
        }
        row.subtask_accuracy.push_back(it->second);
        auto& [block_sum, block_n] = blocks[col.block];
        block_sum += it->second;
        ++block_n;
        sum += it->second;
        ++present;
    }
    for (const auto& [block, acc] : blocks) row.block_mean[block] = acc.first / acc.second;
    if (present) row.average = sum / present;
    for (const auto& [name, value] : subtask_accuracy) {
        bool known = std::any_of(benchmark_columns().begin(), benchmark_columns().end(),
                                 [&](const SubtaskColumn& c) { return c.subtask == name; });
        if (!known) row.notes.push_back("subtask " + name + " is not a benchmark column; ignored");
    }
    return row;
}

std::vector<BenchmarkRow> benchmark_table(const std::vector<Verdict>& verdicts) {
    auto table = aggregate_accuracy(verdicts, {GroupField::Model, GroupField::Subtask});
    std::map<std::string, std::map<std::string, double>> per_model;
    for (const auto& r : table.rows) per_model[r.key.at("model")][r.key.at("subtask")] = r.accuracy;
    std::vector<BenchmarkRow> rows;
    for (const auto& [model, accs] : per_model) rows.push_back(benchmark_row(model, accs));
    return rows;
}

std::string benchmark_table_csv(const std::vector<BenchmarkRow>& rows) {
    std::ostringstream out;
    out << "model";
    for (const auto& c : benchmark_columns()) out << ',' << c.subtask;
    out << ",position_mean,lesion_attributes_mean,tnm_prediction_mean,avg\n";
    for (const auto& r : rows) {
        out << r.model;
        for (const auto& acc : r.subtask_accuracy) out << ',' << (acc ? text::format_2dp(*acc) : "");
        for (const char* block : {"Position", "Lesion Attributes", "TNM Prediction"}) {
            auto it = r.block_mean.find(block);
            out << ',' << (it == r.block_mean.end() ? "" : text::format_2dp(it->second));
        }
        out << ',' << (r.average ? text::format_2dp(*r.average) : "") << '\n';
    }
    return out.str();
}

void to_json(nlohmann::json& j, const Verdict& v) {
    j = {{"sample_id", v.sample_id}, {"correct", v.correct}, {"question_type", v.question_type},
         {"rationale", v.rationale}, {"model", v.model},     {"task", v.task},
         {"subtask", v.subtask},     {"organ", v.organ}};
}

void from_json(const nlohmann::json& j, Verdict& v) {
    v.sample_id = j.at("sample_id").get<std::string>();
    v.correct = j.at("correct").get<bool>();
    v.question_type = j.value("question_type", std::string{});
    v.rationale = j.value("rationale", std::string{});
    v.model = j.value("model", std::string{});
    v.task = j.value("task", std::string{});
    v.subtask = j.value("subtask", std::string{});
    v.organ = j.value("organ", std::string{});
}

}  // namespace chaineval
