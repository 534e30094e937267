#include "chaineval/cli.hpp"

#include "chaineval/accuracy.hpp"
#include "chaineval/iir.hpp"
#include "chaineval/knowledge_graph.hpp"
#include "chaineval/text_util.hpp"
#include "chaineval/triplets.hpp"
#include "chaineval/volume.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace chaineval {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr AgentRole kAllRoles[] = {AgentRole::Reasoner,  AgentRole::Calibrator, AgentRole::Summarizer,
                                   AgentRole::Extractor, AgentRole::Scorer,     AgentRole::SemanticJudge};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open " + path.string(), {{"path", path.string()}});
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("SchemaError", path.string() + ":" + std::to_string(lineno) + ": invalid JSON",
                        {{"path", path.string()}, {"line", lineno}});
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open " + path.string(), {{"path", path.string()}});
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + path.string(), {{"path", path.string()}});
    return out;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The error of the
/// lowest failing index is rethrown so failures are reported deterministically.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < std::max<std::size_t>(1, std::min(workers, n)); ++t) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : text::split(s, ','))
        if (auto t = text::trim(part); !t.empty()) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// CoT inputs for score-cot
// ---------------------------------------------------------------------------

struct CotItem {
    std::string id;
    std::string model;
    std::string task;
    std::string organ;
    CoTRecord cot;
};

std::vector<CotItem> read_cot_items(const fs::path& path) {
    std::vector<CotItem> out;
    for (const auto& j : read_jsonl(path)) {
        if (!j.is_object() || !j.contains("id"))
            throw Error("SchemaError", "CoT record needs an id", {{"path", path.string()}});
        CotItem item;
        item.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        item.model = j.value("model", std::string{});
        item.task = j.value("task", std::string{});
        item.organ = j.value("organ", std::string{});
        if (j.contains("cot")) {
            item.cot = j["cot"].get<CoTRecord>();
        } else if (j.contains("text") && j["text"].is_string()) {
            item.cot = segment_cot(j["text"].get<std::string>());
        } else {
            throw Error("SchemaError", "CoT record needs a cot object or a text field", {{"id", item.id}});
        }
        out.push_back(std::move(item));
    }
    return out;
}

/// Fills chains from the extractor role when a record carries none.
void ensure_chains(CoTRecord& cot, JudgeClient& judge) {
    if (cot.has_triples()) return;
    auto resp = judge.complete(make_request(AgentRole::Extractor, build_extraction_prompt(cot.reconstruct())));
    auto doc = parse_judge_triples(resp.text);
    std::vector<Triplet> repaired;
    for (const auto& t : doc.triples)
        repaired.push_back(repair_slot_order(t, RelationLexicon::builtin(), EntityLexicon::builtin()));
    cot.chains = build_chains(repaired, RelationLexicon::builtin());
}

struct Globals {
    std::string config_path;
    std::string replay_path;
    std::string record_path;
    bool dry_run = false;

    RunConfig config() const {
        return config_path.empty() ? run_config_from_json(json::object()) : load_run_config(config_path);
    }
    std::unique_ptr<JudgeClient> client(const RunConfig& cfg) const {
        ClientOverrides o;
        if (!replay_path.empty()) o.replay = replay_path;
        o.dry_run = dry_run;
        return make_client(cfg, o);
    }
    void finish(const JudgeClient& judge) const {
        if (!record_path.empty()) judge.write_fixture(record_path);
    }
};

std::string format_usage(const CLI::App& app) { return app.help(); }

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    weights.validate();
    if (parallelism < 1) throw Error("InvalidConfig", "parallelism must be >= 1");
    if (max_retries < 0) throw Error("InvalidConfig", "max_retries must be >= 0");
    if (max_in_flight < 1) throw Error("InvalidConfig", "max_in_flight must be >= 1");
    engine.validate();
    for (const auto& [role, spec] : backends) {
        if (role != "default") parse_agent_role(role);
        if (!spec.is_object() || !spec.contains("type"))
            throw Error("InvalidConfig", "backend spec needs a type", {{"role", role}});
    }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error("InvalidConfig", "config must be a JSON object");
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };
    RunConfig c;
    try {
        if (j.contains("backends")) {
            for (const auto& [role, spec] : j["backends"].items()) {
                json s = spec;
                if (s.is_object() && s.contains("path") && s["path"].is_string())
                    s["path"] = resolve(s["path"].get<std::string>()).string();
                c.backends[role] = s;
            }
        }
        if (j.contains("weights")) {
            const auto& w = j["weights"];
            c.weights = {w.value("fc", 0.3), w.value("ic", 0.3), w.value("lrc", 0.4)};
        }
        if (j.contains("cache_dir") && !j["cache_dir"].is_null())
            c.cache_dir = resolve(j["cache_dir"].get<std::string>());
        auto par = j.value("parallelism", 1);
        if (par < 1) throw Error("InvalidConfig", "parallelism must be >= 1", {{"parallelism", par}});
        c.parallelism = static_cast<std::size_t>(par);
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("retry")) {
            const auto& r = j["retry"];
            c.max_retries = r.value("max_retries", c.max_retries);
            c.backoff_ms = r.value("backoff_ms", c.backoff_ms);
            c.backoff_cap_ms = r.value("cap_ms", c.backoff_cap_ms);
        }
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
        if (j.contains("engine")) {
            const auto& e = j["engine"];
            c.engine.max_calibration_retries = e.value("max_calibration_retries", c.engine.max_calibration_retries);
            c.engine.max_summarizer_reloops = e.value("max_summarizer_reloops", c.engine.max_summarizer_reloops);
            c.engine.kg_hops = e.value("kg_hops", c.engine.kg_hops);
        }
        c.engine.rng_seed = c.seed;
    } catch (const json::exception& e) {
        throw Error("InvalidConfig", std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open config " + path.string(), {{"path", path.string()}});
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("InvalidConfig", "config is not valid JSON", {{"path", path.string()}});
    return run_config_from_json(j, path.parent_path());
}

std::unique_ptr<JudgeClient> make_client(const RunConfig& config, const ClientOverrides& overrides) {
    ClientOptions opts;
    opts.max_retries = config.max_retries;
    opts.backoff_base = std::chrono::milliseconds(config.backoff_ms);
    opts.backoff_cap = std::chrono::milliseconds(config.backoff_cap_ms);
    opts.jitter_seed = config.seed;
    opts.cache_dir = config.cache_dir;
    opts.max_in_flight = config.max_in_flight;
    auto client = std::make_unique<JudgeClient>(opts);

    if (overrides.replay) {
        auto replay = ReplayBackend::from_file(*overrides.replay);
        for (auto role : kAllRoles) client->set_backend(role, replay);
        return client;
    }

    std::map<std::string, std::shared_ptr<ReplayBackend>> replays;  // one instance per fixture file
    for (auto role : kAllRoles) {
        auto it = config.backends.find(std::string(to_string(role)));
        if (it == config.backends.end()) it = config.backends.find("default");
        if (it == config.backends.end()) continue;
        const auto& spec = it->second;
        auto type = spec.value("type", std::string{});
        auto model = spec.value("model", std::string{});
        if (overrides.dry_run && type != "replay")
            throw UsageError("--dry-run needs replay backends; role " + std::string(to_string(role)) + " uses " + type);
        if (type == "live") {
            client->set_backend(role, std::make_shared<LiveEndpointBackend>(
                                          spec.at("base_url").get<std::string>(), spec.value("auth_env", std::string{}),
                                          model, std::chrono::milliseconds(spec.value("timeout_ms", 120000))));
        } else if (type == "replay") {
            auto path = spec.at("path").get<std::string>();
            auto& r = replays[path + "\n" + model];
            if (!r) r = ReplayBackend::from_file(path, model);
            client->set_backend(role, r);
        } else if (type == "scripted") {
            std::vector<ScriptedBackend::Entry> entries;
            for (const auto& e : spec.at("responses")) {
                if (e.is_string()) entries.push_back(ScriptedBackend::Entry::reply(e.get<std::string>()));
                else if (e.contains("status")) entries.push_back(ScriptedBackend::Entry::http_error(e["status"].get<int>()));
                else if (e.value("timeout", false)) entries.push_back(ScriptedBackend::Entry::timed_out());
                else entries.push_back(ScriptedBackend::Entry::reply(e.at("text").get<std::string>()));
            }
            client->set_backend(role, std::make_shared<ScriptedBackend>(std::move(entries), model));
        } else {
            throw Error("InvalidConfig", "unknown backend type: " + type, {{"role", std::string(to_string(role))}});
        }
    }
    return client;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"chaineval: chain-of-thought evaluation and tumor CoT data tooling", "chaineval"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--replay", g.replay_path, "answer every judge role from this fixture JSONL");
    app.add_option("--record", g.record_path, "write every judge response seen to this fixture JSONL");
    app.add_flag("--dry-run", g.dry_run, "only replay backends; a missing fixture entry is an error");

    std::function<void()> action;

    // extract-triples
    auto* xt = app.add_subcommand("extract-triples", "extract (subject, relation, object) triples from reports");
    std::string xt_in, xt_out;
    xt->add_option("--in", xt_in, "JSONL of {id, report_text}")->required();
    xt->add_option("--out", xt_out, "output JSONL")->required();
    xt->callback([&] {
        action = [&] {
            auto cfg = g.config();
            auto judge = g.client(cfg);
            auto rows = read_jsonl(xt_in);
            std::vector<json> results(rows.size());
            parallel_for(rows.size(), cfg.parallelism, [&](std::size_t i) {
                const auto& r = rows[i];
                auto text = r.value("report_text", r.value("text", std::string{}));
                auto resp = judge->complete(make_request(AgentRole::Extractor, build_extraction_prompt(text)));
                auto doc = parse_judge_triples(resp.text);
                std::vector<Triplet> triples;
                for (const auto& t : doc.triples)
                    triples.push_back(repair_slot_order(t, RelationLexicon::builtin(), EntityLexicon::builtin()));
                json chains = json::object();
                for (const auto& [level, chain] : build_chains(triples, RelationLexicon::builtin()))
                    chains[std::string(to_string(level))] = chain;
                results[i] = {{"id", r.value("id", json())},
                              {"triples", triples},
                              {"chains", chains},
                              {"residual_text", doc.residual_text}};
            });
            auto f = open_out(xt_out);
            for (const auto& r : results) f << r.dump() << '\n';
            g.finish(*judge);
            out << json{{"records", results.size()}, {"out", xt_out}}.dump() << '\n';
        };
    });

    // score-cot
    auto* sc = app.add_subcommand("score-cot", "score predicted chains of thought against ground truth");
    std::string sc_gt, sc_pred, sc_out, sc_csv;
    sc->add_option("--gt", sc_gt, "ground-truth JSONL of {id, task, organ, cot|text}")->required();
    sc->add_option("--pred", sc_pred, "prediction JSONL of {id, model, cot|text}")->required();
    sc->add_option("--out", sc_out, "per-sample scorecard JSONL (default: stdout)");
    sc->add_option("--summary-csv", sc_csv, "per-group summary CSV");
    sc->callback([&] {
        action = [&] {
            auto cfg = g.config();
            auto judge = g.client(cfg);
            auto gts = read_cot_items(sc_gt);
            auto preds = read_cot_items(sc_pred);
            std::map<std::string, const CotItem*> by_id;
            for (const auto& p : preds) by_id[p.id] = &p;
            std::vector<std::string> missing;
            std::vector<const CotItem*> gt_rows;
            for (const auto& gt : gts) {
                if (by_id.count(gt.id)) gt_rows.push_back(&gt);
                else missing.push_back(gt.id);
            }
            std::vector<SampleScore> scores(gt_rows.size());
            parallel_for(gt_rows.size(), cfg.parallelism, [&](std::size_t i) {
                CotItem gt = *gt_rows[i];
                CotItem pred = *by_id.at(gt.id);
                ensure_chains(gt.cot, *judge);
                ensure_chains(pred.cot, *judge);
                auto resp = judge->complete(make_request(AgentRole::Scorer, build_scoring_prompt(gt.cot, pred.cot)));
                auto s = score_sample(gt.id, parse_scorecard(resp.text));
                s.model = pred.model.empty() ? gt.model : pred.model;
                s.task = gt.task;
                s.organ = gt.organ;
                scores[i] = std::move(s);
            });
            std::ostringstream lines;
            for (const auto& s : scores) lines << json(s).dump() << '\n';
            if (sc_out.empty()) {
                out << lines.str();
            } else {
                auto f = open_out(sc_out);
                f << lines.str();
            }
            auto report = aggregate_corpus(scores, cfg.weights);
            for (const auto& id : missing) report.notes.push_back("no prediction for " + id);
            if (!sc_csv.empty()) {
                auto f = open_out(sc_csv);
                f << report.to_csv();
            }
            g.finish(*judge);
            if (!sc_out.empty()) out << report.to_text();
            if (!scores.empty() && !sc_out.empty()) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "CoT_e (all samples): %.2f\n", cot_e(scores, cfg.weights));
                out << buf;
            }
        };
    });

    // eval-accuracy
    auto* ea = app.add_subcommand("eval-accuracy", "judge VQA predictions and aggregate accuracy");
    std::string ea_vqa, ea_pred, ea_out, ea_group = "model,subtask", ea_bench;
    ea->add_option("--vqa", ea_vqa, "VqaRecord JSONL")->required();
    ea->add_option("--pred", ea_pred, "prediction JSONL of {id, model, answer}")->required();
    ea->add_option("--out", ea_out, "verdict JSONL");
    ea->add_option("--group-by", ea_group, "comma list of model, task, subtask, organ");
    ea->add_option("--benchmark", ea_bench, "benchmark-layout CSV output");
    ea->callback([&] {
        action = [&] {
            std::vector<GroupField> fields;
            for (const auto& f : split_list(ea_group)) {
                if (f == "model") fields.push_back(GroupField::Model);
                else if (f == "task") fields.push_back(GroupField::Task);
                else if (f == "subtask") fields.push_back(GroupField::Subtask);
                else if (f == "organ") fields.push_back(GroupField::Organ);
                else throw UsageError("unknown --group-by field: " + f);
            }
            auto cfg = g.config();
            std::map<std::string, VqaRecord> records;
            for (const auto& j : read_jsonl(ea_vqa)) {
                auto r = j.get<VqaRecord>();
                validate_vqa(r);
                if (!records.emplace(r.id, r).second)
                    throw Error("DuplicateId", "duplicate VQA id " + r.id, {{"id", r.id}});
            }
            auto preds = read_jsonl(ea_pred);
            bool needs_judge = false;
            for (const auto& p : preds) {
                auto it = records.find(p.value("id", std::string{}));
                if (it == records.end())
                    throw Error("SchemaError", "prediction for unknown id", {{"id", p.value("id", json())}});
                needs_judge = needs_judge || it->second.format == AnswerFormat::OpenEnded;
            }
            std::unique_ptr<JudgeClient> judge = needs_judge ? g.client(cfg) : nullptr;
            std::vector<Verdict> verdicts(preds.size());
            parallel_for(preds.size(), cfg.parallelism, [&](std::size_t i) {
                const auto& p = preds[i];
                const auto& rec = records.at(p.value("id", std::string{}));
                auto answer = p.value("answer", std::string{});
                Verdict v;
                if (rec.format == AnswerFormat::MultipleChoice) {
                    try {
                        v = match_choice(answer, rec.answer_gt, rec.options);
                    } catch (const Error& e) {
                        if (e.kind() != "AmbiguousPrediction") throw;
                        v.correct = false;
                        v.question_type = "multiple-choice";
                        v.rationale = e.what();
                    }
                } else {
                    auto resp = judge->complete(make_request(AgentRole::SemanticJudge,
                                                             build_semantic_prompt(rec.question, rec.answer_gt, answer)));
                    v = parse_verdict(resp.text);
                }
                v.sample_id = rec.id;
                v.model = p.value("model", std::string{});
                v.task = std::string(to_string(rec.task));
                v.subtask = rec.subtask;
                v.organ = std::string(to_string(rec.organ));
                verdicts[i] = std::move(v);
            });
            if (!ea_out.empty()) {
                auto f = open_out(ea_out);
                for (const auto& v : verdicts) f << json(v).dump() << '\n';
            }
            if (!ea_bench.empty()) {
                auto f = open_out(ea_bench);
                f << benchmark_table_csv(benchmark_table(verdicts));
            }
            if (judge) g.finish(*judge);
            out << aggregate_accuracy(verdicts, fields).to_csv();
        };
    });

    // kg
    auto* kg = app.add_subcommand("kg", "knowledge graph tools");
    kg->require_subcommand(1);
    auto* kg_load = kg->add_subcommand("load", "validate and normalize an edge file");
    std::string kl_in, kl_out;
    kg_load->add_option("--in", kl_in, "edge JSONL")->required();
    kg_load->add_option("--out", kl_out, "normalized JSONL");
    kg_load->callback([&] {
        action = [&] {
            auto res = load_graph_file(kl_in);
            if (!kl_out.empty()) {
                auto f = open_out(kl_out);
                f << serialize(res.graph);
            }
            out << json{{"edges", res.graph.size()},
                        {"duplicates", res.duplicates},
                        {"aliases", res.graph.synonyms().size()}}
                       .dump()
                << '\n';
        };
    });
    auto* kg_query = kg->add_subcommand("query", "retrieve the k-hop subgraph around entities");
    std::string kq_graph, kq_entities, kq_organ, kq_format = "text";
    std::size_t kq_hops = 1;
    kg_query->add_option("--graph", kq_graph, "edge JSONL (default: bundled demo graph)");
    kg_query->add_option("--entities", kq_entities, "comma-separated entities")->required();
    kg_query->add_option("--organ", kq_organ, "organ scope")->required();
    kg_query->add_option("--hops", kq_hops, "hop radius");
    kg_query->add_option("--format", kq_format, "text or json")->check(CLI::IsMember({"text", "json"}));
    kg_query->callback([&] {
        action = [&] {
            KGraph loaded;
            if (!kq_graph.empty()) loaded = load_graph_file(kq_graph).graph;
            const KGraph& graph = kq_graph.empty() ? demo_graph() : loaded;
            auto res = graph.retrieve(split_list(kq_entities), kq_organ, kq_hops);
            if (kq_format == "json") {
                out << json{{"edges", res.edges}, {"seeds", res.seeds}, {"unresolved", res.unresolved}}.dump() << '\n';
            } else {
                auto text = render_context(res.edges);
                out << text << (text.empty() ? "" : "\n");
                for (const auto& u : res.unresolved) err << "unresolved entity: " << u << '\n';
            }
        };
    });

    // engine run
    auto* eng = app.add_subcommand("engine", "CoT data engine");
    eng->require_subcommand(1);
    auto* eng_run = eng->add_subcommand("run", "run the multi-agent pipeline over cases");
    std::string er_cases, er_out, er_graph;
    eng_run->add_option("--cases", er_cases, "JSONL of {patient_id, report_text, pathology_text}")->required();
    eng_run->add_option("--out", er_out, "output directory")->required();
    eng_run->add_option("--graph", er_graph, "knowledge graph JSONL (default: bundled demo graph)");
    eng_run->callback([&] {
        action = [&] {
            if (g.config_path.empty() && g.replay_path.empty()) throw UsageError("engine run needs --config or --replay");
            auto cfg = g.config();
            auto judge = g.client(cfg);
            KGraph loaded;
            if (!er_graph.empty()) loaded = load_graph_file(er_graph).graph;
            EngineConfig ec = cfg.engine;
            ec.kg = er_graph.empty() ? &demo_graph() : &loaded;
            auto cases = read_cases(er_cases);
            auto results = run_cases(cases, *judge, ec, cfg.parallelism);
            fs::create_directories(er_out);
            auto vqa = open_out(fs::path(er_out) / "vqa.jsonl");
            auto trace = open_out(fs::path(er_out) / "trace.jsonl");
            std::size_t done = 0, records = 0;
            const Error* hard_error = nullptr;
            std::optional<Error> first_error;
            for (const auto& r : results) {
                for (const auto& rec : r.records) vqa << json(rec).dump() << '\n';
                trace << r.trace.to_jsonl();
                records += r.records.size();
                if (r.ok()) ++done;
                else if (r.trace.failure != "BudgetExhausted" && !first_error)
                    first_error.emplace(r.trace.failure, "case " + r.trace.patient_id + " failed",
                                        json{{"patient_id", r.trace.patient_id}});
            }
            if (first_error) hard_error = &*first_error;
            g.finish(*judge);
            out << json{{"cases", results.size()}, {"done", done}, {"failed", results.size() - done},
                        {"records", records}}
                       .dump()
                << '\n';
            if (hard_error) throw *hard_error;
        };
    });

    // split
    auto* sp = app.add_subcommand("split", "deterministic patient-level train/test split");
    std::string sp_ids, sp_dir;
    double sp_ratio = 0.9;
    std::optional<std::uint64_t> sp_seed;
    sp->add_option("--ids", sp_ids, "one patient id per line")->required();
    sp->add_option("--ratio", sp_ratio, "train fraction in (0, 1)");
    sp->add_option("--seed", sp_seed, "shuffle seed (default: config seed)");
    sp->add_option("--out-dir", sp_dir, "directory for train.txt and test.txt (default: next to --ids)");
    sp->callback([&] {
        action = [&] {
            std::uint64_t seed = sp_seed ? *sp_seed : (g.config_path.empty() ? 0 : g.config().seed);
            auto s = patient_split(read_lines(sp_ids), sp_ratio, seed);
            fs::path dir = sp_dir.empty() ? fs::path(sp_ids).parent_path() : fs::path(sp_dir);
            auto train = open_out(dir / "train.txt");
            for (const auto& id : s.train) train << id << '\n';
            auto test = open_out(dir / "test.txt");
            for (const auto& id : s.test) test << id << '\n';
            out << json{{"train", s.train.size()}, {"test", s.test.size()}, {"seed", seed}}.dump() << '\n';
        };
    });

    // relabel
    auto* rl = app.add_subcommand("relabel", "merge 117 source labels into 56 organ labels");
    std::string rl_in, rl_out;
    rl->add_option("--in", rl_in, "label volume (native or NIfTI)")->required();
    rl->add_option("--out", rl_out, "output volume (native format)")->required();
    rl->callback([&] {
        action = [&] {
            auto vol = remap_volume(read_volume(rl_in));
            write_volume(vol, rl_out);
            out << json{{"dims", vol.dims}, {"out", rl_out}}.dump() << '\n';
        };
    });

    // roi
    auto* roi = app.add_subcommand("roi", "bounding box of one organ in a merged label volume");
    std::string roi_in, roi_organ;
    bool roi_remap = false;
    roi->add_option("--in", roi_in, "merged label volume")->required();
    roi->add_option("--organ", roi_organ, "organ name")->required();
    roi->add_flag("--remap", roi_remap, "input holds source labels; merge them first");
    roi->callback([&] {
        action = [&] {
            auto vol = read_volume(roi_in);
            if (roi_remap) vol = remap_volume(vol);
            out << extract_roi(vol, match_organ(roi_organ)).to_json().dump() << '\n';
        };
    });

    // iir
    auto* ii = app.add_subcommand("iir", "simulate organ-guided iterative interleaved reasoning");
    std::string ii_task, ii_script, ii_volume, ii_out;
    int ii_rounds = 8;
    ii->add_option("--task", ii_task, "task text")->required();
    ii->add_option("--script", ii_script, "JSONL of scripted responses, one per round")->required();
    ii->add_option("--volume", ii_volume, "merged label volume for ROI boxes");
    ii->add_option("--max-rounds", ii_rounds, "round cap")->check(CLI::PositiveNumber);
    ii->add_option("--out", ii_out, "trace JSONL (default: stdout)");
    ii->callback([&] {
        action = [&] {
            std::vector<std::string> responses;
            for (const auto& j : read_jsonl(ii_script)) {
                if (j.is_string()) responses.push_back(j.get<std::string>());
                else responses.push_back(j.at("response").get<std::string>());
            }
            std::optional<LabelVolume> vol;
            if (!ii_volume.empty()) vol = read_volume(ii_volume);
            auto trace = run_iir(ii_task, scripted_reasoner(responses), vol ? &*vol : nullptr, ii_rounds);
            json summary = {{"rounds", trace.rounds.size()},
                            {"visited", trace.visited},
                            {"terminated", std::string(to_string(trace.terminated))}};
            if (ii_out.empty()) {
                out << trace.to_jsonl();
            } else {
                auto f = open_out(ii_out);
                f << trace.to_jsonl();
            }
            (ii_out.empty() ? err : out) << summary.dump() << '\n';
        };
    });

    // report
    auto* rp = app.add_subcommand("report", "aggregate scorecards or verdicts into tables");
    std::string rp_scores, rp_verdicts, rp_format = "text";
    rp->add_option("--scores", rp_scores, "SampleScore JSONL from score-cot");
    rp->add_option("--verdicts", rp_verdicts, "Verdict JSONL from eval-accuracy");
    rp->add_option("--format", rp_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
    rp->callback([&] {
        action = [&] {
            if (rp_scores.empty() && rp_verdicts.empty()) throw UsageError("report needs --scores or --verdicts");
            auto cfg = g.config();
            if (!rp_scores.empty()) {
                std::vector<SampleScore> scores;
                for (const auto& j : read_jsonl(rp_scores)) scores.push_back(j.get<SampleScore>());
                auto report = aggregate_corpus(scores, cfg.weights);
                out << (rp_format == "csv" ? report.to_csv() : report.to_text());
            }
            if (!rp_verdicts.empty()) {
                std::vector<Verdict> verdicts;
                for (const auto& j : read_jsonl(rp_verdicts)) verdicts.push_back(j.get<Verdict>());
                out << benchmark_table_csv(benchmark_table(verdicts));
            }
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << format_usage(app);
        return 2;
    }

    try {
        if (!action) {
            err << format_usage(app);
            return 2;
        }
        action();
        return 0;
    } catch (const UsageError& e) {
        err << e.what() << "\n\n" << format_usage(app);
        return 2;
    } catch (const Error& e) {
        err << e.to_json().dump() << '\n';
        return 1;
    } catch (const json::exception& e) {
        err << Error("SchemaError", e.what()).to_json().dump() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << Error("IoError", e.what()).to_json().dump() << '\n';
        return 1;
    }
}

int run_command(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace chaineval
