#pragma once

// Scripted-agent fixtures for the data engine and the judge client.

#include "chaineval/data_engine.hpp"
#include "chaineval/judge.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fixture {

using namespace chaineval;

inline StructuredReport liver_report(const std::string& patient_id = "P001") {
    StructuredReport r;
    r.patient_id = patient_id;
    r.patient.age = 61;
    r.patient.gender = "male";
    OrganFindings f;
    f.organ = Organ::Liver;
    f.location = "right lobe segment VII";
    f.shape = "round";
    f.margin = "ill-defined";
    f.density = "hypodense";
    f.count = "single";
    f.other["segment"] = "VII";
    f.other["enhancement"] = "arterial hyperenhancement with washout";
    r.organs.push_back(f);
    r.pathology = {"T2", "N0", "M0", "hepatocellular carcinoma"};
    return r;
}

inline std::string reasoning(int variant = 0) {
    return "The liver shows a hypodense round lesion in segment VII with ill-defined margin (draft " +
           std::to_string(variant) +
           "). Arterial hyperenhancement with washout suggests hepatocellular carcinoma. "
           "Thus, the answer is hepatocellular carcinoma of the right liver lobe, stage T2N0M0.";
}

inline const std::string kPass = "VERDICT: correct\nFindings and conclusion agree.";
inline const std::string kFail = "VERDICT: incorrect\nSegment assignment is not supported by the findings.";

inline ClientOptions fast_options() {
    ClientOptions o;
    o.backoff_base = std::chrono::milliseconds(0);
    o.backoff_cap = std::chrono::milliseconds(0);
    return o;
}

struct EngineRig {
    std::unique_ptr<JudgeClient> client;
    std::shared_ptr<ScriptedBackend> reasoner;
    std::shared_ptr<ScriptedBackend> calibrator;
    std::shared_ptr<ScriptedBackend> summarizer;
};

inline EngineRig engine_rig(std::vector<std::string> reasoner, std::vector<std::string> calibrator,
                            std::vector<std::string> summarizer) {
    EngineRig rig;
    rig.client = std::make_unique<JudgeClient>(fast_options());
    rig.reasoner = ScriptedBackend::from_texts(std::move(reasoner), "reasoner-model");
    rig.calibrator = ScriptedBackend::from_texts(std::move(calibrator), "calibrator-model");
    rig.summarizer = ScriptedBackend::from_texts(std::move(summarizer), "summarizer-model");
    rig.client->set_backend(AgentRole::Reasoner, rig.reasoner);
    rig.client->set_backend(AgentRole::Calibrator, rig.calibrator);
    rig.client->set_backend(AgentRole::Summarizer, rig.summarizer);
    return rig;
}

/// A client whose three engine roles replay everything `recorded` holds.
inline std::unique_ptr<JudgeClient> replay_client(const std::map<std::string, std::string>& recorded) {
    auto client = std::make_unique<JudgeClient>(fast_options());
    client->set_backend(AgentRole::Reasoner, std::make_shared<ReplayBackend>(recorded, "reasoner-model"));
    client->set_backend(AgentRole::Calibrator, std::make_shared<ReplayBackend>(recorded, "calibrator-model"));
    client->set_backend(AgentRole::Summarizer, std::make_shared<ReplayBackend>(recorded, "summarizer-model"));
    return client;
}

inline int count_state(const EngineTrace& t, EngineState s) {
    int n = 0;
    for (const auto& e : t.events) n += e.state == s;
    return n;
}

inline std::vector<RetryStrategy> strategies(const EngineTrace& t) {
    std::vector<RetryStrategy> out;
    for (const auto& e : t.events)
        if (e.strategy) out.push_back(*e.strategy);
    return out;
}

}  // namespace fixture
