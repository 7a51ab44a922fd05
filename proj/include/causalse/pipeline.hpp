#pragma once

// Stage 0..5 orchestration: profile -> model (transform + graph + vetting) ->
// identify -> estimate -> refute -> explain, with per-stage seeds derived
// from the mandatory master seed so that standalone subcommands and the
// monolithic pipeline produce identical numbers.

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/config.hpp"
#include "causalse/dataset.hpp"
#include "causalse/discovery.hpp"
#include "causalse/estimation.hpp"
#include "causalse/explanation.hpp"
#include "causalse/graph.hpp"
#include "causalse/identification.hpp"
#include "causalse/random.hpp"
#include "causalse/refutation.hpp"
#include "causalse/report.hpp"

namespace causalse {

inline Json config_to_json(const AnalysisConfig& cfg) {
    Json j;
    j["data"] = cfg.data_path;
    j["graph"] = cfg.graph_path ? Json(*cfg.graph_path) : Json(nullptr);
    j["discover"] = cfg.discover_graph;
    j["treatment"] = cfg.treatment;
    j["outcome"] = cfg.outcome;
    if (cfg.comparison) {
        j["comparison"] = Json{{"column", cfg.comparison->column},
                               {"control", cfg.comparison->control},
                               {"treated", cfg.comparison->treated}};
    } else {
        j["comparison"] = nullptr;
    }
    std::vector<std::string> estimators;
    for (auto kind : cfg.estimators) estimators.emplace_back(to_string(kind));
    j["estimators"] = estimators;
    j["bootstrap"] = cfg.bootstrap_replicates;
    j["refuter_reps"] = cfg.refuter_repetitions;
    j["alpha"] = cfg.alpha;
    j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
    j["k_strata"] = cfg.k_strata;
    j["rho_min"] = cfg.rho_min;
    j["unit_id"] = cfg.unit_id ? Json(*cfg.unit_id) : Json(nullptr);
    j["cate_modifier"] = cfg.cate_modifier ? Json(*cfg.cate_modifier) : Json(nullptr);
    j["placebo_max_abs"] = cfg.placebo_max_abs ? Json(*cfg.placebo_max_abs) : Json(nullptr);
    j["rcc_max_drift"] = cfg.rcc_max_drift ? Json(*cfg.rcc_max_drift) : Json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Stage helpers (shared by `pipeline` and the standalone subcommands)
// ---------------------------------------------------------------------------

/// Stage 1 data transformation: configured steps first, then the comparison
/// encoding (arm filter + binary treatment indicator).
inline Dataset prepare_analysis_dataset(const Dataset& raw, const AnalysisConfig& cfg) {
    TransformSpec spec = cfg.transform_steps;
    if (cfg.comparison) {
        TransformStep binarize;
        binarize.op = TransformStep::Op::Binarize;
        binarize.column = cfg.comparison->column;
        binarize.control_level = cfg.comparison->control;
        binarize.treatment_level = cfg.comparison->treated;
        spec.push_back(binarize);
    }
    return transform(raw, spec);
}

/// Attach the configured treatment/outcome roles to a graph, rejecting graphs
/// that declare those roles on other nodes.
inline CausalGraph assign_analysis_roles(const CausalGraph& g, const AnalysisConfig& cfg) {
    if (cfg.treatment.empty() || cfg.outcome.empty())
        throw Error("config: treatment and outcome column names are required");
    if (!g.has_node(cfg.treatment))
        throw Error("graph has no node named '" + cfg.treatment + "' (configured treatment)");
    if (!g.has_node(cfg.outcome))
        throw Error("graph has no node named '" + cfg.outcome + "' (configured outcome)");
    CausalGraph out = g;
    for (const auto& node : g.nodes()) {
        const VariableRole role = g.role(node);
        if (node == cfg.treatment) {
            out = out.with_role(node, VariableRole::Treatment);
        } else if (node == cfg.outcome) {
            out = out.with_role(node, VariableRole::Outcome);
        } else if (role == VariableRole::Treatment || role == VariableRole::Outcome) {
            throw Error("graph node '" + node + "' carries role " + to_string(role) +
                        " but the config names '" +
                        (role == VariableRole::Treatment ? cfg.treatment : cfg.outcome) + "'");
        }
    }
    return out;
}

struct ResolvedGraph {
    CausalGraph graph;
    Json discovery = nullptr; // candidate list when discovery ran
};

struct DiscoveryStage {
    DiscoveryResult result;
    Json json;
};

/// Run causal discovery with the configured variables (default: every
/// non-categorical column) and the per-stage derived seed.
inline DiscoveryStage run_discovery_stage(const Dataset& analysis, const AnalysisConfig& cfg) {
    std::vector<std::string> vars = cfg.discovery_vars;
    if (vars.empty()) {
        for (const Column& c : analysis.columns())
            if (c.kind != ColumnKind::Categorical) vars.push_back(c.name);
    }
    DiscoveryConfig dcfg = cfg.discovery;
    dcfg.seed = derive_seed(cfg.require_seed(), "discovery");
    DiscoveryStage stage;
    stage.result = discover(analysis, vars, cfg.knowledge, dcfg);
    if (stage.result.candidates.empty()) throw Error("discovery produced no candidates");
    Json candidates = Json::array();
    for (const auto& sg : stage.result.candidates)
        candidates.push_back(Json{{"score", sg.score}, {"dsl", emit_graph_spec(sg.graph)}});
    stage.json = Json{{"method", "greedy hill-climbing, BIC score (linear-Gaussian)"},
                      {"warnings", stage.result.warnings},
                      {"candidates", candidates}};
    return stage;
}

/// Candidate graph as DSL text with its score as a leading comment.
inline std::string annotated_candidate_dsl(const ScoredGraph& sg) {
    return "# bic_score " + detail::format_double(sg.score) + "\n" + emit_graph_spec(sg.graph);
}

/// Load the graph from the configured file, or run discovery and take the
/// best-scoring candidate.
inline ResolvedGraph resolve_graph(const Dataset& analysis, const AnalysisConfig& cfg) {
    ResolvedGraph out;
    if (cfg.discover_graph) {
        DiscoveryStage stage = run_discovery_stage(analysis, cfg);
        out.discovery = stage.json;
        out.graph = assign_analysis_roles(stage.result.candidates.front().graph, cfg);
        return out;
    }
    if (!cfg.graph_path) throw Error("config: either `graph = <path>` or discovery is required");
    std::ifstream in(*cfg.graph_path);
    if (!in) throw Error("cannot open graph file: " + *cfg.graph_path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    out.graph = assign_analysis_roles(parse_graph_spec(buffer.str()), cfg);
    return out;
}

inline EstimatorSpec estimator_spec_for(EstimatorKind kind, const AnalysisConfig& cfg,
                                        const Estimand& estimand) {
    EstimatorSpec spec;
    spec.kind = kind;
    spec.treatment = estimand.treatment;
    spec.outcome = estimand.outcome;
    spec.strata = cfg.k_strata;
    if (estimand.strategy == EstimandStrategy::Backdoor) {
        spec.adjustment.assign(estimand.adjustment_set.begin(), estimand.adjustment_set.end());
    } else if (estimand.strategy == EstimandStrategy::Instrumental) {
        spec.instruments.assign(estimand.instruments.begin(), estimand.instruments.end());
    }
    return spec;
}

inline bool estimator_applicable(EstimatorKind kind, const Estimand& estimand) {
    if (estimand.strategy == EstimandStrategy::Backdoor) return kind != EstimatorKind::TwoSls;
    if (estimand.strategy == EstimandStrategy::Instrumental) return kind == EstimatorKind::TwoSls;
    return false;
}

struct Stage3Output {
    std::vector<EffectEstimate> estimates;
    std::optional<CateTable> cate;
    Json skipped = Json::array();
};

inline Stage3Output run_estimation_stage(const Dataset& analysis, const AnalysisConfig& cfg,
                                         const Estimand& estimand) {
    Stage3Output out;
    const uint64_t master = cfg.require_seed();
    for (EstimatorKind kind : cfg.estimators) {
        if (!estimator_applicable(kind, estimand)) {
            out.skipped.push_back(
                Json{{"estimator", to_string(kind)},
                     {"reason", std::string("not applicable to a ") +
                                    to_string(estimand.strategy) + " estimand"}});
            continue;
        }
        InferenceOptions inference;
        inference.bootstrap_replicates = cfg.bootstrap_replicates;
        inference.seed = derive_seed(master, std::string("estimate_") + to_string(kind));
        out.estimates.push_back(
            estimate_effect(analysis, estimator_spec_for(kind, cfg, estimand), inference));
    }
    if (out.estimates.empty())
        throw Error("no configured estimator is applicable to the identified estimand");
    if (cfg.cate_modifier) {
        const EstimatorKind kind = out.estimates.front().estimator;
        InferenceOptions inference;
        inference.bootstrap_replicates = cfg.bootstrap_replicates;
        inference.seed = derive_seed(master, "cate");
        out.cate = estimate_cate(analysis, estimator_spec_for(kind, cfg, estimand),
                                 *cfg.cate_modifier, inference);
    }
    return out;
}

inline std::vector<RefutationResult> run_refutation_stage(const Dataset& analysis,
                                                          const AnalysisConfig& cfg,
                                                          const Estimand& estimand,
                                                          const std::vector<EffectEstimate>& estimates) {
    std::vector<RefutationResult> out;
    const uint64_t master = cfg.require_seed();
    for (const EffectEstimate& estimate : estimates) {
        const EstimatorSpec spec = estimator_spec_for(estimate.estimator, cfg, estimand);
        RefuterOptions options;
        options.repetitions = cfg.refuter_repetitions;
        options.seed = derive_seed(master, std::string("refute_") + to_string(estimate.estimator));
        options.placebo_max_abs = cfg.placebo_max_abs;
        options.rcc_max_drift = cfg.rcc_max_drift;
        out.push_back(refute_placebo(analysis, spec, estimate.point, options));
        out.push_back(refute_random_common_cause(analysis, spec, estimate.point, options));
    }
    return out;
}

struct Stage5Output {
    AssociationalSummary associational;
    ComparativeVerdict verdict;
    Json classifications = Json::array();
};

inline Stage5Output run_explanation_stage(const Dataset& analysis, const AnalysisConfig& cfg,
                                          const std::vector<EffectEstimate>& estimates,
                                          const std::vector<RefutationResult>& refutations) {
    Stage5Output out;
    std::vector<std::string> labels;
    if (cfg.comparison) labels = {cfg.comparison->control, cfg.comparison->treated};
    out.associational = associational_summary(
        analysis, cfg.treatment, cfg.outcome, cfg.bootstrap_replicates,
        derive_seed(cfg.require_seed(), "associational"), cfg.unit_id, labels);

    std::vector<CausalFinding> findings;
    for (const EffectEstimate& estimate : estimates) {
        CausalFinding finding;
        finding.estimate = estimate;
        finding.weight = cfg.weight_of(estimate.estimator);
        for (const RefutationResult& r : refutations)
            if (r.estimator == estimate.estimator) finding.refutations.push_back(r);
        findings.push_back(std::move(finding));
    }
    out.verdict = compare(out.associational, findings, cfg.alpha);
    for (const CausalFinding& finding : findings)
        out.classifications.push_back(
            Json{{"estimator", to_string(finding.estimate.estimator)},
                 {"class", to_string(classify_effect(finding.estimate, cfg.alpha))},
                 {"weight", finding.weight}});
    return out;
}

// ---------------------------------------------------------------------------
// The monolithic pipeline
// ---------------------------------------------------------------------------

struct PipelineOutcome {
    Json report;
    bool completed = false;
};

inline PipelineOutcome run_pipeline(const AnalysisConfig& cfg) {
    cfg.require_seed();
    Json stages;
    stages["stage0_profile"] = nullptr;
    stages["stage1_model"] = nullptr;
    stages["stage2_estimand"] = nullptr;
    stages["stage3_estimates"] = nullptr;
    stages["stage4_refutations"] = nullptr;
    stages["stage5_explanation"] = nullptr;

    Json timings = Json::object();
    Json error = nullptr;
    Json halt_reason = nullptr;
    bool completed = false;

    std::string current_stage = "stage0_profile";
    auto stage_clock = std::chrono::steady_clock::now();
    auto mark = [&](const std::string& next) {
        const auto now = std::chrono::steady_clock::now();
        timings[current_stage] =
            std::chrono::duration<double, std::milli>(now - stage_clock).count();
        stage_clock = now;
        current_stage = next;
    };

    try {
        const Dataset raw = load_csv(cfg.data_path, cfg.schema);
        stages["stage0_profile"] = to_json(profile(raw));
        mark("stage1_model");

        const Dataset analysis = prepare_analysis_dataset(raw, cfg);
        {
            const Column& t = analysis.column(cfg.treatment);
            if (t.kind != ColumnKind::Binary)
                throw Error("treatment column '" + cfg.treatment +
                            "' is not binary after transformation");
        }
        const ResolvedGraph resolved = resolve_graph(analysis, cfg);
        const VettingReport vetting = vet(resolved.graph, analysis, cfg.knowledge, cfg.rho_min);
        stages["stage1_model"] = Json{{"graph_dsl", emit_graph_spec(resolved.graph)},
                                      {"discovery", resolved.discovery},
                                      {"vetting", to_json(vetting)}};
        mark("stage2_estimand");

        const Estimand estimand = identify(resolved.graph);
        stages["stage2_estimand"] = to_json(estimand);
        mark("stage3_estimates");

        if (estimand.strategy == EstimandStrategy::NotIdentified) {
            halt_reason =
                "estimand NotIdentified: the causal effect cannot be estimated from the observed "
                "variables; collect additional covariates or revise the graph";
            completed = true;
        } else if (estimand.strategy == EstimandStrategy::FrontdoorIdentifiable) {
            halt_reason =
                "estimand is FrontdoorIdentifiable: frontdoor estimation is out of scope for this "
                "tool; collect covariates that close the backdoor to proceed";
            completed = true;
        } else {
            const Stage3Output stage3 = run_estimation_stage(analysis, cfg, estimand);
            Json estimates = Json::array();
            for (const auto& e : stage3.estimates) estimates.push_back(to_json(e));
            stages["stage3_estimates"] =
                Json{{"estimates", estimates},
                     {"cate", stage3.cate ? to_json(*stage3.cate) : Json(nullptr)},
                     {"skipped", stage3.skipped}};
            mark("stage4_refutations");

            const std::vector<RefutationResult> refutations =
                run_refutation_stage(analysis, cfg, estimand, stage3.estimates);
            Json refutations_json = Json::array();
            for (const auto& r : refutations) refutations_json.push_back(to_json(r));
            stages["stage4_refutations"] = Json{{"refutations", refutations_json}};
            mark("stage5_explanation");

            const Stage5Output stage5 =
                run_explanation_stage(analysis, cfg, stage3.estimates, refutations);
            stages["stage5_explanation"] = Json{{"associational", to_json(stage5.associational)},
                                                {"alpha", cfg.alpha},
                                                {"classifications", stage5.classifications},
                                                {"verdict", to_json(stage5.verdict)}};
            completed = true;
        }
    } catch (const Error& e) {
        error = Json{{"stage", current_stage}, {"message", e.what()}};
        completed = false;
    }
    timings[current_stage] = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - stage_clock)
                                 .count();

    Json body;
    body["schema_version"] = 1;
    body["tool"] = "causalse";
    body["tool_version"] = kVersion;
    body["config"] = config_to_json(cfg);
    body["completed"] = completed;
    body["halt_reason"] = halt_reason;
    body["stages"] = stages;
    body["error"] = error;
    const std::string canonical = dump_json(body);
    body["determinism_hash"] = fnv1a_hex(canonical);
    body["timings_ms"] = timings;

    PipelineOutcome outcome;
    outcome.report = std::move(body);
    outcome.completed = completed;
    return outcome;
}

/// Report with the volatile fields (timings) removed; the remainder is what
/// the determinism hash covers.
inline Json report_without_timings(Json report) {
    report.erase("timings_ms");
    return report;
}

// ---------------------------------------------------------------------------
// Plain-text rendering
// ---------------------------------------------------------------------------

inline std::string render_text_report(const Json& report) {
    std::ostringstream out;
    out << "causalse " << report.value("tool_version", "?") << " analysis report\n";
    out << "completed: " << (report.value("completed", false) ? "yes" : "no") << "\n";
    if (!report["halt_reason"].is_null())
        out << "halted: " << report["halt_reason"].get<std::string>() << "\n";
    if (!report["error"].is_null())
        out << "error at " << report["error"]["stage"].get<std::string>() << ": "
            << report["error"]["message"].get<std::string>() << "\n";
    const Json& stages = report["stages"];
    if (!stages["stage2_estimand"].is_null()) {
        const Json& e = stages["stage2_estimand"];
        out << "\nestimand: " << e["strategy"].get<std::string>() << "\n  expression: "
            << e["expression"].get<std::string>() << "\n";
    }
    if (!stages["stage3_estimates"].is_null()) {
        out << "\nestimates:\n";
        for (const Json& e : stages["stage3_estimates"]["estimates"]) {
            out << "  " << e["estimator"].get<std::string>() << " "
                << e["effect_kind"].get<std::string>() << ": point=" << e["point"].get<double>()
                << " se=" << e["se_boot"].get<double>() << " p=" << e["p_value"].get<double>()
                << " ci95=[" << e["ci95"]["low"].get<double>() << ", "
                << e["ci95"]["high"].get<double>() << "]\n";
        }
    }
    if (!stages["stage4_refutations"].is_null()) {
        out << "\nrefutations:\n";
        for (const Json& r : stages["stage4_refutations"]["refutations"]) {
            out << "  " << r["estimator"].get<std::string>() << " "
                << r["refuter"].get<std::string>() << ": refuted=" << r["refuted_point"].get<double>()
                << " original=" << r["original_point"].get<double>()
                << " threshold=" << r["threshold"].get<double>() << " -> "
                << r["verdict"].get<std::string>() << "\n";
        }
    }
    if (!stages["stage5_explanation"].is_null()) {
        const Json& v = stages["stage5_explanation"]["verdict"];
        out << "\nverdict: " << v["verdict"].get<std::string>() << "\n  association: "
            << v["association_signal"].get<std::string>() << ", causal: "
            << v["causal_signal"].get<std::string>() << ", refuters "
            << (v["refuters_passed"].get<bool>() ? "passed" : "failed") << "\n  "
            << v["recommendation"].get<std::string>() << "\n";
    }
    return out.str();
}

} // namespace causalse
