// causalse CLI: one subcommand per pipeline stage plus the SCM simulator and
// the monolithic `pipeline` runner. Subcommands read prior-stage artifacts
// from files and write their own stage section as JSON, so chaining them
// reproduces the monolithic report exactly.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "causalse/causalse.hpp"

namespace {

using causalse::AnalysisConfig;
using causalse::Json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw causalse::Error("cannot open file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void emit(const Json& value, const std::string& out_path) {
    if (out_path.empty())
        std::cout << causalse::dump_json(value);
    else
        causalse::write_json_file(value, out_path);
}

struct CommonOptions {
    std::string config_path;
    std::string data;
    std::string graph;
    std::string out;
    std::optional<long long> seed;
    std::optional<double> alpha;
    std::optional<long long> bootstrap;
    std::optional<long long> reps;
    std::string estimators;
    std::string treatment;
    std::string outcome;

    void attach(CLI::App* cmd, bool with_estimation = true) {
        cmd->add_option("--config", config_path, "analysis config file");
        cmd->add_option("--data", data, "CSV data file");
        cmd->add_option("--graph", graph, "graph spec file");
        cmd->add_option("--out", out, "output file (stdout when omitted)");
        cmd->add_option("--seed", seed, "master seed (mandatory for seeded stages)");
        if (with_estimation) {
            cmd->add_option("--alpha", alpha, "significance level");
            cmd->add_option("--bootstrap", bootstrap, "bootstrap replicates");
            cmd->add_option("--estimators", estimators, "comma list: psm,pss,psw,2sls");
            cmd->add_option("--reps", reps, "refuter repetitions");
            cmd->add_option("--treatment", treatment, "treatment column");
            cmd->add_option("--outcome", outcome, "outcome column");
        }
    }

    AnalysisConfig resolve() const {
        AnalysisConfig cfg;
        if (!config_path.empty()) {
            const auto slash = config_path.find_last_of('/');
            const std::string base =
                slash == std::string::npos ? std::string() : config_path.substr(0, slash);
            cfg = causalse::analysis_config_from(causalse::ConfigFile::parse_file(config_path), base);
        }
        if (!data.empty()) cfg.data_path = data;
        if (!graph.empty()) {
            cfg.graph_path = graph;
            cfg.discover_graph = false;
        }
        if (seed) cfg.seed = static_cast<uint64_t>(*seed);
        if (alpha) cfg.alpha = *alpha;
        if (bootstrap) cfg.bootstrap_replicates = static_cast<size_t>(*bootstrap);
        if (reps) cfg.refuter_repetitions = static_cast<size_t>(*reps);
        if (!estimators.empty()) cfg.estimators = causalse::parse_estimator_list(estimators);
        if (!treatment.empty()) cfg.treatment = treatment;
        if (!outcome.empty()) cfg.outcome = outcome;
        if (!out.empty()) cfg.out_path = out;
        if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw causalse::Error("alpha must lie in (0,1)");
        return cfg;
    }
};

causalse::Dataset load_analysis_dataset(const AnalysisConfig& cfg) {
    if (cfg.data_path.empty()) throw causalse::Error("--data (or config `data`) is required");
    return causalse::prepare_analysis_dataset(causalse::load_csv(cfg.data_path, cfg.schema), cfg);
}

causalse::CausalGraph load_analysis_graph(const causalse::Dataset& analysis,
                                          const AnalysisConfig& cfg) {
    return causalse::resolve_graph(analysis, cfg).graph;
}

int run(int argc, char** argv) {
    CLI::App app{"causal inference pipeline for empirical software data"};
    app.require_subcommand(1);

    CommonOptions profile_opts, discover_opts, vet_opts, identify_opts, estimate_opts,
        refute_opts, explain_opts, simulate_opts, pipeline_opts;

    auto* cmd_profile = app.add_subcommand("profile", "stage 0: per-column summary statistics");
    profile_opts.attach(cmd_profile, false);

    auto* cmd_discover = app.add_subcommand("discover", "stage 1: score-based causal discovery");
    discover_opts.attach(cmd_discover, false);
    std::string discover_vars, discover_prefix;
    cmd_discover->add_option("--vars", discover_vars, "comma list of variables to search over");
    cmd_discover->add_option("--out-prefix", discover_prefix,
                             "write candidate_<i>.graph files with score comments");

    auto* cmd_vet = app.add_subcommand("vet", "stage 1: correlational/constraint audit of a graph");
    vet_opts.attach(cmd_vet, false);
    std::optional<double> vet_rho_min;
    cmd_vet->add_option("--rho-min", vet_rho_min, "weak-edge threshold on |spearman|");

    auto* cmd_identify = app.add_subcommand("identify", "stage 2: estimand identification");
    identify_opts.attach(cmd_identify, false);

    auto* cmd_estimate = app.add_subcommand("estimate", "stage 3: treatment-effect estimation");
    estimate_opts.attach(cmd_estimate);
    std::string estimate_estimand_path;
    cmd_estimate->add_option("--estimand", estimate_estimand_path,
                             "stage-2 estimand JSON (re-identified from --graph when omitted)");

    auto* cmd_refute = app.add_subcommand("refute", "stage 4: placebo and random-common-cause refuters");
    refute_opts.attach(cmd_refute);
    std::string refute_estimand_path, refute_estimates_path;
    cmd_refute->add_option("--estimand", refute_estimand_path, "stage-2 estimand JSON");
    cmd_refute->add_option("--estimates", refute_estimates_path,
                           "stage-3 estimates JSON (recomputed when omitted)");

    auto* cmd_explain = app.add_subcommand("explain", "stage 5: associational summary and verdict");
    explain_opts.attach(cmd_explain);
    std::string explain_estimates_path, explain_refutations_path;
    cmd_explain->add_option("--estimates", explain_estimates_path, "stage-3 estimates JSON");
    cmd_explain->add_option("--refutations", explain_refutations_path, "stage-4 refutations JSON");

    auto* cmd_simulate = app.add_subcommand("simulate", "sample a dataset from an SCM spec");
    std::string simulate_spec, simulate_out, simulate_do;
    long long simulate_n = 0;
    std::optional<long long> simulate_seed;
    bool include_unobserved = false;
    cmd_simulate->add_option("--spec", simulate_spec, "SCM spec file")->required();
    cmd_simulate->add_option("--n", simulate_n, "number of rows")->required();
    cmd_simulate->add_option("--seed", simulate_seed, "override the spec's seed");
    cmd_simulate->add_option("--out", simulate_out, "CSV output path (stdout when omitted)");
    cmd_simulate->add_option("--do", simulate_do, "interventions, e.g. 'T=1' or 'T=1,Z=0'");
    cmd_simulate->add_flag("--include-unobserved", include_unobserved,
                           "emit columns for unobserved nodes too");

    auto* cmd_pipeline = app.add_subcommand("pipeline", "run stages 0..5 and write the report");
    pipeline_opts.attach(cmd_pipeline);

    CLI11_PARSE(app, argc, argv);

    if (cmd_profile->parsed()) {
        const AnalysisConfig cfg = profile_opts.resolve();
        if (cfg.data_path.empty()) throw causalse::Error("--data (or config `data`) is required");
        const auto ds = causalse::load_csv(cfg.data_path, cfg.schema);
        emit(causalse::to_json(causalse::profile(ds)), profile_opts.out);
        return 0;
    }

    if (cmd_discover->parsed()) {
        AnalysisConfig cfg = discover_opts.resolve();
        cfg.discover_graph = true;
        if (!discover_vars.empty())
            cfg.discovery_vars = causalse::ConfigFile::split(discover_vars, ',');
        const auto analysis = load_analysis_dataset(cfg);
        const auto stage = causalse::run_discovery_stage(analysis, cfg);
        if (!discover_prefix.empty()) {
            for (size_t i = 0; i < stage.result.candidates.size(); ++i) {
                const std::string path =
                    discover_prefix + "candidate_" + std::to_string(i + 1) + ".graph";
                std::ofstream out(path, std::ios::binary);
                if (!out) throw causalse::Error("cannot write file: " + path);
                out << causalse::annotated_candidate_dsl(stage.result.candidates[i]);
            }
        }
        emit(stage.json, discover_opts.out);
        return 0;
    }

    if (cmd_vet->parsed()) {
        const AnalysisConfig cfg = vet_opts.resolve();
        if (!cfg.graph_path) throw causalse::Error("--graph is required");
        const auto analysis = load_analysis_dataset(cfg);
        const auto g = causalse::parse_graph_spec(read_file(*cfg.graph_path));
        const double rho_min = vet_rho_min ? *vet_rho_min : cfg.rho_min;
        emit(causalse::to_json(causalse::vet(g, analysis, cfg.knowledge, rho_min)), vet_opts.out);
        return 0;
    }

    if (cmd_identify->parsed()) {
        const AnalysisConfig cfg = identify_opts.resolve();
        if (!cfg.graph_path) throw causalse::Error("--graph is required");
        causalse::CausalGraph g = causalse::parse_graph_spec(read_file(*cfg.graph_path));
        if (!cfg.treatment.empty() && !cfg.outcome.empty())
            g = causalse::assign_analysis_roles(g, cfg);
        const auto estimand = causalse::identify(g);
        std::cout << causalse::summary_line(estimand) << "\n"
                  << "expression: " << estimand.expression << "\n";
        if (!identify_opts.out.empty()) causalse::write_json_file(to_json(estimand), identify_opts.out);
        return 0;
    }

    if (cmd_estimate->parsed()) {
        const AnalysisConfig cfg = estimate_opts.resolve();
        const auto analysis = load_analysis_dataset(cfg);
        causalse::Estimand estimand;
        if (!estimate_estimand_path.empty()) {
            estimand = causalse::estimand_from_json(causalse::load_json_file(estimate_estimand_path));
        } else {
            estimand = causalse::identify(
                causalse::assign_analysis_roles(load_analysis_graph(analysis, cfg), cfg));
        }
        const auto stage3 = causalse::run_estimation_stage(analysis, cfg, estimand);
        Json estimates = Json::array();
        for (const auto& e : stage3.estimates) estimates.push_back(to_json(e));
        emit(Json{{"estimates", estimates},
                  {"cate", stage3.cate ? to_json(*stage3.cate) : Json(nullptr)},
                  {"skipped", stage3.skipped}},
             estimate_opts.out);
        return 0;
    }

    if (cmd_refute->parsed()) {
        const AnalysisConfig cfg = refute_opts.resolve();
        const auto analysis = load_analysis_dataset(cfg);
        causalse::Estimand estimand;
        if (!refute_estimand_path.empty()) {
            estimand = causalse::estimand_from_json(causalse::load_json_file(refute_estimand_path));
        } else {
            estimand = causalse::identify(
                causalse::assign_analysis_roles(load_analysis_graph(analysis, cfg), cfg));
        }
        std::vector<causalse::EffectEstimate> estimates;
        if (!refute_estimates_path.empty()) {
            const Json doc = causalse::load_json_file(refute_estimates_path);
            for (const Json& e : doc.at("estimates"))
                estimates.push_back(causalse::effect_estimate_from_json(e));
        } else {
            estimates = causalse::run_estimation_stage(analysis, cfg, estimand).estimates;
        }
        const auto refutations = causalse::run_refutation_stage(analysis, cfg, estimand, estimates);
        Json refutations_json = Json::array();
        for (const auto& r : refutations) refutations_json.push_back(to_json(r));
        emit(Json{{"refutations", refutations_json}}, refute_opts.out);
        return 0;
    }

    if (cmd_explain->parsed()) {
        const AnalysisConfig cfg = explain_opts.resolve();
        if (explain_estimates_path.empty() || explain_refutations_path.empty())
            throw causalse::Error("explain needs --estimates and --refutations artifacts");
        const auto analysis = load_analysis_dataset(cfg);
        std::vector<causalse::EffectEstimate> estimates;
        const Json estimates_doc = causalse::load_json_file(explain_estimates_path);
        for (const Json& e : estimates_doc.at("estimates"))
            estimates.push_back(causalse::effect_estimate_from_json(e));
        std::vector<causalse::RefutationResult> refutations;
        const Json refutations_doc = causalse::load_json_file(explain_refutations_path);
        for (const Json& r : refutations_doc.at("refutations"))
            refutations.push_back(causalse::refutation_from_json(r));
        const auto stage5 = causalse::run_explanation_stage(analysis, cfg, estimates, refutations);
        emit(Json{{"associational", to_json(stage5.associational)},
                  {"alpha", cfg.alpha},
                  {"classifications", stage5.classifications},
                  {"verdict", to_json(stage5.verdict)}},
             explain_opts.out);
        return 0;
    }

    if (cmd_simulate->parsed()) {
        causalse::ScmSpec spec = causalse::parse_scm_spec(read_file(simulate_spec));
        if (simulate_seed) spec.seed = static_cast<uint64_t>(*simulate_seed);
        std::map<std::string, double> interventions;
        if (!simulate_do.empty()) {
            for (const auto& token : causalse::ConfigFile::split(simulate_do, ',')) {
                auto eq = token.find('=');
                if (eq == std::string::npos)
                    throw causalse::Error("--do expects name=value pairs, got '" + token + "'");
                double value;
                if (!causalse::detail::parse_number(token.substr(eq + 1), value))
                    throw causalse::Error("--do: bad value in '" + token + "'");
                interventions[causalse::ConfigFile::trim(token.substr(0, eq))] = value;
            }
        }
        const auto ds = causalse::sample_do(spec, static_cast<size_t>(simulate_n), interventions,
                                            include_unobserved);
        if (simulate_out.empty())
            causalse::write_csv(ds, std::cout);
        else
            causalse::write_csv(ds, simulate_out);
        return 0;
    }

    if (cmd_pipeline->parsed()) {
        const AnalysisConfig cfg = pipeline_opts.resolve();
        if (cfg.data_path.empty()) throw causalse::Error("--data (or config `data`) is required");
        const auto outcome = causalse::run_pipeline(cfg);
        std::cout << causalse::render_text_report(outcome.report);
        if (!cfg.out_path.empty()) {
            causalse::write_json_file(outcome.report, cfg.out_path);
            std::cout << "report written to " << cfg.out_path << "\n";
        } else {
            std::cout << causalse::dump_json(outcome.report);
        }
        return outcome.completed ? 0 : 1;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const causalse::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
