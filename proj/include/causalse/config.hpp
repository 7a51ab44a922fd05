#pragma once

// Declarative analysis configuration: a small key = value file format with
// [section] tables, plus the resolved AnalysisConfig the pipeline runs from.
// Every CLI flag can override a file key; the seed is mandatory and has no
// wall-clock default.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/discovery.hpp"
#include "causalse/estimation.hpp"
#include "causalse/refutation.hpp"

namespace causalse {

// ---------------------------------------------------------------------------
// key = value file with [section] tables
// ---------------------------------------------------------------------------

class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file: " + path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str(), path);
    }

    static ConfigFile parse(const std::string& text, const std::string& source = "<config>") {
        ConfigFile cfg;
        std::istringstream in(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto fail = [&](const std::string& msg) {
                throw Error(source + " line " + std::to_string(line_no) + ": " + msg);
            };
            std::string stripped = strip_comment(line);
            stripped = trim(stripped);
            if (stripped.empty()) continue;
            if (stripped.front() == '[') {
                if (stripped.back() != ']') fail("unterminated section header");
                section = trim(stripped.substr(1, stripped.size() - 2));
                if (section.empty()) fail("empty section name");
                continue;
            }
            auto eq = stripped.find('=');
            if (eq == std::string::npos) fail("expected key = value");
            std::string key = trim(stripped.substr(0, eq));
            std::string value = trim(stripped.substr(eq + 1));
            if (key.empty()) fail("empty key");
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            cfg.values_[section][key] = value;
        }
        return cfg;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        return s != values_.end() && s->second.count(key) > 0;
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        if (s == values_.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        return k->second;
    }

    std::optional<double> get_number(const std::string& section, const std::string& key) const {
        auto v = get(section, key);
        if (!v) return std::nullopt;
        double out;
        if (!detail::parse_number(*v, out))
            throw Error("config key '" + qualified(section, key) + "': '" + *v + "' is not a number");
        return out;
    }

    std::optional<bool> get_bool(const std::string& section, const std::string& key) const {
        auto v = get(section, key);
        if (!v) return std::nullopt;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw Error("config key '" + qualified(section, key) + "': '" + *v + "' is not a boolean");
    }

    const std::map<std::string, std::string>& section(const std::string& name) const {
        static const std::map<std::string, std::string> empty;
        auto s = values_.find(name);
        return s == values_.end() ? empty : s->second;
    }

    static std::string trim(const std::string& s) {
        size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::vector<std::string> split(const std::string& s, char sep) {
        std::vector<std::string> out;
        std::string field;
        std::istringstream in(s);
        while (std::getline(in, field, sep)) {
            field = trim(field);
            if (!field.empty()) out.push_back(field);
        }
        return out;
    }

private:
    static std::string strip_comment(const std::string& line) {
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) return line.substr(0, i);
        }
        return line;
    }

    static std::string qualified(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }

    std::map<std::string, std::map<std::string, std::string>> values_;
};

// ---------------------------------------------------------------------------
// Resolved analysis configuration
// ---------------------------------------------------------------------------

struct ComparisonSpec {
    std::string column;
    std::string control;
    std::string treated;
};

struct AnalysisConfig {
    std::string data_path;
    std::optional<std::string> graph_path;
    bool discover_graph = false;
    std::string treatment;
    std::string outcome;
    std::optional<ComparisonSpec> comparison;
    std::vector<EstimatorKind> estimators{EstimatorKind::Psm, EstimatorKind::Pss,
                                          EstimatorKind::Psw};
    size_t bootstrap_replicates = 1000;
    size_t refuter_repetitions = 20;
    double alpha = 0.05;
    std::optional<uint64_t> seed; // mandatory at run time
    std::string out_path;
    SchemaHints schema;
    TransformSpec transform_steps;
    std::optional<std::string> unit_id;
    double rho_min = 0.1;
    size_t k_strata = 5;
    std::optional<std::string> cate_modifier;
    std::vector<std::string> discovery_vars; // default: all non-categorical columns
    DiscoveryConfig discovery;
    Knowledge knowledge;
    std::optional<double> placebo_max_abs; // refuter threshold overrides
    std::optional<double> rcc_max_drift;
    std::map<std::string, double> estimator_weights; // lower-case estimator name -> weight

    uint64_t require_seed() const {
        if (!seed) throw Error("seed is mandatory: set `seed = <integer>` or pass --seed");
        return *seed;
    }

    double weight_of(EstimatorKind kind) const {
        std::string name = to_string(kind);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto it = estimator_weights.find(name);
        return it == estimator_weights.end() ? 1.0 : it->second;
    }
};

namespace detail {

inline Edge parse_edge_token(const std::string& token) {
    auto arrow = token.find("->");
    if (arrow == std::string::npos)
        throw Error("expected '<from> -> <to>' edge, got '" + token + "'");
    std::string from = ConfigFile::trim(token.substr(0, arrow));
    std::string to = ConfigFile::trim(token.substr(arrow + 2));
    if (from.empty() || to.empty()) throw Error("bad edge '" + token + "'");
    return {from, to};
}

inline TransformStep parse_transform_step(const std::string& token) {
    auto open = token.find('(');
    auto close = token.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw Error("bad transform step '" + token + "': expected op(args)");
    const std::string op = ConfigFile::trim(token.substr(0, open));
    const auto args = ConfigFile::split(token.substr(open + 1, close - open - 1), ',');
    TransformStep step;
    if (op == "zscore") {
        if (args.size() != 1) throw Error("zscore(column) takes one argument");
        step.op = TransformStep::Op::ZScore;
        step.column = args[0];
    } else if (op == "binarize") {
        if (args.size() != 3 && args.size() != 4)
            throw Error("binarize(column, control, treated[, new_name]) takes 3 or 4 arguments");
        step.op = TransformStep::Op::Binarize;
        step.column = args[0];
        step.control_level = args[1];
        step.treatment_level = args[2];
        if (args.size() == 4) step.new_name = args[3];
    } else if (op == "rename") {
        if (args.size() != 2) throw Error("rename(old, new) takes two arguments");
        step.op = TransformStep::Op::Rename;
        step.column = args[0];
        step.new_name = args[1];
    } else if (op == "drop") {
        if (args.size() != 1) throw Error("drop(column) takes one argument");
        step.op = TransformStep::Op::Drop;
        step.column = args[0];
    } else {
        throw Error("unknown transform op '" + op + "'");
    }
    return step;
}

} // namespace detail

inline std::vector<EstimatorKind> parse_estimator_list(const std::string& text) {
    std::vector<EstimatorKind> out;
    for (const auto& token : ConfigFile::split(text, ',')) {
        auto kind = parse_estimator_kind(token);
        if (!kind) throw Error("unknown estimator '" + token + "'");
        out.push_back(*kind);
    }
    if (out.empty()) throw Error("estimator list is empty");
    return out;
}

/// Build the resolved configuration from a parsed config file. Relative
/// data/graph paths are resolved against `base_dir` (the config file's
/// directory) so a bundled config works from any working directory.
inline AnalysisConfig analysis_config_from(const ConfigFile& file,
                                           const std::string& base_dir = "") {
    auto resolve = [&base_dir](const std::string& path) {
        if (base_dir.empty() || path.empty() || path.front() == '/') return path;
        return base_dir + "/" + path;
    };
    AnalysisConfig cfg;
    if (auto v = file.get("", "data")) cfg.data_path = resolve(*v);
    if (auto v = file.get("", "graph")) cfg.graph_path = resolve(*v);
    if (auto v = file.get_bool("", "discover")) cfg.discover_graph = *v;
    if (auto v = file.get("", "treatment")) cfg.treatment = *v;
    if (auto v = file.get("", "outcome")) cfg.outcome = *v;
    if (auto v = file.get_number("", "seed")) cfg.seed = static_cast<uint64_t>(*v);
    if (auto v = file.get_number("", "alpha")) cfg.alpha = *v;
    if (auto v = file.get_number("", "bootstrap")) cfg.bootstrap_replicates = static_cast<size_t>(*v);
    if (auto v = file.get_number("", "refuter_reps")) cfg.refuter_repetitions = static_cast<size_t>(*v);
    if (auto v = file.get("", "estimators")) cfg.estimators = parse_estimator_list(*v);
    if (auto v = file.get("", "out")) cfg.out_path = *v;
    if (auto v = file.get("", "unit_id")) cfg.unit_id = *v;
    if (auto v = file.get_number("", "rho_min")) cfg.rho_min = *v;
    if (auto v = file.get_number("", "k_strata")) cfg.k_strata = static_cast<size_t>(*v);
    if (auto v = file.get("", "cate_modifier")) cfg.cate_modifier = *v;

    for (const auto& [column, kind_name] : file.section("schema")) {
        auto kind = parse_column_kind(kind_name);
        if (!kind) throw Error("config [schema]: unknown kind '" + kind_name + "'");
        cfg.schema.emplace(column, *kind);
    }
    if (auto v = file.get("transform", "steps"))
        for (const auto& token : ConfigFile::split(*v, ';'))
            cfg.transform_steps.push_back(detail::parse_transform_step(token));

    if (file.has("comparison", "column")) {
        ComparisonSpec cmp;
        cmp.column = *file.get("comparison", "column");
        auto control = file.get("comparison", "control");
        auto treated = file.get("comparison", "treated");
        if (!control || !treated)
            throw Error("config [comparison]: needs column, control and treated");
        cmp.control = *control;
        cmp.treated = *treated;
        cfg.comparison = cmp;
    }

    if (auto v = file.get_bool("discovery", "enabled")) cfg.discover_graph = *v;
    if (auto v = file.get_number("discovery", "restarts"))
        cfg.discovery.restarts = static_cast<size_t>(*v);
    if (auto v = file.get_number("discovery", "candidates"))
        cfg.discovery.max_candidates = static_cast<size_t>(*v);
    if (auto v = file.get_number("discovery", "max_iterations"))
        cfg.discovery.max_iterations = static_cast<size_t>(*v);
    if (auto v = file.get("discovery", "vars")) cfg.discovery_vars = ConfigFile::split(*v, ',');

    if (auto v = file.get("knowledge", "required"))
        for (const auto& token : ConfigFile::split(*v, ';'))
            cfg.knowledge.required_edges.insert(detail::parse_edge_token(token));
    if (auto v = file.get("knowledge", "forbidden"))
        for (const auto& token : ConfigFile::split(*v, ';'))
            cfg.knowledge.forbidden_edges.insert(detail::parse_edge_token(token));
    if (auto v = file.get("knowledge", "tiers"))
        for (const auto& tier : ConfigFile::split(*v, '|'))
            cfg.knowledge.tiers.push_back(ConfigFile::split(tier, ','));

    if (auto v = file.get_number("refuter", "placebo_max_abs")) cfg.placebo_max_abs = *v;
    if (auto v = file.get_number("refuter", "rcc_max_drift")) cfg.rcc_max_drift = *v;

    for (const auto& [name, value] : file.section("weights")) {
        double w;
        if (!detail::parse_number(value, w) || w < 0.0)
            throw Error("config [weights]: bad weight for '" + name + "'");
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        cfg.estimator_weights[lower] = w;
    }

    if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw Error("config: alpha must lie in (0,1)");
    return cfg;
}

} // namespace causalse
