#pragma once

// JSON report assembly. Uses nlohmann::ordered_json for stable key order and
// a custom dumper that writes floating-point numbers with %.17g so values
// round-trip exactly and two identical runs produce identical bytes. The
// determinism hash covers the serialized report minus the timing field.

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/discovery.hpp"
#include "causalse/estimation.hpp"
#include "causalse/explanation.hpp"
#include "causalse/identification.hpp"
#include "causalse/random.hpp"
#include "causalse/refutation.hpp"

namespace causalse {

using Json = nlohmann::ordered_json;

namespace detail {

inline void append_escaped(const std::string& s, std::string& out) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

inline void dump_json_value(const Json& j, std::string& out, int indent) {
    const std::string pad(static_cast<size_t>(indent) * 2, ' ');
    const std::string pad_inner(static_cast<size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case Json::value_t::null: out += "null"; break;
        case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case Json::value_t::number_integer:
            out += std::to_string(j.get<long long>());
            break;
        case Json::value_t::number_unsigned:
            out += std::to_string(j.get<unsigned long long>());
            break;
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (std::isnan(v) || std::isinf(v)) {
                out += "null";
            } else {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out += buf;
            }
            break;
        }
        case Json::value_t::string: append_escaped(j.get<std::string>(), out); break;
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                break;
            }
            out += "[\n";
            for (size_t i = 0; i < j.size(); ++i) {
                out += pad_inner;
                dump_json_value(j[i], out, indent + 1);
                if (i + 1 < j.size()) out += ',';
                out += '\n';
            }
            out += pad + "]";
            break;
        }
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                break;
            }
            out += "{\n";
            size_t i = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++i) {
                out += pad_inner;
                append_escaped(it.key(), out);
                out += ": ";
                dump_json_value(it.value(), out, indent + 1);
                if (i + 1 < j.size()) out += ',';
                out += '\n';
            }
            out += pad + "}";
            break;
        }
        default: throw Error("dump_json: unsupported value type");
    }
}

} // namespace detail

/// Serialize with stable key order and %.17g floats; ends with a newline.
inline std::string dump_json(const Json& j) {
    std::string out;
    detail::dump_json_value(j, out, 0);
    out += '\n';
    return out;
}

inline void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << dump_json(j);
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error("failed to parse JSON from " + path + ": " + e.what());
    }
    return j;
}

inline std::string fnv1a_hex(const std::string& data) {
    const uint64_t h = fnv1a64(data);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// to_json for the domain types
// ---------------------------------------------------------------------------

inline Json to_json(const ConfidenceInterval& ci) {
    return Json{{"low", ci.low}, {"high", ci.high}};
}

inline Json to_json(const ColumnProfile& p) {
    Json j;
    j["name"] = p.name;
    j["kind"] = to_string(p.kind);
    j["mean"] = p.mean; // NaN becomes null for all-missing columns
    j["std"] = p.std_dev;
    j["min"] = p.min;
    j["max"] = p.max;
    j["missing_count"] = p.missing_count;
    j["distinct_count"] = p.distinct_count;
    return j;
}

inline Json to_json(const std::vector<ColumnProfile>& profiles) {
    Json j;
    j["std_definition"] = "population";
    j["correlation_missing_policy"] = "pairwise deletion";
    j["profiles"] = Json::array();
    for (const auto& p : profiles) j["profiles"].push_back(to_json(p));
    return j;
}

inline Json to_json(const Diagnostics& d) {
    Json metrics = Json::object();
    for (const auto& [name, value] : d.metrics) metrics[name] = value;
    Json j;
    j["metrics"] = metrics;
    j["notes"] = d.notes;
    return j;
}

inline Json to_json(const Estimand& e) {
    Json j;
    j["strategy"] = to_string(e.strategy);
    j["treatment"] = e.treatment;
    j["outcome"] = e.outcome;
    j["adjustment_set"] = std::vector<std::string>(e.adjustment_set.begin(), e.adjustment_set.end());
    j["instruments"] = std::vector<std::string>(e.instruments.begin(), e.instruments.end());
    j["mediators"] = std::vector<std::string>(e.mediators.begin(), e.mediators.end());
    j["expression"] = e.expression;
    return j;
}

inline Estimand estimand_from_json(const Json& j) {
    Estimand e;
    const std::string strategy = j.at("strategy").get<std::string>();
    if (strategy == "Backdoor") e.strategy = EstimandStrategy::Backdoor;
    else if (strategy == "Instrumental") e.strategy = EstimandStrategy::Instrumental;
    else if (strategy == "FrontdoorIdentifiable") e.strategy = EstimandStrategy::FrontdoorIdentifiable;
    else if (strategy == "NotIdentified") e.strategy = EstimandStrategy::NotIdentified;
    else throw Error("estimand_from_json: unknown strategy '" + strategy + "'");
    e.treatment = j.at("treatment").get<std::string>();
    e.outcome = j.at("outcome").get<std::string>();
    for (const auto& v : j.at("adjustment_set")) e.adjustment_set.insert(v.get<std::string>());
    for (const auto& v : j.at("instruments")) e.instruments.insert(v.get<std::string>());
    for (const auto& v : j.at("mediators")) e.mediators.insert(v.get<std::string>());
    e.expression = j.at("expression").get<std::string>();
    return e;
}

inline Json to_json(const EffectEstimate& e) {
    Json j;
    j["estimator"] = to_string(e.estimator);
    j["effect_kind"] = to_string(e.effect_kind);
    j["point"] = e.point;
    j["se_boot"] = e.se_boot;
    j["p_value"] = e.p_value;
    j["ci95"] = to_json(e.ci95);
    j["n_treated"] = e.n_treated;
    j["n_control"] = e.n_control;
    j["diagnostics"] = to_json(e.diagnostics);
    return j;
}

inline EffectEstimate effect_estimate_from_json(const Json& j) {
    EffectEstimate e;
    auto kind = parse_estimator_kind(j.at("estimator").get<std::string>());
    if (!kind) throw Error("effect_estimate_from_json: unknown estimator");
    e.estimator = *kind;
    const std::string effect = j.at("effect_kind").get<std::string>();
    e.effect_kind = effect == "ATT" ? EffectKind::Att
                    : effect == "ATC" ? EffectKind::Atc
                                      : EffectKind::Ate;
    e.point = j.at("point").get<double>();
    e.se_boot = j.at("se_boot").get<double>();
    e.p_value = j.at("p_value").get<double>();
    e.ci95.low = j.at("ci95").at("low").get<double>();
    e.ci95.high = j.at("ci95").at("high").get<double>();
    e.n_treated = j.at("n_treated").get<size_t>();
    e.n_control = j.at("n_control").get<size_t>();
    for (auto it = j.at("diagnostics").at("metrics").begin();
         it != j.at("diagnostics").at("metrics").end(); ++it)
        e.diagnostics.add(it.key(), it.value().get<double>());
    for (const auto& note : j.at("diagnostics").at("notes"))
        e.diagnostics.notes.push_back(note.get<std::string>());
    return e;
}

inline Json to_json(const RefutationResult& r) {
    Json j;
    j["refuter"] = to_string(r.refuter);
    j["estimator"] = to_string(r.estimator);
    j["original_point"] = r.original_point;
    j["refuted_point"] = r.refuted_point;
    j["spread"] = r.spread;
    j["repetitions"] = r.repetitions;
    j["threshold"] = r.threshold;
    j["verdict"] = r.passed ? "pass" : "fail";
    return j;
}

inline RefutationResult refutation_from_json(const Json& j) {
    RefutationResult r;
    r.refuter = j.at("refuter").get<std::string>() == "placebo_treatment"
                    ? RefuterKind::PlaceboTreatment
                    : RefuterKind::RandomCommonCause;
    auto kind = parse_estimator_kind(j.at("estimator").get<std::string>());
    if (!kind) throw Error("refutation_from_json: unknown estimator");
    r.estimator = *kind;
    r.original_point = j.at("original_point").get<double>();
    r.refuted_point = j.at("refuted_point").get<double>();
    r.spread = j.at("spread").get<double>();
    r.repetitions = j.at("repetitions").get<size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.passed = j.at("verdict").get<std::string>() == "pass";
    return r;
}

inline Json to_json(const VettingReport& report) {
    Json edges = Json::array();
    for (const auto& e : report.edges) {
        Json item;
        item["from"] = e.edge.first;
        item["to"] = e.edge.second;
        item["pearson_r"] = e.pearson_r ? Json(*e.pearson_r) : Json(nullptr);
        item["spearman_rho"] = e.spearman_rho ? Json(*e.spearman_rho) : Json(nullptr);
        item["verdict"] = to_string(e.verdict);
        item["note"] = e.note;
        edges.push_back(std::move(item));
    }
    Json j;
    j["rho_min"] = report.rho_min;
    j["edges"] = edges;
    return j;
}

inline Json to_json(const AssociationalSummary& s) {
    Json arms = Json::array();
    for (const auto& arm : s.arms) {
        Json a;
        a["arm"] = arm.arm;
        a["n"] = arm.n;
        a["mean"] = arm.mean;
        a["ci95"] = to_json(arm.ci95);
        arms.push_back(std::move(a));
    }
    Json pairs = Json::array();
    for (const auto& pair : s.pairs) {
        Json p;
        p["arm_a"] = pair.arm_a;
        p["arm_b"] = pair.arm_b;
        p["jsd"] = pair.jsd;
        p["spearman_rho"] = pair.spearman_rho ? Json(*pair.spearman_rho) : Json(nullptr);
        p["note"] = pair.note;
        pairs.push_back(std::move(p));
    }
    Json j;
    j["outcome"] = s.outcome;
    j["bootstrap_replicates"] = s.bootstrap_replicates;
    j["arms"] = arms;
    j["pairs"] = pairs;
    return j;
}

inline Json to_json(const ComparativeVerdict& v) {
    Json j;
    j["association_signal"] = to_string(v.association_signal);
    j["causal_signal"] = to_string(v.causal_signal);
    j["refuters_passed"] = v.refuters_passed;
    j["verdict"] = to_string(v.verdict);
    j["recommendation"] = v.recommendation;
    return j;
}

inline Json to_json(const CateTable& t) {
    Json bins = Json::array();
    for (const auto& bin : t.bins) {
        Json b;
        b["label"] = bin.label;
        b["lower"] = bin.lower;
        b["upper"] = bin.upper;
        b["n"] = bin.n;
        b["low_power"] = bin.low_power;
        b["estimate"] = to_json(bin.estimate);
        bins.push_back(std::move(b));
    }
    Json j;
    j["modifier"] = t.modifier;
    j["bins"] = bins;
    return j;
}

} // namespace causalse
