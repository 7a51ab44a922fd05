#pragma once

// SCM simulator: linear-Gaussian and Bernoulli-logit structural equations
// over a causal graph, ancestral sampling, the do-operator, and ground-truth
// ATE computation (Monte-Carlo interventional contrast plus a closed-form
// path-coefficient sum when the downstream mechanism is linear).
//
// Each node draws its exogenous noise from a stream keyed by the node name,
// so adding or intervening on one node never perturbs the noise of another.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/graph.hpp"
#include "causalse/random.hpp"

namespace causalse {

struct StructuralEquation {
    enum class Kind { LinearGaussian, BernoulliLogit } kind = Kind::LinearGaussian;
    std::string target;
    double intercept = 0.0;
    std::map<std::string, double> coefficients; // parent name -> coefficient
    double noise_std = 0.0;                     // LinearGaussian only
};

struct ScmSpec {
    CausalGraph graph;
    std::map<std::string, StructuralEquation> equations; // one per node
    uint64_t seed = 0;
};

namespace detail {

inline void validate_scm(const ScmSpec& spec) {
    for (const auto& node : spec.graph.nodes()) {
        auto it = spec.equations.find(node);
        if (it == spec.equations.end()) throw Error("scm: node '" + node + "' has no equation");
        const StructuralEquation& eq = it->second;
        if (eq.noise_std < 0.0) throw Error("scm: negative noise std on '" + node + "'");
        const auto parents = spec.graph.parents(node);
        if (parents.size() != eq.coefficients.size())
            throw Error("scm: equation for '" + node + "' does not cover its parents exactly");
        for (const auto& [parent, coef] : eq.coefficients) {
            (void)coef;
            if (!parents.count(parent))
                throw Error("scm: equation for '" + node + "' references non-parent '" + parent + "'");
        }
    }
    for (const auto& [target, eq] : spec.equations) {
        (void)eq;
        if (!spec.graph.has_node(target)) throw Error("scm: equation for unknown node '" + target + "'");
    }
}

inline std::vector<std::string> topological_order(const CausalGraph& g) {
    std::vector<std::string> order;
    std::set<std::string> placed;
    const auto& nodes = g.nodes();
    while (order.size() < nodes.size()) {
        bool progressed = false;
        for (const auto& n : nodes) {
            if (placed.count(n)) continue;
            bool ready = true;
            for (const auto& p : g.parents(n))
                if (!placed.count(p)) {
                    ready = false;
                    break;
                }
            if (ready) {
                order.push_back(n);
                placed.insert(n);
                progressed = true;
            }
        }
        if (!progressed) throw Error("scm: graph is not acyclic"); // unreachable for CausalGraph
    }
    return order;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace detail

/// Ancestral sampling with optional interventions. Intervened nodes are held
/// at their constants; their equations and noise streams are not consumed.
inline Dataset sample_impl(const ScmSpec& spec, size_t n,
                           const std::map<std::string, double>& interventions,
                           bool include_unobserved) {
    detail::validate_scm(spec);
    for (const auto& [node, value] : interventions) {
        (void)value;
        if (!spec.graph.has_node(node)) throw Error("do-intervention on unknown node '" + node + "'");
    }

    const auto order = detail::topological_order(spec.graph);
    std::map<std::string, std::vector<double>> columns;
    for (const auto& node : order) {
        std::vector<double> values(n);
        auto intervened = interventions.find(node);
        if (intervened != interventions.end()) {
            std::fill(values.begin(), values.end(), intervened->second);
            columns.emplace(node, std::move(values));
            continue;
        }
        const StructuralEquation& eq = spec.equations.at(node);
        Rng noise(derive_seed(spec.seed, node));
        for (size_t i = 0; i < n; ++i) {
            double linear = eq.intercept;
            for (const auto& [parent, coef] : eq.coefficients) linear += coef * columns.at(parent)[i];
            if (eq.kind == StructuralEquation::Kind::LinearGaussian) {
                values[i] = linear + eq.noise_std * noise.normal();
            } else {
                values[i] = noise.uniform() < detail::sigmoid(linear) ? 1.0 : 0.0;
            }
        }
        columns.emplace(node, std::move(values));
    }

    std::vector<Column> out;
    for (const auto& node : spec.graph.nodes()) {
        if (!include_unobserved && spec.graph.role(node) == VariableRole::Unobserved) continue;
        Column c;
        c.name = node;
        const StructuralEquation& eq = spec.equations.at(node);
        c.kind = eq.kind == StructuralEquation::Kind::BernoulliLogit ? ColumnKind::Binary
                                                                     : ColumnKind::Continuous;
        if (auto it = interventions.find(node);
            it != interventions.end() && it->second != 0.0 && it->second != 1.0)
            c.kind = ColumnKind::Continuous; // non-binary constant overrides the mechanism kind
        c.values = columns.at(node);
        out.push_back(std::move(c));
    }
    return Dataset(std::move(out));
}

inline Dataset sample(const ScmSpec& spec, size_t n, bool include_unobserved = false) {
    return sample_impl(spec, n, {}, include_unobserved);
}

inline Dataset sample_do(const ScmSpec& spec, size_t n,
                         const std::map<std::string, double>& interventions,
                         bool include_unobserved = false) {
    return sample_impl(spec, n, interventions, include_unobserved);
}

/// Closed-form total effect of `treatment` on `outcome`: the path-coefficient
/// sum, available when every node a directed T->Y path passes through
/// (including Y itself) is linear-Gaussian.
inline std::optional<double> true_ate_closed_form(const ScmSpec& spec, const std::string& treatment,
                                                  const std::string& outcome) {
    detail::validate_scm(spec);
    const auto desc = spec.graph.descendants(treatment);
    if (!desc.count(outcome)) return 0.0;
    const auto anc_y = spec.graph.ancestors(outcome);
    for (const auto& node : spec.graph.nodes()) {
        const bool on_path = desc.count(node) && (node == outcome || anc_y.count(node));
        if (on_path && spec.equations.at(node).kind != StructuralEquation::Kind::LinearGaussian)
            return std::nullopt;
    }
    // d(node)/d(treatment) accumulated in topological order.
    std::map<std::string, double> deff;
    deff[treatment] = 1.0;
    for (const auto& node : detail::topological_order(spec.graph)) {
        if (node == treatment) continue;
        double d = 0.0;
        if (spec.equations.at(node).kind == StructuralEquation::Kind::LinearGaussian)
            for (const auto& [parent, coef] : spec.equations.at(node).coefficients)
                d += coef * (deff.count(parent) ? deff.at(parent) : 0.0);
        deff[node] = d;
    }
    return deff.at(outcome);
}

struct TrueAteResult {
    double monte_carlo = 0.0;
    double mc_std_error = 0.0;
    std::optional<double> closed_form;
};

/// Ground-truth ATE of a binary {0,1} intervention: the Monte-Carlo
/// interventional contrast mean(Y|do(T=1)) - mean(Y|do(T=0)) with common
/// noise streams across the two arms. When the closed form applies the two
/// routes must agree within 4 Monte-Carlo standard errors.
inline TrueAteResult true_ate(const ScmSpec& spec, const std::string& treatment,
                              const std::string& outcome, size_t n_mc) {
    if (n_mc < 2) throw Error("true_ate: n_mc must be at least 2");
    const Dataset d1 = sample_do(spec, n_mc, {{treatment, 1.0}}, /*include_unobserved=*/true);
    const Dataset d0 = sample_do(spec, n_mc, {{treatment, 0.0}}, /*include_unobserved=*/true);
    const auto& y1 = d1.column(outcome).values;
    const auto& y0 = d0.column(outcome).values;
    std::vector<double> contrast(n_mc);
    for (size_t i = 0; i < n_mc; ++i) contrast[i] = y1[i] - y0[i];
    TrueAteResult r;
    r.monte_carlo = mean_of(contrast);
    r.mc_std_error = population_std(contrast) / std::sqrt(static_cast<double>(n_mc));
    r.closed_form = true_ate_closed_form(spec, treatment, outcome);
    if (r.closed_form) {
        const double tolerance = 4.0 * std::max(r.mc_std_error, 1e-12);
        if (std::abs(*r.closed_form - r.monte_carlo) > tolerance)
            throw Error("true_ate: closed form and Monte-Carlo contrast disagree beyond tolerance");
    }
    return r;
}

// ---------------------------------------------------------------------------
// SCM spec text format: graph DSL plus equation/seed lines
// ---------------------------------------------------------------------------

namespace detail {

// term grammar: <intercept> [+ <coef>*<parent>]...
inline void parse_linear_terms(const std::string& body, int line_no, double& intercept,
                               std::map<std::string, double>& coefficients) {
    auto fail = [&](const std::string& msg) {
        throw Error("scm spec line " + std::to_string(line_no) + ": " + msg);
    };
    std::vector<std::string> terms;
    {
        std::string term;
        std::istringstream in(body);
        std::string tok;
        while (in >> tok) {
            if (tok == "+") {
                if (term.empty()) fail("dangling '+'");
                terms.push_back(term);
                term.clear();
            } else {
                if (!term.empty()) fail("missing '+' between terms near '" + tok + "'");
                term = tok;
            }
        }
        if (term.empty()) fail("empty equation body");
        terms.push_back(term);
    }
    bool have_intercept = false;
    for (const std::string& term : terms) {
        auto star = term.find('*');
        if (star == std::string::npos) {
            if (have_intercept) fail("multiple intercept terms");
            double v;
            if (!parse_number(term, v)) fail("bad intercept '" + term + "'");
            intercept = v;
            have_intercept = true;
        } else {
            double coef;
            if (!parse_number(term.substr(0, star), coef)) fail("bad coefficient in '" + term + "'");
            const std::string parent = term.substr(star + 1);
            if (!valid_identifier(parent)) fail("bad parent name in '" + term + "'");
            if (!coefficients.emplace(parent, coef).second) fail("duplicate parent '" + parent + "'");
        }
    }
    if (!have_intercept) fail("equation must start with an intercept term");
}

} // namespace detail

/// Parse the SCM text format: the graph DSL extended with
///   equation <node> = <intercept> [+ <coef>*<parent>]... noise=<std>
///   equation <node> ~ bernoulli_logit(<intercept> [+ <coef>*<parent>]...)
///   seed <integer>
inline ScmSpec parse_scm_spec(const std::string& text) {
    auto lines = detail::scan_graph_spec(text, /*collect_extra=*/true);
    ScmSpec spec;
    spec.graph = CausalGraph::build(lines.nodes, lines.edges);
    for (const auto& [line_no, raw] : lines.extra) {
        auto fail = [&, ln = line_no](const std::string& msg) {
            throw Error("scm spec line " + std::to_string(ln) + ": " + msg);
        };
        std::istringstream in(raw);
        std::string keyword;
        in >> keyword;
        if (keyword == "seed") {
            long long s;
            if (!(in >> s)) fail("expected: seed <integer>");
            std::string rest;
            if (in >> rest) fail("trailing text after seed");
            spec.seed = static_cast<uint64_t>(s);
            continue;
        }
        if (keyword != "equation") fail("unknown directive '" + keyword + "'");
        std::string target, op;
        if (!(in >> target >> op)) fail("expected: equation <node> =|~ ...");
        if (!spec.graph.has_node(target)) fail("equation for undeclared node '" + target + "'");
        if (spec.equations.count(target)) fail("duplicate equation for '" + target + "'");
        std::string rest;
        std::getline(in, rest);
        StructuralEquation eq;
        eq.target = target;
        if (op == "=") {
            auto noise_pos = rest.rfind("noise=");
            if (noise_pos == std::string::npos) fail("linear equation needs a trailing noise=<std>");
            double noise;
            std::string noise_str = rest.substr(noise_pos + 6);
            // trim
            while (!noise_str.empty() && std::isspace(static_cast<unsigned char>(noise_str.back())))
                noise_str.pop_back();
            if (!detail::parse_number(noise_str, noise) || noise < 0.0)
                fail("bad noise value '" + noise_str + "'");
            eq.kind = StructuralEquation::Kind::LinearGaussian;
            eq.noise_std = noise;
            detail::parse_linear_terms(rest.substr(0, noise_pos), line_no, eq.intercept,
                                       eq.coefficients);
        } else if (op == "~") {
            auto open = rest.find("bernoulli_logit(");
            auto close = rest.rfind(')');
            if (open == std::string::npos || close == std::string::npos || close < open)
                fail("expected: ~ bernoulli_logit(<terms>)");
            eq.kind = StructuralEquation::Kind::BernoulliLogit;
            detail::parse_linear_terms(rest.substr(open + 16, close - open - 16), line_no,
                                       eq.intercept, eq.coefficients);
        } else {
            fail("expected '=' or '~' after node name");
        }
        spec.equations.emplace(target, std::move(eq));
    }
    detail::validate_scm(spec);
    return spec;
}

inline std::string emit_scm_spec(const ScmSpec& spec) {
    std::ostringstream out;
    out << emit_graph_spec(spec.graph);
    out << "seed " << spec.seed << "\n";
    std::vector<std::string> names = spec.graph.nodes();
    std::sort(names.begin(), names.end());
    for (const auto& node : names) {
        const StructuralEquation& eq = spec.equations.at(node);
        std::string terms = detail::format_double(eq.intercept);
        for (const auto& [parent, coef] : eq.coefficients)
            terms += " + " + detail::format_double(coef) + "*" + parent;
        if (eq.kind == StructuralEquation::Kind::LinearGaussian) {
            out << "equation " << node << " = " << terms
                << " noise=" << detail::format_double(eq.noise_std) << "\n";
        } else {
            out << "equation " << node << " ~ bernoulli_logit(" << terms << ")\n";
        }
    }
    return out.str();
}

} // namespace causalse
