#pragma once

// Score-based causal discovery: greedy hill-climbing over DAG space with
// add/delete/reverse moves, scored by BIC under a linear-Gaussian model with
// per-node residual-variance MLE. Background knowledge (required / forbidden
// edges, temporal tiers) constrains the search. Also provides graph vetting:
// correlational and constraint auditing of a candidate graph's edges.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/graph.hpp"
#include "causalse/random.hpp"

namespace causalse {

struct Knowledge {
    std::set<Edge> required_edges;
    std::set<Edge> forbidden_edges;
    std::vector<std::vector<std::string>> tiers; // earlier tiers first

    std::optional<size_t> tier_of(const std::string& name) const {
        for (size_t t = 0; t < tiers.size(); ++t)
            for (const auto& v : tiers[t])
                if (v == name) return t;
        return std::nullopt;
    }

    /// Edge from -> to violates the tier ordering iff `from` sits in a later
    /// tier than `to`. Same-tier and untiered variables are unconstrained.
    bool violates_tiers(const std::string& from, const std::string& to) const {
        auto tf = tier_of(from), tt = tier_of(to);
        return tf && tt && *tf > *tt;
    }

    bool allows(const std::string& from, const std::string& to) const {
        return !forbidden_edges.count({from, to}) && !violates_tiers(from, to);
    }

    void validate() const {
        for (const Edge& e : required_edges) {
            if (forbidden_edges.count(e))
                throw Error("knowledge: edge " + e.first + " -> " + e.second +
                            " is both required and forbidden");
            if (violates_tiers(e.first, e.second))
                throw Error("knowledge: required edge " + e.first + " -> " + e.second +
                            " violates the tier ordering");
        }
        std::set<std::string> seen;
        for (const auto& tier : tiers)
            for (const auto& v : tier)
                if (!seen.insert(v).second)
                    throw Error("knowledge: variable '" + v + "' appears in two tiers");
    }
};

// ---------------------------------------------------------------------------
// BIC scoring
// ---------------------------------------------------------------------------

/// Decomposable BIC scorer for a fixed variable list. Local score of a node
/// given parents = Gaussian log-likelihood at the residual-variance MLE minus
/// (log n / 2) * (|parents| + 2). Higher is better.
class BicScorer {
public:
    BicScorer(const Dataset& ds, const std::vector<std::string>& vars) : vars_(vars) {
        const size_t k = vars.size();
        std::vector<const std::vector<double>*> cols;
        cols.reserve(k);
        for (const auto& v : vars) {
            const Column& c = ds.column(v);
            if (c.kind == ColumnKind::Categorical)
                throw Error("discovery: column '" + v + "' is categorical; encode it first");
            cols.push_back(&c.values);
        }
        std::vector<size_t> complete;
        for (size_t r = 0; r < ds.row_count(); ++r) {
            bool ok = true;
            for (auto* c : cols)
                if (is_missing((*c)[r])) {
                    ok = false;
                    break;
                }
            if (ok) complete.push_back(r);
        }
        n_ = complete.size();
        if (n_ < 3) throw Error("discovery: need at least 3 complete rows");
        Eigen::MatrixXd data(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(k));
        for (size_t j = 0; j < k; ++j)
            for (size_t i = 0; i < n_; ++i)
                data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (*cols[j])[complete[i]];
        Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
        covariance_ = (centered.adjoint() * centered) / static_cast<double>(n_);
        cache_.resize(k);
    }

    size_t sample_size() const { return n_; }

    double local_score(size_t target, const std::vector<size_t>& parents) const {
        auto& cache = cache_[target];
        auto it = cache.find(parents);
        if (it != cache.end()) return it->second;

        double sigma2;
        if (parents.empty()) {
            sigma2 = covariance_(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(target));
        } else {
            const auto p = static_cast<Eigen::Index>(parents.size());
            Eigen::MatrixXd cov_pp(p, p);
            Eigen::VectorXd cov_pt(p);
            for (Eigen::Index i = 0; i < p; ++i) {
                cov_pt(i) = covariance_(static_cast<Eigen::Index>(parents[i]),
                                        static_cast<Eigen::Index>(target));
                for (Eigen::Index j = 0; j < p; ++j)
                    cov_pp(i, j) = covariance_(static_cast<Eigen::Index>(parents[i]),
                                               static_cast<Eigen::Index>(parents[j]));
            }
            Eigen::VectorXd beta = cov_pp.ldlt().solve(cov_pt);
            sigma2 = covariance_(static_cast<Eigen::Index>(target),
                                 static_cast<Eigen::Index>(target)) -
                     cov_pt.dot(beta);
        }
        sigma2 = std::max(sigma2, 1e-12);
        const double n = static_cast<double>(n_);
        const double log_likelihood =
            -0.5 * n * (std::log(2.0 * 3.141592653589793238462643383279502884 * sigma2) + 1.0);
        const double params = static_cast<double>(parents.size()) + 2.0;
        const double score = log_likelihood - 0.5 * std::log(n) * params;
        cache.emplace(parents, score);
        return score;
    }

    const std::vector<std::string>& variables() const { return vars_; }

private:
    std::vector<std::string> vars_;
    size_t n_ = 0;
    Eigen::MatrixXd covariance_;
    mutable std::vector<std::map<std::vector<size_t>, double>> cache_;
};

struct DiscoveryConfig {
    size_t restarts = 10;
    size_t max_candidates = 3;
    size_t max_iterations = 200;
    double random_edge_probability = 0.15; // restart initialization density
    uint64_t seed = 0;
};

struct ScoredGraph {
    CausalGraph graph;
    double score = 0.0;
};

struct DiscoveryResult {
    std::vector<ScoredGraph> candidates;          // descending score
    std::vector<std::string> warnings;
    std::vector<std::vector<double>> score_traces; // per restart, strictly increasing
};

namespace detail {

/// Mutable DAG state for the hill climb: parent lists over variable indices.
struct SearchState {
    size_t k = 0;
    std::vector<std::vector<size_t>> parents;

    explicit SearchState(size_t vars) : k(vars), parents(vars) {}

    bool has_edge(size_t u, size_t v) const {
        const auto& p = parents[v];
        return std::find(p.begin(), p.end(), u) != p.end();
    }
    void add_edge(size_t u, size_t v) {
        parents[v].push_back(u);
        std::sort(parents[v].begin(), parents[v].end());
    }
    void remove_edge(size_t u, size_t v) {
        auto& p = parents[v];
        p.erase(std::find(p.begin(), p.end(), u));
    }
    /// True iff a directed path u ~> v exists.
    bool reaches(size_t u, size_t v) const {
        std::vector<size_t> stack{u};
        std::vector<bool> seen(k, false);
        seen[u] = true;
        while (!stack.empty()) {
            size_t cur = stack.back();
            stack.pop_back();
            if (cur == v) return true;
            for (size_t w = 0; w < k; ++w)
                if (!seen[w] && has_edge(cur, w)) {
                    seen[w] = true;
                    stack.push_back(w);
                }
        }
        return false;
    }
    double total_score(const BicScorer& scorer) const {
        double s = 0.0;
        for (size_t v = 0; v < k; ++v) s += scorer.local_score(v, parents[v]);
        return s;
    }
};

struct Move {
    enum class Kind { Add, Delete, Reverse } kind = Kind::Add;
    size_t from = 0, to = 0;
};

inline std::vector<size_t> with_parent(std::vector<size_t> p, size_t extra) {
    p.push_back(extra);
    std::sort(p.begin(), p.end());
    return p;
}
inline std::vector<size_t> without_parent(std::vector<size_t> p, size_t drop) {
    p.erase(std::find(p.begin(), p.end(), drop));
    return p;
}

} // namespace detail

/// Greedy hill-climbing over DAGs. Deterministic given (ds, vars, knowledge,
/// config): restarts use seeds derived from config.seed, candidate graphs are
/// deduplicated by canonical text and ordered by (score desc, text asc).
inline DiscoveryResult discover(const Dataset& ds, const std::vector<std::string>& vars,
                                const Knowledge& knowledge, const DiscoveryConfig& config) {
    if (vars.size() < 2) throw Error("discover: need at least 2 variables");
    knowledge.validate();
    for (const auto& edges : {knowledge.required_edges, knowledge.forbidden_edges})
        for (const Edge& e : edges)
            if (std::find(vars.begin(), vars.end(), e.first) == vars.end() ||
                std::find(vars.begin(), vars.end(), e.second) == vars.end())
                throw Error("knowledge: edge " + e.first + " -> " + e.second +
                            " references a variable outside the search set");

    BicScorer scorer(ds, vars);
    const size_t k = vars.size();
    DiscoveryResult result;
    if (scorer.sample_size() < 10 * k)
        result.warnings.push_back("only " + std::to_string(scorer.sample_size()) +
                                  " complete rows for " + std::to_string(k) +
                                  " variables; discovery output may be unstable");

    auto index_of = [&](const std::string& name) {
        return static_cast<size_t>(std::find(vars.begin(), vars.end(), name) - vars.begin());
    };
    auto allowed = [&](size_t u, size_t v) { return knowledge.allows(vars[u], vars[v]); };
    auto required = [&](size_t u, size_t v) {
        return knowledge.required_edges.count({vars[u], vars[v]}) > 0;
    };

    detail::SearchState base(k);
    for (const Edge& e : knowledge.required_edges) {
        const size_t u = index_of(e.first), v = index_of(e.second);
        if (base.reaches(v, u))
            throw Error("knowledge: required edges contain a cycle through " + e.first);
        base.add_edge(u, v);
    }

    auto climb = [&](detail::SearchState state) {
        std::vector<double> trace;
        trace.push_back(state.total_score(scorer));
        for (size_t iter = 0; iter < config.max_iterations; ++iter) {
            double best_delta = 1e-9; // strictly improving moves only
            std::optional<detail::Move> best;
            for (size_t u = 0; u < k; ++u) {
                for (size_t v = 0; v < k; ++v) {
                    if (u == v) continue;
                    if (state.has_edge(u, v)) {
                        if (!required(u, v)) {
                            const double delta =
                                scorer.local_score(v, detail::without_parent(state.parents[v], u)) -
                                scorer.local_score(v, state.parents[v]);
                            if (delta > best_delta) {
                                best_delta = delta;
                                best = {detail::Move::Kind::Delete, u, v};
                            }
                            if (!state.has_edge(v, u) && allowed(v, u)) {
                                // reverse u->v: cycle iff u still reaches v without this edge
                                state.remove_edge(u, v);
                                const bool cyclic = state.reaches(u, v);
                                state.add_edge(u, v);
                                if (!cyclic) {
                                    const double delta_rev =
                                        scorer.local_score(
                                            v, detail::without_parent(state.parents[v], u)) +
                                        scorer.local_score(u,
                                                           detail::with_parent(state.parents[u], v)) -
                                        scorer.local_score(v, state.parents[v]) -
                                        scorer.local_score(u, state.parents[u]);
                                    if (delta_rev > best_delta) {
                                        best_delta = delta_rev;
                                        best = {detail::Move::Kind::Reverse, u, v};
                                    }
                                }
                            }
                        }
                    } else if (!state.has_edge(v, u) && allowed(u, v) && !state.reaches(v, u)) {
                        const double delta =
                            scorer.local_score(v, detail::with_parent(state.parents[v], u)) -
                            scorer.local_score(v, state.parents[v]);
                        if (delta > best_delta) {
                            best_delta = delta;
                            best = {detail::Move::Kind::Add, u, v};
                        }
                    }
                }
            }
            if (!best) break;
            switch (best->kind) {
                case detail::Move::Kind::Add: state.add_edge(best->from, best->to); break;
                case detail::Move::Kind::Delete: state.remove_edge(best->from, best->to); break;
                case detail::Move::Kind::Reverse:
                    state.remove_edge(best->from, best->to);
                    state.add_edge(best->to, best->from);
                    break;
            }
            trace.push_back(state.total_score(scorer));
        }
        return std::make_pair(state, trace);
    };

    std::map<std::string, ScoredGraph> by_text;
    auto to_graph = [&](const detail::SearchState& state) {
        std::vector<GraphNode> nodes;
        for (const auto& v : vars) nodes.push_back({v, VariableRole::Other});
        std::vector<Edge> edges;
        for (size_t v = 0; v < k; ++v)
            for (size_t u : state.parents[v]) edges.emplace_back(vars[u], vars[v]);
        return CausalGraph::build(nodes, edges);
    };

    for (size_t r = 0; r < config.restarts; ++r) {
        detail::SearchState start = base;
        if (r > 0) {
            // Random DAG start: random topological order compatible with the
            // required edges, then independent coin flips per allowed edge.
            Rng rng(derive_seed(derive_seed(config.seed, "discovery_restart"), r));
            std::vector<size_t> order;
            {
                std::vector<size_t> indegree(k, 0);
                for (size_t v = 0; v < k; ++v)
                    for (size_t u : base.parents[v]) {
                        (void)u;
                        ++indegree[v];
                    }
                std::vector<size_t> ready;
                for (size_t v = 0; v < k; ++v)
                    if (indegree[v] == 0) ready.push_back(v);
                while (!ready.empty()) {
                    const size_t pick = rng.below(ready.size());
                    const size_t v = ready[pick];
                    ready.erase(ready.begin() + static_cast<long>(pick));
                    order.push_back(v);
                    for (size_t w = 0; w < k; ++w)
                        if (base.has_edge(v, w) && --indegree[w] == 0) ready.push_back(w);
                }
            }
            std::vector<size_t> position(k);
            for (size_t i = 0; i < k; ++i) position[order[i]] = i;
            for (size_t u = 0; u < k; ++u)
                for (size_t v = 0; v < k; ++v) {
                    if (u == v || position[u] >= position[v]) continue;
                    if (start.has_edge(u, v) || !allowed(u, v)) continue;
                    if (rng.uniform() < config.random_edge_probability) start.add_edge(u, v);
                }
        }
        auto [state, trace] = climb(std::move(start));
        result.score_traces.push_back(std::move(trace));
        CausalGraph g = to_graph(state);
        const double score = state.total_score(scorer);
        const std::string text = emit_graph_spec(g);
        auto it = by_text.find(text);
        if (it == by_text.end()) by_text.emplace(text, ScoredGraph{std::move(g), score});
    }

    std::vector<std::pair<std::string, ScoredGraph>> ranked(by_text.begin(), by_text.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.score != b.second.score) return a.second.score > b.second.score;
        return a.first < b.first;
    });
    for (auto& [text, sg] : ranked) {
        (void)text;
        if (result.candidates.size() >= config.max_candidates) break;
        result.candidates.push_back(std::move(sg));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Graph vetting
// ---------------------------------------------------------------------------

enum class EdgeVerdict { Supported, Weak, Violating };

inline const char* to_string(EdgeVerdict v) {
    switch (v) {
        case EdgeVerdict::Supported: return "supported";
        case EdgeVerdict::Weak: return "weak";
        case EdgeVerdict::Violating: return "violating";
    }
    return "?";
}

struct EdgeVetting {
    Edge edge;
    std::optional<double> pearson_r;
    std::optional<double> spearman_rho;
    EdgeVerdict verdict = EdgeVerdict::Supported;
    std::string note; // violated rule, or why correlations are absent
};

struct VettingReport {
    std::vector<EdgeVetting> edges; // one entry per graph edge
    double rho_min = 0.1;

    std::vector<const EdgeVetting*> weak_edges() const {
        std::vector<const EdgeVetting*> out;
        for (const auto& e : edges)
            if (e.verdict == EdgeVerdict::Weak) out.push_back(&e);
        return out;
    }
    std::vector<const EdgeVetting*> violations() const {
        std::vector<const EdgeVetting*> out;
        for (const auto& e : edges)
            if (e.verdict == EdgeVerdict::Violating) out.push_back(&e);
        return out;
    }
};

/// Classify every edge of `g` against the data and the knowledge constraints:
/// violating (forbidden or against tier order) beats weak (|spearman| below
/// rho_min); everything else is supported. Unobserved endpoints skip the
/// correlation check with a note.
inline VettingReport vet(const CausalGraph& g, const Dataset& ds, const Knowledge& knowledge,
                         double rho_min = 0.1) {
    knowledge.validate();
    VettingReport report;
    report.rho_min = rho_min;
    for (const Edge& e : g.edges()) {
        EdgeVetting ev;
        ev.edge = e;
        const bool from_latent = g.role(e.first) == VariableRole::Unobserved;
        const bool to_latent = g.role(e.second) == VariableRole::Unobserved;
        const bool measurable = !from_latent && !to_latent && ds.has_column(e.first) &&
                                ds.has_column(e.second);
        if (measurable) {
            const auto& a = ds.column(e.first);
            const auto& b = ds.column(e.second);
            if (a.kind != ColumnKind::Categorical && b.kind != ColumnKind::Categorical) {
                auto r = correlation_matrix(ds, {e.first, e.second}, CorrelationMethod::Pearson);
                auto rho = correlation_matrix(ds, {e.first, e.second}, CorrelationMethod::Spearman);
                ev.pearson_r = r.at(0, 1);
                ev.spearman_rho = rho.at(0, 1);
            } else {
                ev.note = "categorical endpoint; correlation not computed";
            }
        } else if (from_latent || to_latent) {
            ev.note = "unobserved endpoint; correlation not computed";
        } else {
            ev.note = "endpoint column missing from dataset; correlation not computed";
        }

        if (knowledge.forbidden_edges.count(e)) {
            ev.verdict = EdgeVerdict::Violating;
            ev.note = "edge is in the forbidden set";
        } else if (knowledge.violates_tiers(e.first, e.second)) {
            ev.verdict = EdgeVerdict::Violating;
            ev.note = "edge points from a later tier to an earlier tier";
        } else if (ev.spearman_rho && std::abs(*ev.spearman_rho) < rho_min) {
            ev.verdict = EdgeVerdict::Weak;
        } else {
            ev.verdict = EdgeVerdict::Supported;
        }
        report.edges.push_back(std::move(ev));
    }
    return report;
}

} // namespace causalse
