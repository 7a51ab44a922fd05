#pragma once

// Independent test oracles. These deliberately re-derive results through the
// most literal route available (path enumeration, straight accumulation
// loops, direct histogram arithmetic) so they share no machinery with the
// implementation paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "causalse/graph.hpp"
#include "causalse/random.hpp"

namespace oracle {

using causalse::CausalGraph;
using causalse::Edge;
using causalse::GraphNode;
using causalse::VariableRole;

// ---------------------------------------------------------------------------
// d-separation by exhaustive simple-path enumeration
// ---------------------------------------------------------------------------

struct PathEnumerator {
    const CausalGraph& g;
    std::vector<std::string> nodes;
    std::map<std::string, std::set<std::string>> undirected; // skeleton
    std::map<std::string, std::set<std::string>> descendants;

    explicit PathEnumerator(const CausalGraph& graph) : g(graph), nodes(graph.nodes()) {
        for (const auto& n : nodes) {
            undirected[n] = {};
            descendants[n] = graph.descendants(n);
        }
        for (const Edge& e : graph.edges()) {
            undirected[e.first].insert(e.second);
            undirected[e.second].insert(e.first);
        }
    }

    bool path_blocked(const std::vector<std::string>& path, const std::set<std::string>& z) const {
        for (size_t i = 1; i + 1 < path.size(); ++i) {
            const std::string& prev = path[i - 1];
            const std::string& mid = path[i];
            const std::string& next = path[i + 1];
            const bool collider = g.has_edge(prev, mid) && g.has_edge(next, mid);
            if (collider) {
                bool opened = z.count(mid) > 0;
                if (!opened)
                    for (const auto& d : descendants.at(mid))
                        if (z.count(d)) {
                            opened = true;
                            break;
                        }
                if (!opened) return true;
            } else {
                if (z.count(mid)) return true;
            }
        }
        return false;
    }

    bool all_paths_blocked(const std::string& from, const std::string& to,
                           const std::set<std::string>& z) const {
        std::vector<std::string> path{from};
        std::set<std::string> on_path{from};
        bool separated = true;
        walk(from, to, z, path, on_path, separated);
        return separated;
    }

private:
    void walk(const std::string& at, const std::string& to, const std::set<std::string>& z,
              std::vector<std::string>& path, std::set<std::string>& on_path,
              bool& separated) const {
        if (!separated) return;
        if (at == to) {
            if (!path_blocked(path, z)) separated = false;
            return;
        }
        for (const auto& next : undirected.at(at)) {
            if (on_path.count(next)) continue;
            path.push_back(next);
            on_path.insert(next);
            walk(next, to, z, path, on_path, separated);
            path.pop_back();
            on_path.erase(next);
        }
    }
};

inline bool d_separated(const CausalGraph& g, const std::set<std::string>& x,
                        const std::set<std::string>& y, const std::set<std::string>& z) {
    PathEnumerator paths(g);
    for (const auto& a : x)
        for (const auto& b : y)
            if (!paths.all_paths_blocked(a, b, z)) return false;
    return true;
}

/// Direct backdoor-criterion re-check using the path-enumeration oracle:
/// (a) no member of s descends from t, (b) s separates t and y once the edges
/// out of t are removed.
inline bool backdoor_ok(const CausalGraph& g, const std::string& t, const std::string& y,
                        const std::set<std::string>& s) {
    const auto desc = g.descendants(t);
    for (const auto& v : s)
        if (v == t || v == y || desc.count(v)) return false;
    return d_separated(g.without_edges_out_of({t}), {t}, {y}, s);
}

// ---------------------------------------------------------------------------
// Random DAGs for property tests
// ---------------------------------------------------------------------------

inline CausalGraph random_dag(causalse::Rng& rng, size_t node_count, double edge_probability,
                              double unobserved_probability = 0.0) {
    std::vector<GraphNode> nodes;
    for (size_t i = 0; i < node_count; ++i) {
        VariableRole role = rng.uniform() < unobserved_probability ? VariableRole::Unobserved
                                                                   : VariableRole::Other;
        nodes.push_back({"n" + std::to_string(i), role});
    }
    std::vector<size_t> order(node_count);
    for (size_t i = 0; i < node_count; ++i) order[i] = i;
    for (size_t i = node_count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<Edge> edges;
    for (size_t a = 0; a < node_count; ++a)
        for (size_t b = a + 1; b < node_count; ++b)
            if (rng.uniform() < edge_probability)
                edges.emplace_back(nodes[order[a]].name, nodes[order[b]].name);
    return CausalGraph::build(nodes, edges);
}

/// All subsets of the given pool, as sets.
inline std::vector<std::set<std::string>> all_subsets(const std::vector<std::string>& pool) {
    std::vector<std::set<std::string>> out;
    const size_t total = size_t{1} << pool.size();
    for (size_t mask = 0; mask < total; ++mask) {
        std::set<std::string> subset;
        for (size_t i = 0; i < pool.size(); ++i)
            if (mask & (size_t{1} << i)) subset.insert(pool[i]);
        out.push_back(std::move(subset));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Straight-loop statistics
// ---------------------------------------------------------------------------

struct LoopStats {
    double mean = 0.0, std_dev = 0.0, min = 0.0, max = 0.0;
};

inline LoopStats loop_stats(const std::vector<double>& values) {
    LoopStats s;
    long double sum = 0.0L;
    s.min = values.front();
    s.max = values.front();
    for (double v : values) {
        sum += v;
        if (v < s.min) s.min = v;
        if (v > s.max) s.max = v;
    }
    s.mean = static_cast<double>(sum / static_cast<long double>(values.size()));
    long double sq = 0.0L;
    for (double v : values) sq += (static_cast<long double>(v) - s.mean) * (static_cast<long double>(v) - s.mean);
    s.std_dev = static_cast<double>(std::sqrt(static_cast<double>(sq / static_cast<long double>(values.size()))));
    return s;
}

// ---------------------------------------------------------------------------
// Independent Jensen-Shannon divergence (30 bins, 1e-10 smoothing, log2)
// ---------------------------------------------------------------------------

inline double jsd_recompute(const std::vector<double>& a, const std::vector<double>& b) {
    double lo = a[0], hi = a[0];
    for (double v : a) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : b) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const int bins = 30;
    std::vector<long double> p(bins, 0.0L), q(bins, 0.0L);
    auto fill = [&](const std::vector<double>& sample, std::vector<long double>& h) {
        for (double v : sample) {
            int bin = 0;
            if (hi > lo) {
                bin = static_cast<int>((v - lo) / (hi - lo) * bins);
                if (bin >= bins) bin = bins - 1;
                if (bin < 0) bin = 0;
            }
            h[static_cast<size_t>(bin)] += 1.0L;
        }
        long double total = 0.0L;
        for (auto& x : h) {
            x = x / static_cast<long double>(sample.size()) + 1e-10L;
            total += x;
        }
        for (auto& x : h) x /= total;
    };
    fill(a, p);
    fill(b, q);
    long double kl_pm = 0.0L, kl_qm = 0.0L;
    for (int i = 0; i < bins; ++i) {
        const long double m = (p[i] + q[i]) / 2.0L;
        kl_pm += p[i] * std::log2(static_cast<double>(p[i] / m));
        kl_qm += q[i] * std::log2(static_cast<double>(q[i] / m));
    }
    return static_cast<double>(kl_pm / 2.0L + kl_qm / 2.0L);
}

} // namespace oracle
