#pragma once

// Causal DAG with variable roles: construction with cycle rejection, parent /
// ancestor queries, exact d-separation via reachability, and a line-oriented
// text format (`node X role=...` / `edge A -> B`).

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "causalse/common.hpp"

namespace causalse {

enum class VariableRole {
    Treatment,
    Outcome,
    Confounder,
    Instrument,
    EffectModifier,
    Other,
    Unobserved,
};

inline const char* to_string(VariableRole r) {
    switch (r) {
        case VariableRole::Treatment: return "treatment";
        case VariableRole::Outcome: return "outcome";
        case VariableRole::Confounder: return "confounder";
        case VariableRole::Instrument: return "instrument";
        case VariableRole::EffectModifier: return "effect_modifier";
        case VariableRole::Other: return "other";
        case VariableRole::Unobserved: return "unobserved";
    }
    return "?";
}

inline std::optional<VariableRole> parse_variable_role(const std::string& s) {
    if (s == "treatment") return VariableRole::Treatment;
    if (s == "outcome") return VariableRole::Outcome;
    if (s == "confounder") return VariableRole::Confounder;
    if (s == "instrument") return VariableRole::Instrument;
    if (s == "effect_modifier") return VariableRole::EffectModifier;
    if (s == "other") return VariableRole::Other;
    if (s == "unobserved") return VariableRole::Unobserved;
    return std::nullopt;
}

struct GraphNode {
    std::string name;
    VariableRole role = VariableRole::Other;
};

using Edge = std::pair<std::string, std::string>; // cause -> effect

class CausalGraph {
public:
    CausalGraph() = default;

    /// Validate and build. Throws on duplicate nodes, unknown endpoints,
    /// self-loops and cycles (the message names one offending cycle).
    static CausalGraph build(const std::vector<GraphNode>& nodes, const std::vector<Edge>& edges) {
        CausalGraph g;
        for (const GraphNode& n : nodes) g.add_node_impl(n.name, n.role);
        for (const Edge& e : edges) g.add_edge_impl(e.first, e.second);
        return g;
    }

    size_t node_count() const { return names_.size(); }
    size_t edge_count() const { return edge_total_; }
    bool has_node(const std::string& name) const { return id_of(name).has_value(); }

    VariableRole role(const std::string& name) const { return roles_[require(name)]; }

    /// Node names in insertion order.
    const std::vector<std::string>& nodes() const { return names_; }

    /// Edges sorted by (cause, effect) name.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edge_total_);
        for (size_t u = 0; u < names_.size(); ++u)
            for (size_t v : children_[u]) out.emplace_back(names_[u], names_[v]);
        std::sort(out.begin(), out.end());
        return out;
    }

    bool has_edge(const std::string& from, const std::string& to) const {
        const size_t u = require(from), v = require(to);
        return std::find(children_[u].begin(), children_[u].end(), v) != children_[u].end();
    }

    std::set<std::string> parents(const std::string& name) const {
        return name_set(parents_[require(name)]);
    }
    std::set<std::string> children(const std::string& name) const {
        return name_set(children_[require(name)]);
    }
    std::set<std::string> ancestors(const std::string& name) const {
        return name_set(reach(require(name), parents_));
    }
    std::set<std::string> descendants(const std::string& name) const {
        return name_set(reach(require(name), children_));
    }

    /// New graph with the node's role replaced.
    CausalGraph with_role(const std::string& name, VariableRole role) const {
        CausalGraph g = *this;
        g.roles_[require(name)] = role;
        return g;
    }

    /// New graph with one edge added (validated, cycles rejected).
    CausalGraph with_edge(const std::string& from, const std::string& to) const {
        CausalGraph g = *this;
        g.add_edge_impl(from, to);
        return g;
    }

    /// New graph with every edge leaving any of `sources` removed.
    CausalGraph without_edges_out_of(const std::set<std::string>& sources) const {
        std::vector<GraphNode> nodes;
        for (size_t i = 0; i < names_.size(); ++i) nodes.push_back({names_[i], roles_[i]});
        std::vector<Edge> kept;
        for (const Edge& e : edges())
            if (!sources.count(e.first)) kept.push_back(e);
        return build(nodes, kept);
    }

    /// New graph with a node (and its incident edges) removed.
    CausalGraph without_node(const std::string& name) const {
        require(name);
        std::vector<GraphNode> nodes;
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] != name) nodes.push_back({names_[i], roles_[i]});
        std::vector<Edge> kept;
        for (const Edge& e : edges())
            if (e.first != name && e.second != name) kept.push_back(e);
        return build(nodes, kept);
    }

    /// Structural equality: same node/role set and same edge set, independent
    /// of declaration order.
    bool structurally_equal(const CausalGraph& other) const {
        if (node_count() != other.node_count() || edge_total_ != other.edge_total_) return false;
        for (size_t i = 0; i < names_.size(); ++i) {
            if (!other.has_node(names_[i])) return false;
            if (other.role(names_[i]) != roles_[i]) return false;
        }
        return edges() == other.edges();
    }

    /// Exact d-separation of node sets X and Y given Z (reachability /
    /// "Bayes-ball"). Sets must be pairwise disjoint and non-empty for X, Y.
    bool is_d_separated(const std::set<std::string>& x_set, const std::set<std::string>& y_set,
                        const std::set<std::string>& z_set) const {
        auto ids = [&](const std::set<std::string>& names) {
            std::set<size_t> out;
            for (const auto& n : names) out.insert(require(n));
            return out;
        };
        const std::set<size_t> x = ids(x_set), y = ids(y_set), z = ids(z_set);
        if (x.empty() || y.empty()) throw Error("is_d_separated: X and Y must be non-empty");
        for (size_t i : x)
            if (y.count(i) || z.count(i)) throw Error("is_d_separated: sets must be disjoint");
        for (size_t i : y)
            if (z.count(i)) throw Error("is_d_separated: sets must be disjoint");

        // Ancestors of Z (inclusive): colliders may pass a visit upward only here.
        std::vector<bool> z_anc(names_.size(), false);
        {
            std::deque<size_t> queue(z.begin(), z.end());
            for (size_t i : z) z_anc[i] = true;
            while (!queue.empty()) {
                size_t v = queue.front();
                queue.pop_front();
                for (size_t p : parents_[v])
                    if (!z_anc[p]) {
                        z_anc[p] = true;
                        queue.push_back(p);
                    }
            }
        }

        // States: (node, arrived-from-child=up / arrived-from-parent=down).
        const size_t n = names_.size();
        std::vector<bool> visited_up(n, false), visited_down(n, false);
        std::deque<std::pair<size_t, bool>> queue; // bool: true = up
        for (size_t s : x) queue.emplace_back(s, true);
        while (!queue.empty()) {
            auto [v, up] = queue.front();
            queue.pop_front();
            auto& visited = up ? visited_up : visited_down;
            if (visited[v]) continue;
            visited[v] = true;
            if (!z.count(v) && y.count(v)) return false;
            if (up) {
                if (!z.count(v)) {
                    for (size_t p : parents_[v]) queue.emplace_back(p, true);
                    for (size_t c : children_[v]) queue.emplace_back(c, false);
                }
            } else {
                if (!z.count(v))
                    for (size_t c : children_[v]) queue.emplace_back(c, false);
                if (z_anc[v])
                    for (size_t p : parents_[v]) queue.emplace_back(p, true);
            }
        }
        return true;
    }

private:
    size_t require(const std::string& name) const {
        auto id = id_of(name);
        if (!id) throw Error("no such node: '" + name + "'");
        return *id;
    }

    std::optional<size_t> id_of(const std::string& name) const {
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        return std::nullopt;
    }

    void add_node_impl(const std::string& name, VariableRole role) {
        if (name.empty()) throw Error("node name must be non-empty");
        if (id_of(name)) throw Error("duplicate node name '" + name + "'");
        names_.push_back(name);
        roles_.push_back(role);
        parents_.emplace_back();
        children_.emplace_back();
    }

    void add_edge_impl(const std::string& from, const std::string& to) {
        auto u = id_of(from), v = id_of(to);
        if (!u) throw Error("edge endpoint '" + from + "' is not a declared node");
        if (!v) throw Error("edge endpoint '" + to + "' is not a declared node");
        if (*u == *v) throw Error("self-loop on node '" + from + "'");
        if (std::find(children_[*u].begin(), children_[*u].end(), *v) != children_[*u].end())
            return; // idempotent
        // Cycle check: a path to -> ... -> from would close a cycle.
        std::vector<size_t> path;
        if (find_path(*v, *u, path)) {
            std::string cycle = from;
            for (size_t node : path) cycle += " -> " + names_[node];
            throw Error("edge " + from + " -> " + to + " would create a cycle: " + cycle);
        }
        children_[*u].push_back(*v);
        parents_[*v].push_back(*u);
        std::sort(children_[*u].begin(), children_[*u].end());
        std::sort(parents_[*v].begin(), parents_[*v].end());
        ++edge_total_;
    }

    bool find_path(size_t from, size_t to, std::vector<size_t>& path) const {
        path.push_back(from);
        if (from == to) return true;
        for (size_t c : children_[from])
            if (find_path(c, to, path)) return true;
        path.pop_back();
        return false;
    }

    std::set<size_t> reach(size_t start, const std::vector<std::vector<size_t>>& adj) const {
        std::set<size_t> out;
        std::deque<size_t> queue{start};
        while (!queue.empty()) {
            size_t v = queue.front();
            queue.pop_front();
            for (size_t w : adj[v])
                if (out.insert(w).second) queue.push_back(w);
        }
        out.erase(start);
        return out;
    }

    std::set<std::string> name_set(const std::vector<size_t>& ids) const {
        std::set<std::string> out;
        for (size_t i : ids) out.insert(names_[i]);
        return out;
    }
    std::set<std::string> name_set(const std::set<size_t>& ids) const {
        std::set<std::string> out;
        for (size_t i : ids) out.insert(names_[i]);
        return out;
    }

    std::vector<std::string> names_;
    std::vector<VariableRole> roles_;
    std::vector<std::vector<size_t>> parents_, children_;
    size_t edge_total_ = 0;
};

inline bool is_d_separated(const CausalGraph& g, const std::set<std::string>& x,
                           const std::set<std::string>& y, const std::set<std::string>& z) {
    return g.is_d_separated(x, y, z);
}

/// Observed nodes: everything whose role is not Unobserved.
inline std::vector<std::string> observed_nodes(const CausalGraph& g) {
    std::vector<std::string> out;
    for (const auto& n : g.nodes())
        if (g.role(n) != VariableRole::Unobserved) out.push_back(n);
    return out;
}

// ---------------------------------------------------------------------------
// Graph spec text format
// ---------------------------------------------------------------------------

namespace detail {

inline bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    if (!head(s[0])) return false;
    for (size_t i = 1; i < s.size(); ++i)
        if (!tail(s[i])) return false;
    return true;
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

struct GraphSpecLines {
    std::vector<GraphNode> nodes;
    std::vector<Edge> edges;
    std::vector<std::pair<int, std::string>> extra; // line number + raw text of non-graph lines
};

/// Shared line scanner for the graph DSL. When `collect_extra` is false any
/// unknown directive is a syntax error; otherwise those lines are handed back
/// so extensions (structural equations) can parse them.
inline GraphSpecLines scan_graph_spec(const std::string& text, bool collect_extra) {
    GraphSpecLines out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw Error("graph spec line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = line;
        if (auto pos = stripped.find('#'); pos != std::string::npos) stripped.resize(pos);
        auto toks = split_ws(stripped);
        if (toks.empty()) continue;
        if (toks[0] == "node") {
            if (toks.size() != 3) fail("expected: node <name> role=<role>");
            if (!valid_identifier(toks[1])) fail("invalid node name '" + toks[1] + "'");
            if (toks[2].rfind("role=", 0) != 0) fail("expected role=<role>");
            auto role = parse_variable_role(toks[2].substr(5));
            if (!role) fail("unknown role '" + toks[2].substr(5) + "'");
            out.nodes.push_back({toks[1], *role});
        } else if (toks[0] == "edge") {
            if (toks.size() != 4 || toks[2] != "->") fail("expected: edge <name> -> <name>");
            if (!valid_identifier(toks[1])) fail("invalid node name '" + toks[1] + "'");
            if (!valid_identifier(toks[3])) fail("invalid node name '" + toks[3] + "'");
            if (toks[1] == toks[3]) fail("self-loop on node '" + toks[1] + "'");
            bool declared_from = false, declared_to = false;
            for (const auto& n : out.nodes) {
                declared_from |= n.name == toks[1];
                declared_to |= n.name == toks[3];
            }
            if (!declared_from) fail("edge endpoint '" + toks[1] + "' not declared before use");
            if (!declared_to) fail("edge endpoint '" + toks[3] + "' not declared before use");
            out.edges.emplace_back(toks[1], toks[3]);
        } else if (collect_extra) {
            out.extra.emplace_back(line_no, stripped);
        } else {
            fail("unknown directive '" + toks[0] + "'");
        }
    }
    return out;
}

} // namespace detail

inline CausalGraph parse_graph_spec(const std::string& text) {
    auto lines = detail::scan_graph_spec(text, /*collect_extra=*/false);
    return CausalGraph::build(lines.nodes, lines.edges);
}

/// Canonical text rendering: nodes sorted by name, then edges sorted by
/// (cause, effect). parse(emit(g)) is structurally equal to g, and two
/// structurally equal graphs emit identical text.
inline std::string emit_graph_spec(const CausalGraph& g) {
    std::vector<std::string> names = g.nodes();
    std::sort(names.begin(), names.end());
    std::ostringstream out;
    for (const auto& n : names) out << "node " << n << " role=" << to_string(g.role(n)) << "\n";
    for (const Edge& e : g.edges()) out << "edge " << e.first << " -> " << e.second << "\n";
    return out.str();
}

} // namespace causalse
