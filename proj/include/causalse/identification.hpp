#pragma once

// Estimand identification: minimal backdoor adjustment sets, instrumental
// variables (unconditional form), frontdoor identifiability, and the
// strategy-selection entry point that turns a vetted graph into an Estimand.

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/graph.hpp"

namespace causalse {

enum class EstimandStrategy { Backdoor, Instrumental, FrontdoorIdentifiable, NotIdentified };

inline const char* to_string(EstimandStrategy s) {
    switch (s) {
        case EstimandStrategy::Backdoor: return "Backdoor";
        case EstimandStrategy::Instrumental: return "Instrumental";
        case EstimandStrategy::FrontdoorIdentifiable: return "FrontdoorIdentifiable";
        case EstimandStrategy::NotIdentified: return "NotIdentified";
    }
    return "?";
}

struct Estimand {
    EstimandStrategy strategy = EstimandStrategy::NotIdentified;
    std::string treatment;
    std::string outcome;
    std::set<std::string> adjustment_set; // Backdoor
    std::set<std::string> instruments;    // Instrumental
    std::set<std::string> mediators;      // FrontdoorIdentifiable
    std::string expression;               // rendering of p(outcome | do(treatment))
};

namespace detail {

inline std::string join_names(const std::set<std::string>& names, const char* sep = ",") {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += sep;
        out += n;
    }
    return out;
}

inline std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Deterministic subset enumeration of `pool` (sorted) by size then
/// lexicographic order; calls fn(subset) until it returns true.
template <typename Fn>
inline void for_each_subset_by_size(const std::vector<std::string>& pool, Fn&& fn) {
    const size_t n = pool.size();
    for (size_t size = 0; size <= n; ++size) {
        std::vector<size_t> idx(size);
        for (size_t i = 0; i < size; ++i) idx[i] = i;
        for (;;) {
            std::set<std::string> subset;
            for (size_t i : idx) subset.insert(pool[i]);
            if (fn(subset)) return;
            if (size == 0) break;
            // next combination
            size_t k = size;
            while (k > 0 && idx[k - 1] == n - size + k - 1) --k;
            if (k == 0) break;
            ++idx[k - 1];
            for (size_t i = k; i < size; ++i) idx[i] = idx[i - 1] + 1;
        }
        if (size == 0 && n == 0) break;
    }
}

inline bool is_subset(const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

} // namespace detail

/// Maximum number of candidate adjustment/mediator variables the subset
/// enumeration will accept before giving up with an error.
inline constexpr size_t kMaxEnumerationCandidates = 20;

/// The backdoor criterion for adjustment set S relative to (T, Y):
/// (a) no member of S is a descendant of T, and (b) S d-separates T and Y in
/// the graph with all edges out of T removed.
inline bool satisfies_backdoor(const CausalGraph& g, const std::string& treatment,
                               const std::string& outcome, const std::set<std::string>& s) {
    const auto desc = g.descendants(treatment);
    for (const auto& v : s)
        if (v == treatment || v == outcome || desc.count(v)) return false;
    const CausalGraph cut = g.without_edges_out_of({treatment});
    return cut.is_d_separated({treatment}, {outcome}, s);
}

/// All inclusion-minimal backdoor adjustment sets over observed non-descendants
/// of the treatment, ordered by (size, lexicographic names). Empty list iff no
/// observed set satisfies the criterion.
inline std::vector<std::set<std::string>> backdoor_sets(const CausalGraph& g,
                                                        const std::string& treatment,
                                                        const std::string& outcome) {
    if (treatment == outcome) throw Error("backdoor_sets: treatment equals outcome");
    if (g.role(treatment) == VariableRole::Unobserved || g.role(outcome) == VariableRole::Unobserved)
        throw Error("backdoor_sets: treatment and outcome must be observed");

    const auto desc = g.descendants(treatment);
    std::vector<std::string> pool;
    for (const auto& v : observed_nodes(g)) {
        if (v == treatment || v == outcome) continue;
        if (desc.count(v)) continue;
        pool.push_back(v);
    }
    std::sort(pool.begin(), pool.end());
    if (pool.size() > kMaxEnumerationCandidates)
        throw Error("backdoor_sets: " + std::to_string(pool.size()) +
                    " candidate variables exceed the enumeration cap of " +
                    std::to_string(kMaxEnumerationCandidates));

    const CausalGraph cut = g.without_edges_out_of({treatment});
    std::vector<std::set<std::string>> minimal;
    detail::for_each_subset_by_size(pool, [&](const std::set<std::string>& s) {
        for (const auto& found : minimal)
            if (detail::is_subset(found, s)) return false; // superset of a minimal set
        if (cut.is_d_separated({treatment}, {outcome}, s)) minimal.push_back(s);
        return false; // keep enumerating
    });
    return minimal;
}

/// Classical (unconditional) instruments: observed I with a directed path to
/// T, no directed path to Y avoiding T, and d-separated from Y once the edges
/// out of T are cut.
inline std::set<std::string> find_instruments(const CausalGraph& g, const std::string& treatment,
                                              const std::string& outcome) {
    if (treatment == outcome) throw Error("find_instruments: treatment equals outcome");
    const CausalGraph cut = g.without_edges_out_of({treatment});
    const CausalGraph no_t = g.without_node(treatment);
    const auto anc_t = g.ancestors(treatment);
    std::set<std::string> instruments;
    for (const auto& candidate : observed_nodes(g)) {
        if (candidate == treatment || candidate == outcome) continue;
        if (!anc_t.count(candidate)) continue;
        if (no_t.descendants(candidate).count(outcome)) continue; // path to Y avoiding T
        if (!cut.is_d_separated({candidate}, {outcome}, {})) continue;
        instruments.insert(candidate);
    }
    return instruments;
}

/// Frontdoor identifiability: smallest observed mediator set M such that
/// (a) M intercepts every directed T->Y path, (b) no unblocked backdoor path
/// from T to M, and (c) every backdoor path from M to Y is blocked by T.
/// Identification flag only; frontdoor estimation is not provided.
inline std::optional<std::set<std::string>> frontdoor_check(const CausalGraph& g,
                                                            const std::string& treatment,
                                                            const std::string& outcome) {
    if (treatment == outcome) throw Error("frontdoor_check: treatment equals outcome");
    const auto desc_t = g.descendants(treatment);
    if (!desc_t.count(outcome)) return std::nullopt; // no directed effect to route

    std::vector<std::string> pool;
    for (const auto& v : observed_nodes(g)) {
        if (v == treatment || v == outcome) continue;
        if (desc_t.count(v) && g.ancestors(outcome).count(v)) pool.push_back(v);
    }
    std::sort(pool.begin(), pool.end());
    if (pool.size() > kMaxEnumerationCandidates)
        throw Error("frontdoor_check: candidate mediators exceed the enumeration cap");

    const CausalGraph cut_t = g.without_edges_out_of({treatment});
    std::optional<std::set<std::string>> result;
    detail::for_each_subset_by_size(pool, [&](const std::set<std::string>& m) {
        if (m.empty()) return false;
        // (a) removing M must disconnect every directed T->Y path
        CausalGraph pruned = g;
        for (const auto& v : m) pruned = pruned.without_node(v);
        if (pruned.descendants(treatment).count(outcome)) return false;
        // (b) all backdoor paths T..M blocked by the empty set
        if (!cut_t.is_d_separated({treatment}, m, {})) return false;
        // (c) all backdoor paths M..Y blocked by {T}
        const CausalGraph cut_m = g.without_edges_out_of(m);
        if (!cut_m.is_d_separated(m, {outcome}, {treatment})) return false;
        result = m;
        return true;
    });
    return result;
}

namespace detail {

inline std::string render_backdoor_expression(const std::string& t, const std::string& y,
                                              const std::set<std::string>& adj) {
    if (adj.empty()) return "p(" + y + "|" + t + ")";
    std::string values, conds, joint;
    for (const auto& z : adj) {
        const std::string v = lower(z);
        if (!values.empty()) {
            values += ",";
            conds += ",";
            joint += ",";
        }
        values += v;
        conds += z + "=" + v;
        joint += z + "=" + v;
    }
    const std::string sum = adj.size() == 1 ? "sum_" + values : "sum_{" + values + "}";
    return sum + " p(" + y + "|" + t + "," + conds + ") p(" + joint + ")";
}

inline std::string render_frontdoor_expression(const std::string& t, const std::string& y,
                                               const std::set<std::string>& med) {
    std::string values, conds;
    for (const auto& m : med) {
        const std::string v = lower(m);
        if (!values.empty()) {
            values += ",";
            conds += ",";
        }
        values += v;
        conds += m + "=" + v;
    }
    const std::string sum = med.size() == 1 ? "sum_" + values : "sum_{" + values + "}";
    const std::string tp = lower(t) + "'";
    return sum + " p(" + conds + "|" + t + ") sum_" + tp + " p(" + y + "|" + conds + "," + t +
           "=" + tp + ") p(" + t + "=" + tp + ")";
}

} // namespace detail

/// Pick an identification strategy for the graph's declared treatment/outcome
/// pair. Precedence: Backdoor (smallest set, lexicographic ties), then
/// FrontdoorIdentifiable, then Instrumental, then NotIdentified.
inline Estimand identify(const CausalGraph& g) {
    std::vector<std::string> treatments, outcomes;
    for (const auto& n : g.nodes()) {
        if (g.role(n) == VariableRole::Treatment) treatments.push_back(n);
        if (g.role(n) == VariableRole::Outcome) outcomes.push_back(n);
    }
    if (treatments.size() != 1 || outcomes.size() != 1)
        throw Error("identify: graph must declare exactly one treatment and one outcome node (got " +
                    std::to_string(treatments.size()) + " treatment, " +
                    std::to_string(outcomes.size()) + " outcome)");

    Estimand e;
    e.treatment = treatments.front();
    e.outcome = outcomes.front();

    auto sets = backdoor_sets(g, e.treatment, e.outcome);
    if (!sets.empty()) {
        e.strategy = EstimandStrategy::Backdoor;
        e.adjustment_set = sets.front();
        e.expression = detail::render_backdoor_expression(e.treatment, e.outcome, e.adjustment_set);
        return e;
    }
    if (auto mediators = frontdoor_check(g, e.treatment, e.outcome)) {
        e.strategy = EstimandStrategy::FrontdoorIdentifiable;
        e.mediators = *mediators;
        e.expression = detail::render_frontdoor_expression(e.treatment, e.outcome, e.mediators);
        return e;
    }
    auto instruments = find_instruments(g, e.treatment, e.outcome);
    if (!instruments.empty()) {
        e.strategy = EstimandStrategy::Instrumental;
        e.instruments = instruments;
        e.expression = "p(" + e.outcome + "|do(" + e.treatment + ")) via instruments {" +
                       detail::join_names(instruments) + "}";
        return e;
    }
    e.strategy = EstimandStrategy::NotIdentified;
    e.expression = "p(" + e.outcome + "|do(" + e.treatment + ")) not identified from observed variables";
    return e;
}

/// One-line rendering used by the CLI, e.g. `Backdoor {Z}`.
inline std::string summary_line(const Estimand& e) {
    const std::set<std::string>* set = nullptr;
    switch (e.strategy) {
        case EstimandStrategy::Backdoor: set = &e.adjustment_set; break;
        case EstimandStrategy::Instrumental: set = &e.instruments; break;
        case EstimandStrategy::FrontdoorIdentifiable: set = &e.mediators; break;
        case EstimandStrategy::NotIdentified: break;
    }
    std::string names = set ? detail::join_names(*set) : "";
    return std::string(to_string(e.strategy)) + " {" + names + "}";
}

} // namespace causalse
