#include <catch2/catch_amalgamated.hpp>

#include "causalse/discovery.hpp"
#include "causalse/simulation.hpp"
#include "oracle_helpers.hpp"

using namespace causalse;

namespace {

ScmSpec chain_spec(uint64_t seed) {
    ScmSpec spec;
    spec.graph = CausalGraph::build(
        {{"A", VariableRole::Other}, {"B", VariableRole::Other}, {"C", VariableRole::Other}},
        {{"A", "B"}, {"B", "C"}});
    StructuralEquation a;
    a.target = "A";
    a.noise_std = 1.0;
    StructuralEquation b;
    b.target = "B";
    b.coefficients = {{"A", 1.0}};
    b.noise_std = 1.0;
    StructuralEquation c;
    c.target = "C";
    c.coefficients = {{"B", 1.0}};
    c.noise_std = 1.0;
    spec.equations = {{"A", a}, {"B", b}, {"C", c}};
    spec.seed = seed;
    return spec;
}

std::set<std::pair<std::string, std::string>> skeleton(const CausalGraph& g) {
    std::set<std::pair<std::string, std::string>> out;
    for (const Edge& e : g.edges()) {
        auto ordered = e.first < e.second ? e : Edge{e.second, e.first};
        out.insert(ordered);
    }
    return out;
}

} // namespace

TEST_CASE("chain data recovers the chain skeleton") {
    Dataset ds = sample(chain_spec(100), 2000);
    DiscoveryConfig cfg;
    cfg.seed = 1;
    auto result = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    REQUIRE_FALSE(result.candidates.empty());
    CHECK(skeleton(result.candidates.front().graph) ==
          std::set<std::pair<std::string, std::string>>{{"A", "B"}, {"B", "C"}});
}

TEST_CASE("tiers force the chain orientation") {
    Dataset ds = sample(chain_spec(100), 2000);
    Knowledge k;
    k.tiers = {{"A"}, {"B"}, {"C"}};
    DiscoveryConfig cfg;
    cfg.seed = 1;
    auto result = discover(ds, {"A", "B", "C"}, k, cfg);
    REQUIRE_FALSE(result.candidates.empty());
    const CausalGraph& g = result.candidates.front().graph;
    CHECK(g.has_edge("A", "B"));
    CHECK(g.has_edge("B", "C"));
    CHECK(g.edge_count() == 2);
}

TEST_CASE("independent columns yield an empty graph") {
    ScmSpec spec;
    spec.graph = CausalGraph::build(
        {{"A", VariableRole::Other}, {"B", VariableRole::Other}, {"C", VariableRole::Other}}, {});
    for (const auto& name : {"A", "B", "C"}) {
        StructuralEquation eq;
        eq.target = name;
        eq.noise_std = 1.0;
        spec.equations.emplace(name, eq);
    }
    spec.seed = 200;
    Dataset ds = sample(spec, 2000);
    DiscoveryConfig cfg;
    cfg.seed = 2;
    auto result = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    REQUIRE_FALSE(result.candidates.empty());
    CHECK(result.candidates.front().graph.edge_count() == 0);
}

TEST_CASE("required edges are kept, forbidden edges never appear") {
    Dataset ds = sample(chain_spec(300), 1500);
    Knowledge k;
    k.required_edges = {{"A", "C"}};
    k.forbidden_edges = {{"C", "B"}, {"B", "C"}};
    DiscoveryConfig cfg;
    cfg.seed = 3;
    auto result = discover(ds, {"A", "B", "C"}, k, cfg);
    for (const auto& sg : result.candidates) {
        CHECK(sg.graph.has_edge("A", "C"));
        CHECK_FALSE(sg.graph.has_edge("C", "B"));
        CHECK_FALSE(sg.graph.has_edge("B", "C"));
    }
}

TEST_CASE("discovery output always satisfies tiers") {
    Dataset ds = sample(chain_spec(301), 1000);
    Knowledge k;
    k.tiers = {{"C"}, {"B", "A"}}; // reversed on purpose
    DiscoveryConfig cfg;
    cfg.seed = 4;
    auto result = discover(ds, {"A", "B", "C"}, k, cfg);
    for (const auto& sg : result.candidates)
        for (const Edge& e : sg.graph.edges()) CHECK_FALSE(k.violates_tiers(e.first, e.second));
}

TEST_CASE("contradictory knowledge is rejected") {
    Knowledge k;
    k.required_edges = {{"A", "B"}};
    k.forbidden_edges = {{"A", "B"}};
    CHECK_THROWS_WITH(k.validate(), Catch::Matchers::ContainsSubstring("required and forbidden"));
    Knowledge tiers;
    tiers.required_edges = {{"B", "A"}};
    tiers.tiers = {{"A"}, {"B"}};
    CHECK_THROWS_WITH(tiers.validate(), Catch::Matchers::ContainsSubstring("tier"));
}

TEST_CASE("categorical variables are rejected") {
    Dataset ds({Column{"k", ColumnKind::Categorical, {0, 1, 0, 1}, {"a", "b"}},
                Column{"x", ColumnKind::Continuous, {1, 2, 3, 4}, {}}});
    DiscoveryConfig cfg;
    cfg.seed = 5;
    CHECK_THROWS_AS(discover(ds, {"k", "x"}, Knowledge{}, cfg), Error);
}

TEST_CASE("BIC total score decomposes over nodes") {
    Dataset ds = sample(chain_spec(400), 500);
    BicScorer scorer(ds, {"A", "B", "C"});
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        CausalGraph g = oracle::random_dag(rng, 3, 0.5);
        double total = 0.0;
        for (size_t v = 0; v < 3; ++v) {
            std::vector<size_t> parents;
            for (const auto& p : g.parents("n" + std::to_string(v)))
                parents.push_back(static_cast<size_t>(p[1] - '0'));
            std::sort(parents.begin(), parents.end());
            total += scorer.local_score(v, parents);
        }
        // the same sum accumulated in the opposite order
        double total_reversed = 0.0;
        for (size_t v = 3; v-- > 0;) {
            std::vector<size_t> parents;
            for (const auto& p : g.parents("n" + std::to_string(v)))
                parents.push_back(static_cast<size_t>(p[1] - '0'));
            std::sort(parents.begin(), parents.end());
            total_reversed += scorer.local_score(v, parents);
        }
        CHECK_THAT(total, Catch::Matchers::WithinAbs(total_reversed, 1e-9));
    }
}

TEST_CASE("hill-climbing score traces are strictly increasing") {
    Dataset ds = sample(chain_spec(500), 1200);
    DiscoveryConfig cfg;
    cfg.seed = 6;
    auto result = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    REQUIRE_FALSE(result.score_traces.empty());
    for (const auto& trace : result.score_traces) {
        for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] > trace[i - 1]);
    }
}

TEST_CASE("discovery is deterministic given the seed") {
    Dataset ds = sample(chain_spec(600), 1000);
    DiscoveryConfig cfg;
    cfg.seed = 7;
    auto a = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    auto b = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (size_t i = 0; i < a.candidates.size(); ++i) {
        CHECK(emit_graph_spec(a.candidates[i].graph) == emit_graph_spec(b.candidates[i].graph));
        CHECK(a.candidates[i].score == b.candidates[i].score);
    }
}

TEST_CASE("small samples trigger the row-count warning") {
    Dataset ds = sample(chain_spec(700), 20);
    DiscoveryConfig cfg;
    cfg.seed = 8;
    cfg.restarts = 2;
    auto result = discover(ds, {"A", "B", "C"}, Knowledge{}, cfg);
    CHECK_FALSE(result.warnings.empty());
}

TEST_CASE("vet classifies supported, weak and violating edges") {
    // data simulated from the triangle: all its edges are supported
    ScmSpec spec;
    spec.graph = CausalGraph::build({{"Z", VariableRole::Other},
                                     {"T", VariableRole::Other},
                                     {"Y", VariableRole::Other}},
                                    {{"Z", "T"}, {"Z", "Y"}, {"T", "Y"}});
    StructuralEquation z;
    z.target = "Z";
    z.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.kind = StructuralEquation::Kind::BernoulliLogit;
    t.coefficients = {{"Z", 1.5}};
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 2.0}, {"Z", 2.0}};
    y.noise_std = 1.0;
    spec.equations = {{"Z", z}, {"T", t}, {"Y", y}};
    spec.seed = 900;
    Dataset ds = sample(spec, 2000);

    auto report = vet(spec.graph, ds, Knowledge{}, 0.1);
    REQUIRE(report.edges.size() == 3);
    for (const auto& e : report.edges) CHECK(e.verdict == EdgeVerdict::Supported);

    // an edge into an independently generated column is weak
    Rng rng(901);
    Column noise{"N", ColumnKind::Continuous, {}, {}};
    for (size_t i = 0; i < ds.row_count(); ++i) noise.values.push_back(rng.normal());
    Dataset with_noise = ds.with_column(noise);
    CausalGraph g2 = CausalGraph::build({{"Z", VariableRole::Other},
                                         {"T", VariableRole::Other},
                                         {"Y", VariableRole::Other},
                                         {"N", VariableRole::Other}},
                                        {{"Z", "T"}, {"Z", "Y"}, {"T", "Y"}, {"T", "N"}});
    auto report2 = vet(g2, with_noise, Knowledge{}, 0.1);
    bool found_weak = false;
    for (const auto& e : report2.edges)
        if (e.edge == Edge{"T", "N"}) {
            CHECK(e.verdict == EdgeVerdict::Weak);
            REQUIRE(e.spearman_rho.has_value());
            CHECK(std::abs(*e.spearman_rho) < 0.1);
            found_weak = true;
        }
    CHECK(found_weak);
    CHECK(report2.weak_edges().size() >= 1);

    // tiers make outcome -> treatment violating
    CausalGraph g3 = CausalGraph::build(
        {{"T", VariableRole::Other}, {"Y", VariableRole::Other}}, {{"Y", "T"}});
    Knowledge k;
    k.tiers = {{"T"}, {"Y"}};
    auto report3 = vet(g3, ds, k, 0.1);
    REQUIRE(report3.edges.size() == 1);
    CHECK(report3.edges[0].verdict == EdgeVerdict::Violating);
    CHECK(report3.violations().size() == 1);
}

TEST_CASE("vet skips unobserved endpoints with a note and is read-only") {
    ScmSpec spec = chain_spec(902);
    Dataset ds = sample(spec, 500);
    CausalGraph g = CausalGraph::build({{"A", VariableRole::Other},
                                        {"B", VariableRole::Other},
                                        {"C", VariableRole::Other},
                                        {"U", VariableRole::Unobserved}},
                                       {{"A", "B"}, {"B", "C"}, {"U", "C"}});
    auto before = profile(ds);
    auto report = vet(g, ds, Knowledge{}, 0.1);
    auto after = profile(ds);
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].mean == after[i].mean);
    REQUIRE(report.edges.size() == 3);
    bool found_note = false;
    for (const auto& e : report.edges)
        if (e.edge.first == "U") {
            CHECK_FALSE(e.pearson_r.has_value());
            CHECK(e.note.find("unobserved") != std::string::npos);
            found_note = true;
        }
    CHECK(found_note);
    // every graph edge appears exactly once
    std::set<Edge> seen;
    for (const auto& e : report.edges) CHECK(seen.insert(e.edge).second);
    CHECK(seen.size() == g.edges().size());
}

TEST_CASE("vet notes observed endpoints whose column is absent from the data") {
    Dataset ds({Column{"A", ColumnKind::Continuous, {1, 2, 3}, {}}});
    CausalGraph g = CausalGraph::build(
        {{"A", VariableRole::Other}, {"B", VariableRole::Other}}, {{"A", "B"}});
    auto report = vet(g, ds, Knowledge{}, 0.1);
    REQUIRE(report.edges.size() == 1);
    CHECK_FALSE(report.edges[0].pearson_r.has_value());
    CHECK(report.edges[0].note.find("missing") != std::string::npos);
}
