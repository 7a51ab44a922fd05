#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "causalse/estimation.hpp"
#include "causalse/simulation.hpp"

using namespace causalse;

namespace {

/// Z ~ N(0,1); T ~ Bernoulli(sigmoid(slope Z)); Y = tau T + z_coef Z + N(0,1).
ScmSpec confounded_triangle(double tau, double slope, double z_coef, uint64_t seed) {
    ScmSpec spec;
    spec.graph = CausalGraph::build({{"Z", VariableRole::Confounder},
                                     {"T", VariableRole::Treatment},
                                     {"Y", VariableRole::Outcome}},
                                    {{"Z", "T"}, {"Z", "Y"}, {"T", "Y"}});
    StructuralEquation z;
    z.target = "Z";
    z.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.kind = StructuralEquation::Kind::BernoulliLogit;
    t.coefficients = {{"Z", slope}};
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", tau}, {"Z", z_coef}};
    y.noise_std = 1.0;
    spec.equations = {{"Z", z}, {"T", t}, {"Y", y}};
    spec.seed = seed;
    return spec;
}

EstimatorSpec backdoor_spec(EstimatorKind kind) {
    EstimatorSpec spec;
    spec.kind = kind;
    spec.treatment = "T";
    spec.outcome = "Y";
    spec.adjustment = {"Z"};
    return spec;
}

double naive_difference(const Dataset& ds) {
    const auto& t = ds.column("T").values;
    const auto& y = ds.column("Y").values;
    double s1 = 0, s0 = 0;
    size_t n1 = 0, n0 = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == 1.0) {
            s1 += y[i];
            ++n1;
        } else {
            s0 += y[i];
            ++n0;
        }
    }
    return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

} // namespace

TEST_CASE("intercept-only propensity equals the treated fraction") {
    Dataset ds({Column{"T", ColumnKind::Binary, {1, 0, 0, 1, 0}, {}}});
    auto model = fit_propensity(ds, "T", {});
    REQUIRE(model.scores.size() == 5);
    for (double pi : model.scores) CHECK_THAT(pi, Catch::Matchers::WithinAbs(0.4, 1e-9));
    CHECK(model.converged);
}

TEST_CASE("propensity coefficients vanish when treatment ignores the covariates") {
    ScmSpec spec;
    spec.graph = CausalGraph::build(
        {{"Z", VariableRole::Other}, {"T", VariableRole::Other}}, {});
    StructuralEquation z;
    z.target = "Z";
    z.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.kind = StructuralEquation::Kind::BernoulliLogit;
    spec.equations = {{"Z", z}, {"T", t}};
    spec.seed = 1001;
    Dataset ds = sample(spec, 2000);
    auto model = fit_propensity(ds, "T", {"Z"});
    REQUIRE(model.coefficients.size() == 2);
    CHECK(model.converged);
    CHECK(std::abs(model.coefficients[1]) < 0.1);
}

TEST_CASE("propensity fit recovers known logistic coefficients on the original scale") {
    // T ~ Bernoulli(sigmoid(0.5 + 1.5 Z)) with Z ~ N(2, 3): the fitted
    // coefficients must map back from the standardized scale correctly
    Rng rng(112);
    std::vector<double> z, t;
    for (int i = 0; i < 20000; ++i) {
        const double zv = 2.0 + 3.0 * rng.normal();
        z.push_back(zv);
        t.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-(0.5 + 1.5 * zv))) ? 1.0 : 0.0);
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}}, Column{"T", ColumnKind::Binary, t, {}}});
    auto model = fit_propensity(ds, "T", {"Z"});
    REQUIRE(model.converged);
    CHECK_THAT(model.coefficients[0], Catch::Matchers::WithinAbs(0.5, 0.15));
    CHECK_THAT(model.coefficients[1], Catch::Matchers::WithinAbs(1.5, 0.1));
}

TEST_CASE("perfect separation flags non-convergence but keeps usable scores") {
    std::vector<double> z, t;
    Rng rng(33);
    for (int i = 0; i < 400; ++i) {
        const double v = rng.normal();
        z.push_back(v);
        t.push_back(v > 0 ? 1.0 : 0.0);
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}}, Column{"T", ColumnKind::Binary, t, {}}});
    auto model = fit_propensity(ds, "T", {"Z"});
    CHECK_FALSE(model.converged);
    for (double pi : model.scores) {
        CHECK(pi >= kPropensityClip);
        CHECK(pi <= 1.0 - kPropensityClip);
    }
}

TEST_CASE("propensity requires both arms and rejects categorical covariates") {
    Dataset one_arm({Column{"T", ColumnKind::Binary, {1, 1, 1}, {}}});
    CHECK_THROWS_WITH(fit_propensity(one_arm, "T", {}),
                      Catch::Matchers::ContainsSubstring("empty arm"));
    Dataset cat({Column{"T", ColumnKind::Binary, {1, 0}, {}},
                 Column{"k", ColumnKind::Categorical, {0, 1}, {"a", "b"}}});
    CHECK_THROWS_AS(fit_propensity(cat, "T", {"k"}), Error);
}

TEST_CASE("PSM returns exactly delta on an exact-match construction") {
    // pairs share identical Z; treated outcome is control outcome + 1.5
    std::vector<double> z, t, y;
    for (int pair = 0; pair < 20; ++pair) {
        const double zv = static_cast<double>(pair) / 7.0 - 1.0;
        z.push_back(zv);
        t.push_back(1.0);
        y.push_back(2.0 + 1.5);
        z.push_back(zv);
        t.push_back(0.0);
        y.push_back(2.0);
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}},
                Column{"Y", ColumnKind::Continuous, y, {}}});
    auto result = psm_point(ds, backdoor_spec(EstimatorKind::Psm));
    CHECK(result.point == 1.5);
    CHECK(*result.diagnostics.get("matched_treated") == 20.0);
    CHECK(*result.diagnostics.get("unmatched_treated") == 0.0);
}

TEST_CASE("PSM recovers the true effect on the confounded triangle") {
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 2024), 5000);
    auto result = psm_point(ds, backdoor_spec(EstimatorKind::Psm));
    CHECK_THAT(result.point, Catch::Matchers::WithinAbs(2.0, 0.15));
}

TEST_CASE("PSM errors when nothing matches inside the caliper") {
    // two widely separated Z clusters, one arm each: every logit distance is
    // enormous compared to 0.2 sd, so no unit matches
    std::vector<double> z, t, y;
    for (int i = 0; i < 50; ++i) {
        z.push_back(i < 25 ? -10.0 + 0.01 * i : 10.0 + 0.01 * i);
        t.push_back(i < 25 ? 0.0 : 1.0);
        y.push_back(0.0);
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}},
                Column{"Y", ColumnKind::Continuous, y, {}}});
    CHECK_THROWS_WITH(psm_point(ds, backdoor_spec(EstimatorKind::Psm)),
                      Catch::Matchers::ContainsSubstring("caliper"));
}

TEST_CASE("PSS recovers the effect on unconfounded and confounded data") {
    // unconfounded: T is a coin flip
    ScmSpec flat;
    flat.graph = CausalGraph::build({{"Z", VariableRole::Other},
                                     {"T", VariableRole::Other},
                                     {"Y", VariableRole::Other}},
                                    {{"T", "Y"}});
    StructuralEquation z;
    z.target = "Z";
    z.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.kind = StructuralEquation::Kind::BernoulliLogit;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 1.0}};
    y.noise_std = 1.0;
    flat.equations = {{"Z", z}, {"T", t}, {"Y", y}};
    flat.seed = 77;
    auto unconfounded = pss_point(sample(flat, 5000), backdoor_spec(EstimatorKind::Pss));
    CHECK_THAT(unconfounded.point, Catch::Matchers::WithinAbs(1.0, 0.1));

    // confounded triangle at the module-example strength
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 4100), 5000);
    auto confounded = pss_point(ds, backdoor_spec(EstimatorKind::Pss));
    CHECK_THAT(confounded.point, Catch::Matchers::WithinAbs(2.0, 0.15));
}

TEST_CASE("PSS drops one-armed strata and reports them") {
    // controls cluster at low Z, treated at high Z, one mixed band in between:
    // the extreme score strata are one-armed and must be dropped
    std::vector<double> z, t, y;
    Rng rng(9450);
    for (int i = 0; i < 300; ++i) {
        z.push_back(-4.0 + 0.001 * i);
        t.push_back(0.0);
        y.push_back(rng.normal());
    }
    for (int i = 0; i < 300; ++i) {
        z.push_back(4.0 + 0.001 * i);
        t.push_back(1.0);
        y.push_back(rng.normal());
    }
    for (int i = 0; i < 100; ++i) {
        z.push_back(0.001 * i);
        t.push_back(i % 2 == 0 ? 1.0 : 0.0);
        y.push_back(rng.normal());
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}},
                Column{"Y", ColumnKind::Continuous, y, {}}});
    auto result = pss_point(ds, backdoor_spec(EstimatorKind::Pss));
    CHECK(*result.diagnostics.get("strata_dropped") >= 1.0);
    CHECK(*result.diagnostics.get("rows_in_used_strata") < 700.0);
}

TEST_CASE("PSM supports ATT and ATC targets") {
    // exact-match construction: ATT, ATC and ATE all equal the offset
    std::vector<double> z, t, y;
    for (int pair = 0; pair < 15; ++pair) {
        const double zv = 0.3 * pair;
        z.push_back(zv);
        t.push_back(1.0);
        y.push_back(1.0 + 0.75);
        z.push_back(zv);
        t.push_back(0.0);
        y.push_back(1.0);
    }
    Dataset ds({Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}},
                Column{"Y", ColumnKind::Continuous, y, {}}});
    for (EffectKind kind : {EffectKind::Att, EffectKind::Atc, EffectKind::Ate}) {
        EstimatorSpec spec = backdoor_spec(EstimatorKind::Psm);
        spec.effect_kind = kind;
        CHECK(psm_point(ds, spec).point == 0.75);
    }
    // ATT/ATC are PSM-specific
    EstimatorSpec psw = backdoor_spec(EstimatorKind::Psw);
    psw.effect_kind = EffectKind::Att;
    CHECK_THROWS_AS(psw_point(ds, psw), Error);
}

TEST_CASE("PSS rejects a single stratum") {
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 4101), 200);
    EstimatorSpec spec = backdoor_spec(EstimatorKind::Pss);
    spec.strata = 1;
    CHECK_THROWS_WITH(pss_point(ds, spec), Catch::Matchers::ContainsSubstring("at least 2"));
}

TEST_CASE("PSW with constant scores collapses to the difference of arm means") {
    ScmSpec flat;
    flat.graph = CausalGraph::build({{"T", VariableRole::Other}, {"Y", VariableRole::Other}},
                                    {{"T", "Y"}});
    StructuralEquation t;
    t.target = "T";
    t.kind = StructuralEquation::Kind::BernoulliLogit;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 0.8}};
    y.noise_std = 1.0;
    flat.equations = {{"T", t}, {"Y", y}};
    flat.seed = 9090;
    Dataset ds = sample(flat, 3000);
    EstimatorSpec spec = backdoor_spec(EstimatorKind::Psw);
    spec.adjustment = {};
    auto result = psw_point(ds, spec);
    CHECK_THAT(result.point, Catch::Matchers::WithinAbs(naive_difference(ds), 1e-12));
}

TEST_CASE("PSW recovers the effect on the confounded triangle") {
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 512), 5000);
    auto result = psw_point(ds, backdoor_spec(EstimatorKind::Psw));
    CHECK_THAT(result.point, Catch::Matchers::WithinAbs(2.0, 0.15));
    CHECK(result.diagnostics.get("weight_max").has_value());
}

TEST_CASE("oracle recovery across 20 seeds for PSM/PSS/PSW") {
    // tolerance 0.05 * tau + 0.10 in at least 18 of 20 seeds
    const double tau = 2.0;
    const double tolerance = 0.05 * tau + 0.10;
    int ok_psm = 0, ok_pss = 0, ok_psw = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Dataset ds = sample(confounded_triangle(tau, 1.0, 1.0, seed), 5000);
        if (std::abs(psm_point(ds, backdoor_spec(EstimatorKind::Psm)).point - tau) <= tolerance)
            ++ok_psm;
        if (std::abs(pss_point(ds, backdoor_spec(EstimatorKind::Pss)).point - tau) <= tolerance)
            ++ok_pss;
        if (std::abs(psw_point(ds, backdoor_spec(EstimatorKind::Psw)).point - tau) <= tolerance)
            ++ok_psw;
    }
    CHECK(ok_psm >= 18);
    CHECK(ok_pss >= 18);
    CHECK(ok_psw >= 18);
}

TEST_CASE("confounding demo: the naive contrast is far off while adjusted estimators are close") {
    Dataset ds = sample(confounded_triangle(2.0, 1.5, 2.0, 86), 5000);
    const double naive = naive_difference(ds);
    const double psw = psw_point(ds, backdoor_spec(EstimatorKind::Psw)).point;
    CHECK(std::abs(naive - 2.0) > 3.0 * std::abs(psw - 2.0));
    CHECK(std::abs(naive - 2.0) > 0.5);
}

TEST_CASE("2SLS recovers the effect where OLS is biased upward") {
    // I ~ N(0,1); U ~ N(0,1) unobserved; T = I + U + noise; Y = 2T + U + noise
    ScmSpec spec;
    spec.graph = CausalGraph::build({{"I", VariableRole::Instrument},
                                     {"U", VariableRole::Unobserved},
                                     {"T", VariableRole::Treatment},
                                     {"Y", VariableRole::Outcome}},
                                    {{"I", "T"}, {"U", "T"}, {"U", "Y"}, {"T", "Y"}});
    StructuralEquation i;
    i.target = "I";
    i.noise_std = 1.0;
    StructuralEquation u;
    u.target = "U";
    u.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.coefficients = {{"I", 1.0}, {"U", 1.0}};
    t.noise_std = 1.0;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 2.0}, {"U", 1.0}};
    y.noise_std = 1.0;
    spec.equations = {{"I", i}, {"U", u}, {"T", t}, {"Y", y}};

    int ok = 0, ols_biased = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        spec.seed = seed;
        Dataset ds = sample(spec, 5000);
        EstimatorSpec est;
        est.kind = EstimatorKind::TwoSls;
        est.treatment = "T";
        est.outcome = "Y";
        est.instruments = {"I"};
        auto result = two_sls_point(ds, est);
        if (std::abs(result.point - 2.0) <= 0.2) ++ok;
        CHECK(*result.diagnostics.get("first_stage_f") > 10.0);
        // naive OLS slope of Y on T
        const auto& tv = ds.column("T").values;
        const auto& yv = ds.column("Y").values;
        const double mt = mean_of(tv), my = mean_of(yv);
        double sxy = 0, sxx = 0;
        for (size_t r = 0; r < tv.size(); ++r) {
            sxy += (tv[r] - mt) * (yv[r] - my);
            sxx += (tv[r] - mt) * (tv[r] - mt);
        }
        if (sxy / sxx - 2.0 > 0.3) ++ols_biased;
    }
    CHECK(ok >= 18);
    CHECK(ols_biased == 20);
}

TEST_CASE("irrelevant instruments trigger the weak-instrument warning") {
    ScmSpec spec;
    spec.graph = CausalGraph::build({{"I", VariableRole::Instrument},
                                     {"T", VariableRole::Treatment},
                                     {"Y", VariableRole::Outcome}},
                                    {{"T", "Y"}});
    StructuralEquation i;
    i.target = "I";
    i.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.noise_std = 1.0;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 1.0}};
    y.noise_std = 1.0;
    spec.equations = {{"I", i}, {"T", t}, {"Y", y}};
    spec.seed = 31337;
    Dataset ds = sample(spec, 2000);
    EstimatorSpec est;
    est.kind = EstimatorKind::TwoSls;
    est.treatment = "T";
    est.outcome = "Y";
    est.instruments = {"I"};
    auto result = two_sls_point(ds, est);
    CHECK(*result.diagnostics.get("first_stage_f") < 10.0);
    REQUIRE_FALSE(result.diagnostics.notes.empty());
    CHECK(result.diagnostics.notes[0].find("weak") != std::string::npos);
}

TEST_CASE("2SLS with binary I, binary T and no controls equals the Wald ratio") {
    Rng rng(606);
    std::vector<double> iv, tv, yv;
    for (int r = 0; r < 1000; ++r) {
        const double i = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const double t = rng.uniform() < (0.2 + 0.6 * i) ? 1.0 : 0.0;
        const double y = 1.7 * t + rng.normal();
        iv.push_back(i);
        tv.push_back(t);
        yv.push_back(y);
    }
    Dataset ds({Column{"I", ColumnKind::Binary, iv, {}},
                Column{"T", ColumnKind::Binary, tv, {}},
                Column{"Y", ColumnKind::Continuous, yv, {}}});
    EstimatorSpec est;
    est.kind = EstimatorKind::TwoSls;
    est.treatment = "T";
    est.outcome = "Y";
    est.instruments = {"I"};
    auto result = two_sls_point(ds, est);
    // Wald: cov(Y,I)/cov(T,I)
    const double mi = mean_of(iv), mt = mean_of(tv), my = mean_of(yv);
    double cyi = 0, cti = 0;
    for (size_t r = 0; r < iv.size(); ++r) {
        cyi += (yv[r] - my) * (iv[r] - mi);
        cti += (tv[r] - mt) * (iv[r] - mi);
    }
    CHECK_THAT(result.point, Catch::Matchers::WithinAbs(cyi / cti, 1e-9));
}

TEST_CASE("2SLS tolerates a rank-deficient design via the pseudo-inverse") {
    // duplicate the exogenous control column: the design is singular but the
    // treatment coefficient is still identified
    ScmSpec spec;
    spec.graph = CausalGraph::build({{"I", VariableRole::Other},
                                     {"W", VariableRole::Other},
                                     {"T", VariableRole::Other},
                                     {"Y", VariableRole::Other}},
                                    {{"I", "T"}, {"W", "T"}, {"W", "Y"}, {"T", "Y"}});
    StructuralEquation i;
    i.target = "I";
    i.noise_std = 1.0;
    StructuralEquation w;
    w.target = "W";
    w.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.coefficients = {{"I", 1.0}, {"W", 1.0}};
    t.noise_std = 1.0;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 2.0}, {"W", 1.0}};
    y.noise_std = 1.0;
    spec.equations = {{"I", i}, {"W", w}, {"T", t}, {"Y", y}};
    spec.seed = 77;
    Dataset ds = sample(spec, 4000);
    Column dup = ds.column("W");
    dup.name = "W2";
    Dataset collinear = ds.with_column(dup);
    EstimatorSpec est;
    est.kind = EstimatorKind::TwoSls;
    est.treatment = "T";
    est.outcome = "Y";
    est.instruments = {"I"};
    est.adjustment = {"W", "W2"};
    auto result = two_sls_point(collinear, est);
    CHECK_THAT(result.point, Catch::Matchers::WithinAbs(2.0, 0.2));
}

TEST_CASE("2SLS hard-errors only at zero first-stage variance") {
    Dataset ds({Column{"I", ColumnKind::Continuous, {1, 1, 1, 1, 1}, {}},
                Column{"T", ColumnKind::Continuous, {1, 2, 3, 4, 5}, {}},
                Column{"Y", ColumnKind::Continuous, {1, 2, 3, 4, 5}, {}}});
    EstimatorSpec est;
    est.kind = EstimatorKind::TwoSls;
    est.treatment = "T";
    est.outcome = "Y";
    est.instruments = {"I"};
    CHECK_THROWS_WITH(two_sls_point(ds, est),
                      Catch::Matchers::ContainsSubstring("first-stage"));
}

TEST_CASE("points are exactly invariant under row permutation (PSS/PSW/2SLS/PSM)") {
    Dataset ds = sample(confounded_triangle(2.0, 1.5, 2.0, 99), 800);
    Rng rng(424242);
    std::vector<size_t> order(ds.row_count());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    Dataset shuffled = ds.select_rows(order);

    for (EstimatorKind kind : {EstimatorKind::Pss, EstimatorKind::Psw, EstimatorKind::Psm}) {
        EstimatorSpec spec = backdoor_spec(kind);
        CHECK(point_estimate(ds, spec).point == point_estimate(shuffled, spec).point);
    }

    // 2SLS on an instrument fixture
    ScmSpec iv_spec;
    iv_spec.graph = CausalGraph::build({{"I", VariableRole::Other},
                                        {"T", VariableRole::Other},
                                        {"Y", VariableRole::Other}},
                                       {{"I", "T"}, {"T", "Y"}});
    StructuralEquation i;
    i.target = "I";
    i.noise_std = 1.0;
    StructuralEquation t;
    t.target = "T";
    t.coefficients = {{"I", 1.0}};
    t.noise_std = 1.0;
    StructuralEquation y;
    y.target = "Y";
    y.coefficients = {{"T", 2.0}};
    y.noise_std = 1.0;
    iv_spec.equations = {{"I", i}, {"T", t}, {"Y", y}};
    iv_spec.seed = 3;
    Dataset ivds = sample(iv_spec, 500);
    std::vector<size_t> order2(ivds.row_count());
    std::iota(order2.begin(), order2.end(), size_t{0});
    for (size_t i2 = order2.size(); i2 > 1; --i2)
        std::swap(order2[i2 - 1], order2[rng.below(i2)]);
    EstimatorSpec est;
    est.kind = EstimatorKind::TwoSls;
    est.treatment = "T";
    est.outcome = "Y";
    est.instruments = {"I"};
    CHECK(point_estimate(ivds, est).point == point_estimate(ivds.select_rows(order2), est).point);
}

TEST_CASE("estimators drop rows with missing analysis cells and count them") {
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 55), 400);
    std::vector<Column> cols;
    for (const Column& c : ds.columns()) {
        Column copy = c;
        if (copy.name == "Y") {
            copy.values[3] = missing_cell();
            copy.values[7] = missing_cell();
        }
        cols.push_back(copy);
    }
    Dataset holed(cols);
    auto result = psw_point(holed, backdoor_spec(EstimatorKind::Psw));
    CHECK(*result.diagnostics.get("dropped_missing") == 2.0);
}

TEST_CASE("bootstrap inference: degenerate and effectful cases") {
    Dataset ds = sample(confounded_triangle(2.0, 1.5, 2.0, 71), 2000);

    SECTION("constant estimator collapses") {
        auto constant = [](const Dataset&) { return 0.0; };
        auto result = bootstrap_inference(constant, ds, 0.0, 200, 1);
        CHECK(result.se_boot == 0.0);
        CHECK(result.p_value == 1.0);
        CHECK(result.ci95.low == 0.0);
        CHECK(result.ci95.high == 0.0);
    }

    SECTION("strong effect gives a tiny p-value") {
        Dataset big = sample(confounded_triangle(2.0, 1.5, 2.0, 72), 5000);
        EstimatorSpec spec = backdoor_spec(EstimatorKind::Psw);
        const double point = psw_point(big, spec).point;
        auto result = bootstrap_inference(
            [&spec](const Dataset& d) { return psw_point(d, spec).point; }, big, point, 200, 2);
        CHECK(result.p_value < 0.001);
        CHECK(result.ci95.low <= point);
        CHECK(result.ci95.high >= point);
    }

    SECTION("replicate count below 100 is rejected") {
        CHECK_THROWS_AS(bootstrap_inference([](const Dataset&) { return 0.0; }, ds, 0.0, 50, 1),
                        Error);
    }

    SECTION("estimators that always fail surface an error") {
        auto broken = [](const Dataset&) -> double { throw Error("nope"); };
        CHECK_THROWS_WITH(bootstrap_inference(broken, ds, 0.0, 100, 1),
                          Catch::Matchers::ContainsSubstring("failed"));
    }

    SECTION("occasional replicate failures are skipped and counted") {
        // indexed column: fails whenever row 0 of the resample lands in the
        // lowest 2% of the original rows
        std::vector<double> idx(1000);
        std::iota(idx.begin(), idx.end(), 0.0);
        Dataset indexed({Column{"i", ColumnKind::Continuous, idx, {}}});
        auto flaky = [](const Dataset& d) -> double {
            if (d.column("i").values[0] < 20.0) throw Error("unlucky resample");
            return 1.0;
        };
        auto result = bootstrap_inference(flaky, indexed, 1.0, 300, 99);
        CHECK(result.skipped > 0);
        CHECK(result.skipped * 20 <= 300);
        // a ~20% failure rate breaches the 5% budget
        auto flakier = [](const Dataset& d) -> double {
            if (d.column("i").values[0] < 200.0) throw Error("unlucky resample");
            return 1.0;
        };
        CHECK_THROWS_WITH(bootstrap_inference(flakier, indexed, 1.0, 300, 99),
                          Catch::Matchers::ContainsSubstring("more than 5%"));
    }
}

TEST_CASE("estimate_effect wires the bootstrap into the estimate") {
    Dataset ds = sample(confounded_triangle(2.0, 1.0, 1.0, 88), 2000);
    InferenceOptions inference;
    inference.bootstrap_replicates = 200;
    inference.seed = 5;
    auto estimate = estimate_effect(ds, backdoor_spec(EstimatorKind::Psw), inference);
    CHECK(estimate.estimator == EstimatorKind::Psw);
    CHECK(estimate.effect_kind == EffectKind::Ate);
    CHECK_THAT(estimate.point, Catch::Matchers::WithinAbs(2.0, 0.25));
    CHECK(estimate.p_value < 0.01);
    CHECK(estimate.ci95.low <= estimate.point);
    CHECK(estimate.point <= estimate.ci95.high);
    CHECK(estimate.n_treated + estimate.n_control == 2000);
    CHECK(estimate.p_value >= 0.0);
    CHECK(estimate.p_value <= 1.0);
}

TEST_CASE("CATE splits a binary modifier and recovers per-level effects") {
    // Y = (1 + e) T + Z + noise with e in {0,1}: effects 1 and 2 by level
    Rng rng(2465);
    std::vector<double> e, z, t, y;
    for (int r = 0; r < 6000; ++r) {
        const double ev = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const double zv = rng.normal();
        const double tv = rng.uniform() < 1.0 / (1.0 + std::exp(-zv)) ? 1.0 : 0.0;
        e.push_back(ev);
        z.push_back(zv);
        t.push_back(tv);
        y.push_back((1.0 + ev) * tv + zv + rng.normal());
    }
    Dataset ds({Column{"e", ColumnKind::Binary, e, {}}, Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}}, Column{"Y", ColumnKind::Continuous, y, {}}});
    InferenceOptions inference;
    inference.bootstrap_replicates = 150;
    inference.seed = 6;
    auto table = estimate_cate(ds, backdoor_spec(EstimatorKind::Psw), "e", inference);
    REQUIRE(table.bins.size() == 2);
    CHECK_THAT(table.bins[0].estimate.point, Catch::Matchers::WithinAbs(1.0, 0.2));
    CHECK_THAT(table.bins[1].estimate.point, Catch::Matchers::WithinAbs(2.0, 0.2));
    CHECK(table.bins[0].n + table.bins[1].n == 6000);
    CHECK_FALSE(table.bins[0].low_power);
}

TEST_CASE("CATE on a homogeneous effect gives overlapping intervals across quartiles") {
    Rng rng(777);
    std::vector<double> m, z, t, y;
    for (int r = 0; r < 4000; ++r) {
        const double mv = rng.normal() * 3.0;
        const double zv = rng.normal();
        const double tv = rng.uniform() < 1.0 / (1.0 + std::exp(-zv)) ? 1.0 : 0.0;
        m.push_back(mv);
        z.push_back(zv);
        t.push_back(tv);
        y.push_back(1.0 * tv + zv + rng.normal());
    }
    Dataset ds({Column{"m", ColumnKind::Continuous, m, {}},
                Column{"Z", ColumnKind::Continuous, z, {}},
                Column{"T", ColumnKind::Binary, t, {}},
                Column{"Y", ColumnKind::Continuous, y, {}}});
    InferenceOptions inference;
    inference.bootstrap_replicates = 150;
    inference.seed = 8;
    auto table = estimate_cate(ds, backdoor_spec(EstimatorKind::Psw), "m", inference);
    REQUIRE(table.bins.size() == 4);
    for (const auto& a : table.bins)
        for (const auto& b : table.bins) {
            // every pair of intervals overlaps
            CHECK(a.estimate.ci95.low <= b.estimate.ci95.high);
        }
}

TEST_CASE("CATE rejects a constant modifier") {
    Dataset ds({Column{"m", ColumnKind::Continuous, {1, 1, 1, 1}, {}},
                Column{"T", ColumnKind::Binary, {0, 1, 0, 1}, {}},
                Column{"Y", ColumnKind::Continuous, {0, 1, 0, 1}, {}}});
    InferenceOptions inference;
    inference.seed = 9;
    CHECK_THROWS_WITH(estimate_cate(ds, backdoor_spec(EstimatorKind::Psw), "m", inference),
                      Catch::Matchers::ContainsSubstring("constant"));
}
