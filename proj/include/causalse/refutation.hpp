#pragma once

// Refuters: stress tests that re-run an estimator after a perturbation that
// should not carry a causal signal. Placebo treatment permutes the treatment
// column; the random-common-cause refuter adds an independent standard-normal
// covariate to the adjustment set. Pass rules are explicit stand-ins for the
// qualitative "almost zero" judgement and can be overridden per run.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/estimation.hpp"
#include "causalse/random.hpp"
#include "causalse/stats.hpp"

namespace causalse {

enum class RefuterKind { PlaceboTreatment, RandomCommonCause };

inline const char* to_string(RefuterKind k) {
    return k == RefuterKind::PlaceboTreatment ? "placebo_treatment" : "random_common_cause";
}

struct RefutationResult {
    RefuterKind refuter = RefuterKind::PlaceboTreatment;
    EstimatorKind estimator = EstimatorKind::Psw;
    double original_point = 0.0;
    double refuted_point = 0.0; // mean over repetitions
    double spread = 0.0;        // population std over repetitions
    size_t repetitions = 0;
    double threshold = 0.0;     // the bound the verdict was checked against
    bool passed = false;
};

struct RefuterOptions {
    size_t repetitions = 20;
    uint64_t seed = 0;
    // Absolute overrides for the pass thresholds; when unset the defaults in
    // the refuter post-conditions apply.
    std::optional<double> placebo_max_abs;
    std::optional<double> rcc_max_drift;
};

namespace detail {

inline double outcome_std(const Dataset& ds, const EstimatorSpec& spec) {
    const auto& y = ds.column(spec.outcome).values;
    const auto& t = ds.column(spec.treatment).values;
    std::vector<double> present;
    for (size_t i = 0; i < y.size(); ++i)
        if (!is_missing(y[i]) && !is_missing(t[i])) present.push_back(y[i]);
    return present.empty() ? 0.0 : population_std(present);
}

inline std::vector<double> permuted(const std::vector<double>& values, Rng& rng) {
    std::vector<double> out = values;
    for (size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
    return out;
}

} // namespace detail

/// Placebo-treatment refuter: permute the treatment column uniformly and
/// re-run the identical estimator. Pass iff the mean refuted point is within
/// max(0.02 * outcome std, |original|/10) of zero.
inline RefutationResult refute_placebo(const Dataset& ds, const EstimatorSpec& spec,
                                       double original_point, const RefuterOptions& options) {
    if (options.repetitions < 1) throw Error("refute_placebo: repetitions must be >= 1");
    std::vector<double> points;
    points.reserve(options.repetitions);
    const auto& treatment_values = ds.column(spec.treatment).values;
    for (size_t rep = 0; rep < options.repetitions; ++rep) {
        Rng rng(derive_seed(derive_seed(options.seed, "placebo"), rep));
        Column placebo;
        placebo.name = spec.treatment;
        placebo.kind = ds.column(spec.treatment).kind;
        placebo.values = detail::permuted(treatment_values, rng);
        std::vector<Column> cols;
        for (const Column& c : ds.columns()) cols.push_back(c.name == spec.treatment ? placebo : c);
        try {
            points.push_back(point_estimate(Dataset(std::move(cols)), spec).point);
        } catch (const Error& e) {
            throw Error("refute_placebo: repetition " + std::to_string(rep) +
                        " failed: " + e.what());
        }
    }

    RefutationResult result;
    result.refuter = RefuterKind::PlaceboTreatment;
    result.estimator = spec.kind;
    result.original_point = original_point;
    result.refuted_point = mean_of(points);
    result.spread = population_std(points);
    result.repetitions = options.repetitions;
    result.threshold = options.placebo_max_abs
                           ? *options.placebo_max_abs
                           : std::max(0.02 * detail::outcome_std(ds, spec),
                                      std::abs(original_point) / 10.0);
    result.passed = std::abs(result.refuted_point) <= result.threshold;
    return result;
}

/// Random-common-cause refuter: append an independent standard-normal column
/// to the adjustment set and re-run. Pass iff the mean refuted point drifts
/// from the original by at most max(0.1 * |original|, 0.02 * outcome std).
inline RefutationResult refute_random_common_cause(const Dataset& ds, const EstimatorSpec& spec,
                                                   double original_point,
                                                   const RefuterOptions& options) {
    if (options.repetitions < 1)
        throw Error("refute_random_common_cause: repetitions must be >= 1");
    std::string synthetic_name = "rcc_synthetic";
    while (ds.has_column(synthetic_name)) synthetic_name += "_";

    EstimatorSpec augmented = spec;
    augmented.adjustment.push_back(synthetic_name);

    std::vector<double> points;
    points.reserve(options.repetitions);
    for (size_t rep = 0; rep < options.repetitions; ++rep) {
        Rng rng(derive_seed(derive_seed(options.seed, "random_common_cause"), rep));
        Column synthetic;
        synthetic.name = synthetic_name;
        synthetic.kind = ColumnKind::Continuous;
        synthetic.values.resize(ds.row_count());
        for (double& v : synthetic.values) v = rng.normal();
        try {
            points.push_back(point_estimate(ds.with_column(std::move(synthetic)), augmented).point);
        } catch (const Error& e) {
            throw Error("refute_random_common_cause: repetition " + std::to_string(rep) +
                        " failed: " + e.what());
        }
    }

    RefutationResult result;
    result.refuter = RefuterKind::RandomCommonCause;
    result.estimator = spec.kind;
    result.original_point = original_point;
    result.refuted_point = mean_of(points);
    result.spread = population_std(points);
    result.repetitions = options.repetitions;
    result.threshold = options.rcc_max_drift
                           ? *options.rcc_max_drift
                           : std::max(0.1 * std::abs(original_point),
                                      0.02 * detail::outcome_std(ds, spec));
    result.passed = std::abs(result.refuted_point - original_point) <= result.threshold;
    return result;
}

} // namespace causalse
