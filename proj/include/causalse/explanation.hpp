#pragma once

// Associational analysis (bootstrapped arm means, rank correlation across
// aligned units, Jensen-Shannon divergence between arm distributions) and the
// comparative verdict that contrasts associational with interventional
// conclusions.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/estimation.hpp"
#include "causalse/random.hpp"
#include "causalse/refutation.hpp"
#include "causalse/stats.hpp"

namespace causalse {

/// Jensen-Shannon divergence between two samples: 30 equal-width bins over
/// the pooled range, 1e-10 additive smoothing, log base 2 (so the value lies
/// in [0, 1]). Zero exactly when the histograms coincide.
inline double jensen_shannon_divergence(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw Error("jsd: empty sample");
    constexpr size_t kBins = 30;
    constexpr double kSmoothing = 1e-10;
    double lo = std::min(*std::min_element(a.begin(), a.end()),
                         *std::min_element(b.begin(), b.end()));
    double hi = std::max(*std::max_element(a.begin(), a.end()),
                         *std::max_element(b.begin(), b.end()));
    const double width = hi - lo;
    auto histogram = [&](const std::vector<double>& sample) {
        std::vector<double> h(kBins, 0.0);
        for (double v : sample) {
            size_t bin = 0;
            if (width > 0.0)
                bin = std::min(kBins - 1,
                               static_cast<size_t>(std::floor((v - lo) / width * kBins)));
            h[bin] += 1.0;
        }
        double total = 0.0;
        for (double& x : h) {
            x = x / static_cast<double>(sample.size()) + kSmoothing;
            total += x;
        }
        for (double& x : h) x /= total;
        return h;
    };
    const auto p = histogram(a);
    const auto q = histogram(b);
    // two separate accumulators keep the value bit-symmetric in (a, b)
    double kl_p = 0.0, kl_q = 0.0;
    for (size_t i = 0; i < kBins; ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_p += p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log2(q[i] / m);
    }
    return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

struct ArmSummary {
    std::string arm; // level label
    size_t n = 0;
    double mean = 0.0;
    ConfidenceInterval ci95; // bootstrapped mean
};

struct ArmPairStats {
    std::string arm_a;
    std::string arm_b;
    double jsd = 0.0;
    std::optional<double> spearman_rho; // only when a unit id aligns arms
    std::string note;
};

struct AssociationalSummary {
    std::string outcome;
    std::vector<ArmSummary> arms;   // in level order; first arm is the reference
    std::vector<ArmPairStats> pairs;
    size_t bootstrap_replicates = 0;
};

/// Per-arm bootstrapped outcome means plus pairwise JSD; Spearman across arms
/// is computed only when `unit_id` pairs the same units across arms, and is
/// otherwise omitted with a note.
inline AssociationalSummary associational_summary(const Dataset& ds, const std::string& arm_column,
                                                  const std::string& outcome, size_t replicates,
                                                  uint64_t seed,
                                                  const std::optional<std::string>& unit_id = {},
                                                  const std::vector<std::string>& arm_labels = {}) {
    const Column& arms = ds.column(arm_column);
    const Column& y = ds.column(outcome);
    if (arms.kind == ColumnKind::Continuous)
        throw Error("associational_summary: arm column '" + arm_column +
                    "' must be binary or categorical");
    if (replicates < 100) throw Error("associational_summary: need at least 100 replicates");

    std::map<double, std::vector<size_t>> by_level;
    for (size_t r = 0; r < ds.row_count(); ++r) {
        if (is_missing(arms.values[r]) || is_missing(y.values[r])) continue;
        by_level[arms.values[r]].push_back(r);
    }
    if (by_level.empty()) throw Error("associational_summary: no complete rows");
    for (const auto& [code, rows] : by_level)
        if (rows.empty()) throw Error("associational_summary: empty arm");

    auto label_of = [&](double code, size_t position) -> std::string {
        if (position < arm_labels.size()) return arm_labels[position];
        if (arms.kind == ColumnKind::Categorical) return arms.label_for_code(static_cast<size_t>(code));
        return detail::format_double(code);
    };

    AssociationalSummary summary;
    summary.outcome = outcome;
    summary.bootstrap_replicates = replicates;

    size_t position = 0;
    std::vector<std::pair<std::string, std::vector<double>>> samples;
    for (const auto& [code, rows] : by_level) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (size_t r : rows) values.push_back(y.values[r]);
        ArmSummary arm;
        arm.arm = label_of(code, position);
        arm.n = values.size();
        arm.mean = mean_of(values);
        Rng rng(derive_seed(derive_seed(seed, "arm_mean"), position));
        std::vector<double> means;
        means.reserve(replicates);
        for (size_t b = 0; b < replicates; ++b) {
            double sum = 0.0;
            for (size_t i = 0; i < values.size(); ++i) sum += values[rng.below(values.size())];
            means.push_back(sum / static_cast<double>(values.size()));
        }
        std::sort(means.begin(), means.end());
        arm.ci95.low = quantile_sorted(means, 0.025);
        arm.ci95.high = quantile_sorted(means, 0.975);
        summary.arms.push_back(std::move(arm));
        samples.emplace_back(summary.arms.back().arm, std::move(values));
        ++position;
    }

    // unit-id alignment for the rank correlation
    std::map<double, std::map<double, double>> outcome_by_unit; // level -> unit -> outcome
    bool units_usable = false;
    if (unit_id && ds.has_column(*unit_id)) {
        const Column& units = ds.column(*unit_id);
        units_usable = true;
        for (size_t r = 0; r < ds.row_count(); ++r) {
            if (is_missing(arms.values[r]) || is_missing(y.values[r]) ||
                is_missing(units.values[r]))
                continue;
            outcome_by_unit[arms.values[r]].emplace(units.values[r], y.values[r]);
        }
    }

    size_t ai = 0;
    for (auto ita = by_level.begin(); ita != by_level.end(); ++ita, ++ai) {
        size_t bi = ai + 1;
        for (auto itb = std::next(ita); itb != by_level.end(); ++itb, ++bi) {
            ArmPairStats pair;
            pair.arm_a = summary.arms[ai].arm;
            pair.arm_b = summary.arms[bi].arm;
            pair.jsd = jensen_shannon_divergence(samples[ai].second, samples[bi].second);
            if (units_usable) {
                std::vector<double> xa, xb;
                const auto& ua = outcome_by_unit[ita->first];
                const auto& ub = outcome_by_unit[itb->first];
                for (const auto& [unit, value] : ua) {
                    auto match = ub.find(unit);
                    if (match != ub.end()) {
                        xa.push_back(value);
                        xb.push_back(match->second);
                    }
                }
                if (xa.size() >= 3) {
                    pair.spearman_rho = spearman(xa, xb).value;
                } else {
                    pair.note = "fewer than 3 units shared between arms; rank correlation omitted";
                }
            } else {
                pair.note = "no unit id aligns arms pairwise; rank correlation omitted";
            }
            summary.pairs.push_back(std::move(pair));
        }
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Effect classification and the comparative verdict
// ---------------------------------------------------------------------------

enum class EffectClass { Null, Positive, Negative };

inline const char* to_string(EffectClass c) {
    switch (c) {
        case EffectClass::Null: return "null";
        case EffectClass::Positive: return "positive";
        case EffectClass::Negative: return "negative";
    }
    return "?";
}

/// Null iff p >= alpha, otherwise the sign of the point estimate.
inline EffectClass classify_effect(const EffectEstimate& estimate, double alpha = 0.05) {
    if (alpha <= 0.0 || alpha >= 1.0) throw Error("classify_effect: alpha must lie in (0,1)");
    if (estimate.p_value >= alpha || estimate.point == 0.0) return EffectClass::Null;
    return estimate.point > 0.0 ? EffectClass::Positive : EffectClass::Negative;
}

enum class AssociationSignal { None, Positive, Negative };

inline const char* to_string(AssociationSignal s) {
    switch (s) {
        case AssociationSignal::None: return "none";
        case AssociationSignal::Positive: return "positive";
        case AssociationSignal::Negative: return "negative";
    }
    return "?";
}

enum class Verdict { GenuineEffect, ConfoundingDrivenAssociation, NullEffect, UnstableEstimate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::GenuineEffect: return "GenuineEffect";
        case Verdict::ConfoundingDrivenAssociation: return "ConfoundingDrivenAssociation";
        case Verdict::NullEffect: return "NullEffect";
        case Verdict::UnstableEstimate: return "UnstableEstimate";
    }
    return "?";
}

struct ComparativeVerdict {
    AssociationSignal association_signal = AssociationSignal::None;
    EffectClass causal_signal = EffectClass::Null;
    bool refuters_passed = true;
    Verdict verdict = Verdict::NullEffect;
    std::string recommendation;
};

struct CausalFinding {
    EffectEstimate estimate;
    std::vector<RefutationResult> refutations;
    double weight = 1.0; // estimator weight in the majority vote
};

/// Association signal from the CI separation of the first two arm means:
/// positive iff the second arm's interval sits entirely above the first's.
inline AssociationSignal association_signal_of(const AssociationalSummary& summary) {
    if (summary.arms.size() < 2) return AssociationSignal::None;
    const ArmSummary& reference = summary.arms.front();
    const ArmSummary& comparison = summary.arms[1];
    if (comparison.ci95.low > reference.ci95.high) return AssociationSignal::Positive;
    if (comparison.ci95.high < reference.ci95.low) return AssociationSignal::Negative;
    return AssociationSignal::None;
}

/// Decision table: refuter failure forces UnstableEstimate; otherwise a
/// non-null causal majority is a GenuineEffect; a null causal majority is
/// ConfoundingDrivenAssociation when association is present and NullEffect
/// when it is not. The causal signal is a weighted majority across
/// estimators; ties resolve to null.
inline ComparativeVerdict compare(const AssociationalSummary& association,
                                  const std::vector<CausalFinding>& findings,
                                  double alpha = 0.05) {
    if (findings.empty()) throw Error("compare: need at least one causal estimate");

    ComparativeVerdict verdict;
    verdict.association_signal = association_signal_of(association);

    double weight_null = 0.0, weight_positive = 0.0, weight_negative = 0.0;
    verdict.refuters_passed = true;
    for (const CausalFinding& finding : findings) {
        switch (classify_effect(finding.estimate, alpha)) {
            case EffectClass::Null: weight_null += finding.weight; break;
            case EffectClass::Positive: weight_positive += finding.weight; break;
            case EffectClass::Negative: weight_negative += finding.weight; break;
        }
        for (const RefutationResult& r : finding.refutations)
            verdict.refuters_passed = verdict.refuters_passed && r.passed;
    }
    if (weight_positive > weight_null && weight_positive > weight_negative)
        verdict.causal_signal = EffectClass::Positive;
    else if (weight_negative > weight_null && weight_negative > weight_positive)
        verdict.causal_signal = EffectClass::Negative;
    else
        verdict.causal_signal = EffectClass::Null;

    if (!verdict.refuters_passed) {
        verdict.verdict = Verdict::UnstableEstimate;
        verdict.recommendation =
            "Refutation tests failed; the estimates are unstable. Revisit the model "
            "specification and data before drawing conclusions.";
    } else if (verdict.causal_signal != EffectClass::Null) {
        verdict.verdict = Verdict::GenuineEffect;
        verdict.recommendation =
            "Causal estimates are significant and stable under refutation; treat the "
            "effect as genuine.";
    } else if (verdict.association_signal != AssociationSignal::None) {
        verdict.verdict = Verdict::ConfoundingDrivenAssociation;
        verdict.recommendation =
            "Association is present but the causal estimates are null: the observed "
            "association is likely driven by confounders. Revisit stage 0 to revise the "
            "causal model or collect additional covariates.";
    } else {
        verdict.verdict = Verdict::NullEffect;
        verdict.recommendation = "No associational or causal signal; conclude a null effect.";
    }
    return verdict;
}

} // namespace causalse
