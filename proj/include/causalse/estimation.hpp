#pragma once

// Treatment-effect estimators: logistic propensity model (Newton-Raphson with
// a small ridge), propensity-score matching / stratification / weighting for
// backdoor estimands, two-stage least squares for instrumental estimands,
// subgroup (CATE) tables, and seeded bootstrap inference.
//
// Estimators operate on the complete-case analysis rows re-ordered into a
// canonical value order, so every point estimate is exactly invariant under
// permutations of the input rows.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/dataset.hpp"
#include "causalse/random.hpp"
#include "causalse/stats.hpp"

namespace causalse {

inline constexpr double kPropensityClip = 1e-6;

enum class EstimatorKind { Psm, Pss, Psw, TwoSls };

inline const char* to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Psm: return "PSM";
        case EstimatorKind::Pss: return "PSS";
        case EstimatorKind::Psw: return "PSW";
        case EstimatorKind::TwoSls: return "2SLS";
    }
    return "?";
}

inline std::optional<EstimatorKind> parse_estimator_kind(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "psm") return EstimatorKind::Psm;
    if (s == "pss") return EstimatorKind::Pss;
    if (s == "psw") return EstimatorKind::Psw;
    if (s == "2sls" || s == "twosls" || s == "tsls") return EstimatorKind::TwoSls;
    return std::nullopt;
}

enum class EffectKind { Ate, Att, Atc };

inline const char* to_string(EffectKind k) {
    switch (k) {
        case EffectKind::Ate: return "ATE";
        case EffectKind::Att: return "ATT";
        case EffectKind::Atc: return "ATC";
    }
    return "?";
}

struct Diagnostics {
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> notes;

    void add(std::string name, double value) { metrics.emplace_back(std::move(name), value); }
    std::optional<double> get(const std::string& name) const {
        for (const auto& [k, v] : metrics)
            if (k == name) return v;
        return std::nullopt;
    }
};

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
};

struct EffectEstimate {
    EstimatorKind estimator = EstimatorKind::Psw;
    EffectKind effect_kind = EffectKind::Ate;
    double point = 0.0;
    double se_boot = 0.0;
    double p_value = 1.0;
    ConfidenceInterval ci95;
    size_t n_treated = 0;
    size_t n_control = 0;
    Diagnostics diagnostics;
};

struct PropensityOptions {
    double ridge = 1e-6;         // on non-intercept coefficients, standardized scale
    double tolerance = 1e-8;     // gradient max-norm
    size_t max_iterations = 100;
};

struct PropensityModel {
    std::vector<double> coefficients; // intercept first, then one per covariate (original scale)
    bool converged = false;
    size_t iterations = 0;
    std::vector<double> scores; // clipped to [kPropensityClip, 1 - kPropensityClip]
};

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::Psw;
    std::string treatment;
    std::string outcome;
    std::vector<std::string> adjustment;  // propensity covariates / exogenous controls
    std::vector<std::string> instruments; // 2SLS only
    EffectKind effect_kind = EffectKind::Ate;
    size_t strata = 5; // PSS
    PropensityOptions propensity;
};

namespace detail {

inline double clip_score(double p) {
    return std::clamp(p, kPropensityClip, 1.0 - kPropensityClip);
}

/// Newton-Raphson logistic fit on an already-assembled design (first column
/// must be the intercept). Ridge applies to every non-intercept coefficient.
/// Step halving keeps the penalized log-likelihood non-decreasing.
inline PropensityModel fit_logistic_design(const Eigen::MatrixXd& design,
                                           const Eigen::VectorXd& target,
                                           const PropensityOptions& options) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    Eigen::VectorXd ridge_mask = Eigen::VectorXd::Ones(p);
    ridge_mask(0) = 0.0;

    auto penalized_ll = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd eta = design * beta;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = clip_score(1.0 / (1.0 + std::exp(-eta(i))));
            ll += target(i) * std::log(pi) + (1.0 - target(i)) * std::log(1.0 - pi);
        }
        return ll - 0.5 * options.ridge * (ridge_mask.array() * beta.array().square()).sum();
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = penalized_ll(beta);
    PropensityModel model;
    bool reached_tolerance = false;
    size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd pi(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            pi(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            w(i) = pi(i) * (1.0 - pi(i));
        }
        Eigen::VectorXd gradient = design.transpose() * (target - pi) -
                                   options.ridge * (ridge_mask.array() * beta.array()).matrix();
        if (gradient.lpNorm<Eigen::Infinity>() < options.tolerance) {
            reached_tolerance = true;
            break;
        }
        Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
        hessian += options.ridge * ridge_mask.asDiagonal();
        hessian.diagonal().array() += 1e-12; // keep the solve well posed when w collapses
        const Eigen::VectorXd step = hessian.ldlt().solve(gradient);
        // Step halving guards against divergence. The acceptance allowance
        // must scale with |ll|: near the optimum a productive Newton step
        // moves the objective by less than its floating-point resolution.
        const double allowance = 1e-10 * (1.0 + std::abs(ll));
        double scale = 1.0;
        for (int halving = 0; halving < 40; ++halving) {
            const Eigen::VectorXd candidate = beta + scale * step;
            const double candidate_ll = penalized_ll(candidate);
            if (candidate_ll >= ll - allowance) {
                beta = candidate;
                ll = candidate_ll;
                break;
            }
            scale *= 0.5;
        }
    }
    model.iterations = iter;

    // Quasi-separation heuristic: a slope above 10 per standard deviation
    // means the fitted scores saturate; report non-convergence but keep the
    // (clipped) scores usable.
    double max_slope = 0.0;
    for (Eigen::Index j = 1; j < p; ++j) max_slope = std::max(max_slope, std::abs(beta(j)));
    model.converged = reached_tolerance && max_slope <= 10.0;

    model.coefficients.assign(beta.data(), beta.data() + p);
    const Eigen::VectorXd eta = design * beta;
    model.scores.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        model.scores[static_cast<size_t>(i)] = clip_score(1.0 / (1.0 + std::exp(-eta(i))));
    return model;
}

/// Standardize covariates, fit, and map coefficients back to original scale.
inline PropensityModel fit_logistic(const Eigen::MatrixXd& covariates,
                                    const Eigen::VectorXd& target,
                                    const PropensityOptions& options) {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index k = covariates.cols();
    Eigen::VectorXd mean = k > 0 ? covariates.colwise().mean() : Eigen::VectorXd(0);
    Eigen::VectorXd scale(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double var =
            (covariates.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);
        scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    Eigen::MatrixXd design(n, k + 1);
    design.col(0).setOnes();
    for (Eigen::Index j = 0; j < k; ++j)
        design.col(j + 1) = (covariates.col(j).array() - mean(j)) / scale(j);

    PropensityModel model = fit_logistic_design(design, target, options);
    // beta_std -> original scale
    std::vector<double> original(static_cast<size_t>(k) + 1);
    original[0] = model.coefficients[0];
    for (Eigen::Index j = 0; j < k; ++j) {
        const double b = model.coefficients[static_cast<size_t>(j) + 1] / scale(j);
        original[static_cast<size_t>(j) + 1] = b;
        original[0] -= b * mean(j);
    }
    model.coefficients = std::move(original);
    return model;
}

/// Complete-case analysis rows in canonical (value-sorted) order.
struct AnalysisFrame {
    size_t n = 0;
    std::vector<double> treatment;
    std::vector<double> outcome;
    Eigen::MatrixXd adjustment;  // n x |Z|
    Eigen::MatrixXd instruments; // n x |I|
    size_t dropped_missing = 0;
};

inline AnalysisFrame build_frame(const Dataset& ds, const EstimatorSpec& spec,
                                 bool need_outcome = true) {
    std::vector<const Column*> cols;
    cols.push_back(&ds.column(spec.treatment));
    if (need_outcome) cols.push_back(&ds.column(spec.outcome));
    for (const auto& z : spec.adjustment) cols.push_back(&ds.column(z));
    for (const auto& i : spec.instruments) cols.push_back(&ds.column(i));
    for (const Column* c : cols)
        if (c->kind == ColumnKind::Categorical)
            throw Error("estimation: column '" + c->name +
                        "' is categorical; encode it as binary or continuous first");

    std::vector<size_t> rows;
    for (size_t r = 0; r < ds.row_count(); ++r) {
        bool complete = true;
        for (const Column* c : cols)
            if (is_missing(c->values[r])) {
                complete = false;
                break;
            }
        if (complete) rows.push_back(r);
    }

    // Canonical order: lexicographic over the analysis tuple. Equal tuples are
    // interchangeable, so the point estimates cannot depend on input row order.
    std::stable_sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
        for (const Column* c : cols) {
            if (c->values[a] < c->values[b]) return true;
            if (c->values[a] > c->values[b]) return false;
        }
        return false;
    });

    AnalysisFrame frame;
    frame.n = rows.size();
    frame.dropped_missing = ds.row_count() - rows.size();
    frame.treatment.reserve(frame.n);
    for (size_t r : rows) frame.treatment.push_back(ds.column(spec.treatment).values[r]);
    if (need_outcome) {
        frame.outcome.reserve(frame.n);
        for (size_t r : rows) frame.outcome.push_back(ds.column(spec.outcome).values[r]);
    }
    frame.adjustment.resize(static_cast<Eigen::Index>(frame.n),
                            static_cast<Eigen::Index>(spec.adjustment.size()));
    for (size_t j = 0; j < spec.adjustment.size(); ++j) {
        const auto& values = ds.column(spec.adjustment[j]).values;
        for (size_t i = 0; i < frame.n; ++i)
            frame.adjustment(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                values[rows[i]];
    }
    frame.instruments.resize(static_cast<Eigen::Index>(frame.n),
                             static_cast<Eigen::Index>(spec.instruments.size()));
    for (size_t j = 0; j < spec.instruments.size(); ++j) {
        const auto& values = ds.column(spec.instruments[j]).values;
        for (size_t i = 0; i < frame.n; ++i)
            frame.instruments(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                values[rows[i]];
    }
    return frame;
}

inline void require_binary_arms(const AnalysisFrame& frame, const std::string& name) {
    size_t treated = 0, control = 0;
    for (double t : frame.treatment) {
        if (t == 1.0)
            ++treated;
        else if (t == 0.0)
            ++control;
        else
            throw Error("estimation: treatment '" + name + "' must be 0/1");
    }
    if (treated == 0 || control == 0)
        throw Error("estimation: treatment '" + name + "' has an empty arm (" +
                    std::to_string(treated) + " treated, " + std::to_string(control) + " control)");
}

inline PropensityModel frame_propensity(const AnalysisFrame& frame,
                                        const PropensityOptions& options) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(frame.n));
    for (size_t i = 0; i < frame.n; ++i) t(static_cast<Eigen::Index>(i)) = frame.treatment[i];
    return fit_logistic(frame.adjustment, t, options);
}

} // namespace detail

/// Logistic propensity model for P(T=1 | Z). Scores align with the
/// complete-case rows of `ds` in their original order.
inline PropensityModel fit_propensity(const Dataset& ds, const std::string& treatment,
                                      const std::vector<std::string>& covariates,
                                      const PropensityOptions& options = {}) {
    EstimatorSpec spec;
    spec.treatment = treatment;
    spec.adjustment = covariates;
    // original order: complete cases without the canonical re-sort
    std::vector<const Column*> cols{&ds.column(treatment)};
    for (const auto& z : covariates) cols.push_back(&ds.column(z));
    for (const Column* c : cols)
        if (c->kind == ColumnKind::Categorical)
            throw Error("fit_propensity: column '" + c->name + "' is categorical");
    std::vector<size_t> rows;
    for (size_t r = 0; r < ds.row_count(); ++r) {
        bool complete = true;
        for (const Column* c : cols)
            if (is_missing(c->values[r])) {
                complete = false;
                break;
            }
        if (complete) rows.push_back(r);
    }
    Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size()));
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(covariates.size()));
    size_t treated = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const double ti = ds.column(treatment).values[rows[i]];
        if (ti != 0.0 && ti != 1.0) throw Error("fit_propensity: treatment must be 0/1");
        treated += ti == 1.0;
        t(static_cast<Eigen::Index>(i)) = ti;
        for (size_t j = 0; j < covariates.size(); ++j)
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                ds.column(covariates[j]).values[rows[i]];
    }
    if (treated == 0 || treated == rows.size())
        throw Error("fit_propensity: treatment has an empty arm");
    return detail::fit_logistic(z, t, options);
}

struct PointResult {
    double point = 0.0;
    size_t n_treated = 0;
    size_t n_control = 0;
    Diagnostics diagnostics;
};

namespace detail {

inline std::vector<double> logit_scores(const PropensityModel& model) {
    std::vector<double> out(model.scores.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(model.scores[i] / (1.0 - model.scores[i]));
    return out;
}

/// 1-nearest-neighbour matching with replacement on the logit score.
/// `targets` are matched against `pool`; ties go to the lowest index.
struct MatchOutcome {
    double mean_diff = 0.0; // mean over matched targets of sign * (Y_target - Y_match)
    size_t matched = 0;
    size_t unmatched = 0;
};

inline MatchOutcome match_side(const std::vector<size_t>& targets, const std::vector<size_t>& pool,
                               const std::vector<double>& logits, const std::vector<double>& outcome,
                               double caliper, double sign) {
    std::vector<size_t> sorted_pool = pool;
    std::sort(sorted_pool.begin(), sorted_pool.end(), [&](size_t a, size_t b) {
        if (logits[a] != logits[b]) return logits[a] < logits[b];
        return a < b;
    });
    std::vector<double> pool_logits(sorted_pool.size());
    for (size_t i = 0; i < sorted_pool.size(); ++i) pool_logits[i] = logits[sorted_pool[i]];
    // start position of each equal-value run (the run head holds the lowest index)
    std::vector<size_t> run_start(sorted_pool.size());
    for (size_t i = 0; i < sorted_pool.size(); ++i)
        run_start[i] = (i > 0 && pool_logits[i] == pool_logits[i - 1]) ? run_start[i - 1] : i;

    MatchOutcome out;
    double sum = 0.0;
    for (size_t t : targets) {
        const double target_logit = logits[t];
        const auto lb = std::lower_bound(pool_logits.begin(), pool_logits.end(), target_logit);
        const size_t hi = static_cast<size_t>(lb - pool_logits.begin());
        std::optional<size_t> best;
        double best_distance = 0.0;
        if (hi < pool_logits.size()) {
            best = sorted_pool[hi]; // lower_bound lands on a run head
            best_distance = pool_logits[hi] - target_logit;
        }
        if (hi > 0) {
            const size_t lo_head = run_start[hi - 1];
            const double distance = target_logit - pool_logits[hi - 1];
            if (!best || distance < best_distance ||
                (distance == best_distance && sorted_pool[lo_head] < *best)) {
                best = sorted_pool[lo_head];
                best_distance = distance;
            }
        }
        if (best && best_distance <= caliper) {
            sum += sign * (outcome[t] - outcome[*best]);
            ++out.matched;
        } else {
            ++out.unmatched;
        }
    }
    if (out.matched > 0) out.mean_diff = sum / static_cast<double>(out.matched);
    return out;
}

} // namespace detail

/// Propensity-score matching: 1-NN with replacement on the logit of the
/// propensity score, caliper 0.2 * std of the logit scores. ATT and ATC are
/// combined into the ATE weighted by matched arm sizes.
inline PointResult psm_point(const Dataset& ds, const EstimatorSpec& spec) {
    detail::AnalysisFrame frame = detail::build_frame(ds, spec);
    detail::require_binary_arms(frame, spec.treatment);

    std::vector<size_t> treated, control;
    for (size_t i = 0; i < frame.n; ++i)
        (frame.treatment[i] == 1.0 ? treated : control).push_back(i);
    if (treated.size() < 2 || control.size() < 2)
        throw Error("PSM: need at least 2 rows per arm");

    PropensityModel model = detail::frame_propensity(frame, spec.propensity);
    const std::vector<double> logits = detail::logit_scores(model);
    const double caliper = 0.2 * population_std(logits);

    const auto att = detail::match_side(treated, control, logits, frame.outcome, caliper, +1.0);
    const auto atc = detail::match_side(control, treated, logits, frame.outcome, caliper, -1.0);

    PointResult result;
    result.n_treated = treated.size();
    result.n_control = control.size();
    result.diagnostics.add("matched_treated", static_cast<double>(att.matched));
    result.diagnostics.add("matched_control", static_cast<double>(atc.matched));
    result.diagnostics.add("unmatched_treated", static_cast<double>(att.unmatched));
    result.diagnostics.add("unmatched_control", static_cast<double>(atc.unmatched));
    result.diagnostics.add("caliper_logit", caliper);
    result.diagnostics.add("dropped_missing", static_cast<double>(frame.dropped_missing));
    if (!model.converged)
        result.diagnostics.notes.push_back("propensity model did not converge (possible separation)");

    switch (spec.effect_kind) {
        case EffectKind::Att:
            if (att.matched == 0) throw Error("PSM: no treated unit matched within the caliper");
            result.point = att.mean_diff;
            break;
        case EffectKind::Atc:
            if (atc.matched == 0) throw Error("PSM: no control unit matched within the caliper");
            result.point = atc.mean_diff;
            break;
        case EffectKind::Ate: {
            const size_t total = att.matched + atc.matched;
            if (total == 0) throw Error("PSM: no unit matched within the caliper");
            result.point = (att.mean_diff * static_cast<double>(att.matched) +
                            atc.mean_diff * static_cast<double>(atc.matched)) /
                           static_cast<double>(total);
            break;
        }
    }
    return result;
}

/// Propensity-score stratification: quantile strata of the score (ranks split
/// evenly, ties resolved by canonical row order), within-stratum mean
/// difference, stratum-size-weighted average. One-armed strata are dropped.
inline PointResult pss_point(const Dataset& ds, const EstimatorSpec& spec) {
    if (spec.strata < 2) throw Error("PSS: k_strata must be at least 2");
    if (spec.effect_kind != EffectKind::Ate) throw Error("PSS: only the ATE is supported");
    detail::AnalysisFrame frame = detail::build_frame(ds, spec);
    detail::require_binary_arms(frame, spec.treatment);
    if (frame.n < spec.strata) throw Error("PSS: fewer rows than strata");

    PropensityModel model = detail::frame_propensity(frame, spec.propensity);
    std::vector<size_t> order(frame.n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return model.scores[a] < model.scores[b]; });

    const size_t k = spec.strata;
    std::vector<double> sum_treated(k, 0.0), sum_control(k, 0.0);
    std::vector<size_t> n_treated(k, 0), n_control(k, 0);
    for (size_t rank = 0; rank < frame.n; ++rank) {
        const size_t row = order[rank];
        const size_t stratum = rank * k / frame.n;
        if (frame.treatment[row] == 1.0) {
            sum_treated[stratum] += frame.outcome[row];
            ++n_treated[stratum];
        } else {
            sum_control[stratum] += frame.outcome[row];
            ++n_control[stratum];
        }
    }

    double weighted = 0.0;
    size_t used_rows = 0, dropped_strata = 0;
    for (size_t s = 0; s < k; ++s) {
        const size_t ns = n_treated[s] + n_control[s];
        if (n_treated[s] == 0 || n_control[s] == 0) {
            if (ns > 0) ++dropped_strata;
            continue;
        }
        const double diff = sum_treated[s] / static_cast<double>(n_treated[s]) -
                            sum_control[s] / static_cast<double>(n_control[s]);
        weighted += diff * static_cast<double>(ns);
        used_rows += ns;
    }
    if (used_rows == 0) throw Error("PSS: every stratum is one-armed");

    PointResult result;
    result.point = weighted / static_cast<double>(used_rows);
    for (size_t i = 0; i < frame.n; ++i)
        (frame.treatment[i] == 1.0 ? result.n_treated : result.n_control) += 1;
    result.diagnostics.add("strata_requested", static_cast<double>(k));
    result.diagnostics.add("strata_dropped", static_cast<double>(dropped_strata));
    result.diagnostics.add("rows_in_used_strata", static_cast<double>(used_rows));
    result.diagnostics.add("dropped_missing", static_cast<double>(frame.dropped_missing));
    if (!model.converged)
        result.diagnostics.notes.push_back("propensity model did not converge (possible separation)");
    return result;
}

/// Hajek (self-normalized) inverse-propensity weighting.
inline PointResult psw_point(const Dataset& ds, const EstimatorSpec& spec) {
    if (spec.effect_kind != EffectKind::Ate) throw Error("PSW: only the ATE is supported");
    detail::AnalysisFrame frame = detail::build_frame(ds, spec);
    detail::require_binary_arms(frame, spec.treatment);

    PropensityModel model = detail::frame_propensity(frame, spec.propensity);
    double treated_weighted = 0.0, treated_weight = 0.0;
    double control_weighted = 0.0, control_weight = 0.0;
    double weight_min = std::numeric_limits<double>::infinity(), weight_max = 0.0;
    size_t clipped = 0;
    PointResult result;
    for (size_t i = 0; i < frame.n; ++i) {
        const double pi = model.scores[i];
        if (pi <= kPropensityClip || pi >= 1.0 - kPropensityClip) ++clipped;
        double w;
        if (frame.treatment[i] == 1.0) {
            w = 1.0 / pi;
            treated_weighted += w * frame.outcome[i];
            treated_weight += w;
            ++result.n_treated;
        } else {
            w = 1.0 / (1.0 - pi);
            control_weighted += w * frame.outcome[i];
            control_weight += w;
            ++result.n_control;
        }
        weight_min = std::min(weight_min, w);
        weight_max = std::max(weight_max, w);
    }
    result.point = treated_weighted / treated_weight - control_weighted / control_weight;
    result.diagnostics.add("weight_min", weight_min);
    result.diagnostics.add("weight_max", weight_max);
    result.diagnostics.add("scores_at_clip_bound", static_cast<double>(clipped));
    result.diagnostics.add("dropped_missing", static_cast<double>(frame.dropped_missing));
    if (clipped * 10 > frame.n)
        result.diagnostics.notes.push_back(
            "more than 10% of propensity scores sit at the clip boundary; weights are degenerate");
    if (!model.converged)
        result.diagnostics.notes.push_back("propensity model did not converge (possible separation)");
    return result;
}

/// Two-stage least squares: stage 1 regresses T on (1, I, Z); stage 2
/// regresses Y on (1, T_hat, Z). Rank-deficient designs are solved with a
/// tolerance-based pseudo-inverse; only a vanishing first stage is fatal.
inline PointResult two_sls_point(const Dataset& ds, const EstimatorSpec& spec) {
    if (spec.instruments.empty()) throw Error("2SLS: needs at least one instrument");
    if (spec.effect_kind != EffectKind::Ate) throw Error("2SLS: only the ATE is supported");
    detail::AnalysisFrame frame = detail::build_frame(ds, spec);
    const auto n = static_cast<Eigen::Index>(frame.n);
    const auto q = static_cast<Eigen::Index>(spec.instruments.size());
    const auto z = static_cast<Eigen::Index>(spec.adjustment.size());
    if (n < q + z + 2) throw Error("2SLS: not enough rows for the design");

    Eigen::VectorXd t(n), y(n);
    for (size_t i = 0; i < frame.n; ++i) {
        t(static_cast<Eigen::Index>(i)) = frame.treatment[i];
        y(static_cast<Eigen::Index>(i)) = frame.outcome[i];
    }

    Eigen::MatrixXd stage1(n, 1 + q + z);
    stage1.col(0).setOnes();
    stage1.middleCols(1, q) = frame.instruments;
    if (z > 0) stage1.middleCols(1 + q, z) = frame.adjustment;

    const Eigen::VectorXd b1 = stage1.completeOrthogonalDecomposition().solve(t);
    const Eigen::VectorXd t_hat = stage1 * b1;
    const double t_hat_var =
        (t_hat.array() - t_hat.mean()).square().sum() / static_cast<double>(frame.n);
    if (t_hat_var < 1e-12) throw Error("2SLS: zero first-stage variance (instruments irrelevant)");

    // First-stage F for the instruments against the restricted design (1, Z).
    Eigen::MatrixXd restricted(n, 1 + z);
    restricted.col(0).setOnes();
    if (z > 0) restricted.middleCols(1, z) = frame.adjustment;
    const Eigen::VectorXd b_restricted = restricted.completeOrthogonalDecomposition().solve(t);
    const double rss_full = (t - t_hat).squaredNorm();
    const double rss_restricted = (t - restricted * b_restricted).squaredNorm();
    const double df = static_cast<double>(frame.n) - static_cast<double>(1 + q + z);
    double f_stat = std::numeric_limits<double>::infinity();
    if (rss_full > 0.0 && df > 0.0)
        f_stat = ((rss_restricted - rss_full) / static_cast<double>(q)) / (rss_full / df);

    Eigen::MatrixXd stage2(n, 2 + z);
    stage2.col(0).setOnes();
    stage2.col(1) = t_hat;
    if (z > 0) stage2.middleCols(2, z) = frame.adjustment;
    const Eigen::VectorXd b2 = stage2.completeOrthogonalDecomposition().solve(y);

    PointResult result;
    result.point = b2(1);
    for (size_t i = 0; i < frame.n; ++i) {
        if (frame.treatment[i] == 1.0)
            ++result.n_treated;
        else if (frame.treatment[i] == 0.0)
            ++result.n_control;
    }
    result.diagnostics.add("first_stage_f", f_stat);
    result.diagnostics.add("dropped_missing", static_cast<double>(frame.dropped_missing));
    if (f_stat < 10.0)
        result.diagnostics.notes.push_back("weak instruments: first-stage F below 10");
    return result;
}

/// Point estimate for any estimator spec.
inline PointResult point_estimate(const Dataset& ds, const EstimatorSpec& spec) {
    switch (spec.kind) {
        case EstimatorKind::Psm: return psm_point(ds, spec);
        case EstimatorKind::Pss: return pss_point(ds, spec);
        case EstimatorKind::Psw: return psw_point(ds, spec);
        case EstimatorKind::TwoSls: return two_sls_point(ds, spec);
    }
    throw Error("point_estimate: unknown estimator");
}

// ---------------------------------------------------------------------------
// Bootstrap inference
// ---------------------------------------------------------------------------

struct BootstrapResult {
    double se_boot = 0.0;
    double p_value = 1.0;
    ConfidenceInterval ci95;
    size_t replicates = 0;
    size_t skipped = 0;
};

/// Seeded row resampling with replacement. Replicates whose estimator throws
/// are skipped and counted; more than 5% skips is an error. The percentile
/// interval is widened to include the full-sample point when discrete
/// resampling pushes it outside.
inline BootstrapResult bootstrap_inference(const std::function<double(const Dataset&)>& estimator,
                                           const Dataset& ds, double point, size_t replicates,
                                           uint64_t seed) {
    if (replicates < 100) throw Error("bootstrap_inference: need at least 100 replicates");
    const size_t n = ds.row_count();
    if (n == 0) throw Error("bootstrap_inference: empty dataset");

    std::vector<double> points;
    points.reserve(replicates);
    size_t skipped = 0;
    std::vector<size_t> rows(n);
    for (size_t b = 0; b < replicates; ++b) {
        Rng rng(derive_seed(seed, b));
        for (size_t i = 0; i < n; ++i) rows[i] = rng.below(n);
        try {
            points.push_back(estimator(ds.select_rows(rows)));
        } catch (const Error&) {
            ++skipped;
        }
    }
    if (points.empty()) throw Error("bootstrap_inference: every replicate failed");
    if (skipped * 20 > replicates)
        throw Error("bootstrap_inference: " + std::to_string(skipped) + " of " +
                    std::to_string(replicates) + " replicates failed (more than 5%)");

    BootstrapResult result;
    result.replicates = replicates;
    result.skipped = skipped;
    result.se_boot = sample_std(points);
    result.p_value = normal_p_value(point, result.se_boot);
    std::sort(points.begin(), points.end());
    result.ci95.low = std::min(quantile_sorted(points, 0.025), point);
    result.ci95.high = std::max(quantile_sorted(points, 0.975), point);
    return result;
}

struct InferenceOptions {
    size_t bootstrap_replicates = 1000;
    uint64_t seed = 0;
};

/// Point estimate plus bootstrap inference, assembled into an EffectEstimate.
inline EffectEstimate estimate_effect(const Dataset& ds, const EstimatorSpec& spec,
                                      const InferenceOptions& inference) {
    const PointResult point = point_estimate(ds, spec);
    const BootstrapResult boot = bootstrap_inference(
        [&spec](const Dataset& resampled) { return point_estimate(resampled, spec).point; }, ds,
        point.point, inference.bootstrap_replicates, inference.seed);

    EffectEstimate estimate;
    estimate.estimator = spec.kind;
    estimate.effect_kind = spec.effect_kind;
    estimate.point = point.point;
    estimate.se_boot = boot.se_boot;
    estimate.p_value = boot.p_value;
    estimate.ci95 = boot.ci95;
    estimate.n_treated = point.n_treated;
    estimate.n_control = point.n_control;
    estimate.diagnostics = point.diagnostics;
    estimate.diagnostics.add("bootstrap_replicates", static_cast<double>(boot.replicates));
    estimate.diagnostics.add("bootstrap_skipped", static_cast<double>(boot.skipped));
    return estimate;
}

// ---------------------------------------------------------------------------
// CATE
// ---------------------------------------------------------------------------

struct CateBin {
    std::string label;       // category label or "[lo, hi]" for continuous bins
    double lower = 0.0;      // continuous bins only
    double upper = 0.0;
    size_t n = 0;
    bool low_power = false;  // below 50 rows
    EffectEstimate estimate;
};

struct CateTable {
    std::string modifier;
    std::vector<CateBin> bins;
};

/// Subgroup effects across an effect modifier: continuous modifiers split at
/// quartiles, categorical/binary modifiers by level; the estimator re-runs
/// per subgroup with a derived seed.
inline CateTable estimate_cate(const Dataset& ds, const EstimatorSpec& spec,
                               const std::string& modifier, const InferenceOptions& inference) {
    const Column& mod = ds.column(modifier);
    std::vector<size_t> rows;
    for (size_t r = 0; r < ds.row_count(); ++r)
        if (!is_missing(mod.values[r])) rows.push_back(r);
    if (rows.empty()) throw Error("estimate_cate: modifier '" + modifier + "' is all-missing");
    {
        const double first = mod.values[rows.front()];
        bool constant = true;
        for (size_t r : rows)
            if (mod.values[r] != first) {
                constant = false;
                break;
            }
        if (constant) throw Error("estimate_cate: modifier '" + modifier + "' is constant");
    }

    CateTable table;
    table.modifier = modifier;
    std::vector<std::pair<std::string, std::vector<size_t>>> groups;

    if (mod.kind == ColumnKind::Continuous) {
        std::stable_sort(rows.begin(), rows.end(),
                         [&](size_t a, size_t b) { return mod.values[a] < mod.values[b]; });
        const size_t bins = 4; // quartiles
        for (size_t bin = 0; bin < bins; ++bin) {
            const size_t begin = rows.size() * bin / bins;
            const size_t end = rows.size() * (bin + 1) / bins;
            if (begin >= end) continue;
            std::vector<size_t> members(rows.begin() + static_cast<long>(begin),
                                        rows.begin() + static_cast<long>(end));
            const double lo = mod.values[members.front()];
            const double hi = mod.values[members.back()];
            groups.emplace_back("q" + std::to_string(bin + 1), std::move(members));
            CateBin meta;
            meta.lower = lo;
            meta.upper = hi;
            table.bins.push_back(std::move(meta));
        }
    } else {
        std::map<double, std::vector<size_t>> by_level;
        for (size_t r : rows) by_level[mod.values[r]].push_back(r);
        for (auto& [code, members] : by_level) {
            std::string label = mod.kind == ColumnKind::Categorical
                                    ? mod.label_for_code(static_cast<size_t>(code))
                                    : detail::format_double(code);
            groups.emplace_back(std::move(label), std::move(members));
            table.bins.emplace_back();
        }
    }

    for (size_t gi = 0; gi < groups.size(); ++gi) {
        auto& [label, members] = groups[gi];
        CateBin& bin = table.bins[gi];
        if (bin.label.empty() || mod.kind == ColumnKind::Continuous) {
            bin.label = mod.kind == ColumnKind::Continuous
                            ? "[" + detail::format_double(bin.lower) + ", " +
                                  detail::format_double(bin.upper) + "]"
                            : label;
        }
        bin.n = members.size();
        bin.low_power = members.size() < 50;
        InferenceOptions sub = inference;
        sub.seed = derive_seed(inference.seed, "cate_bin_" + std::to_string(gi));
        bin.estimate = estimate_effect(ds.select_rows(members), spec, sub);
    }
    return table;
}

} // namespace causalse
