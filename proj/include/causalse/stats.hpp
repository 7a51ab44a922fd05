#pragma once

// Small numeric kernels shared across modules: moments, mid-ranks,
// correlation, quantiles and the normal CDF.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "causalse/common.hpp"

namespace causalse {

inline double mean_of(const std::vector<double>& x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Population variance (divide by n).
inline double population_variance(const std::vector<double>& x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

inline double population_std(const std::vector<double>& x) {
    return std::sqrt(population_variance(x));
}

/// Sample standard deviation (divide by n-1); 0 for fewer than 2 points.
inline double sample_std(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

/// Mid-ranks (1-based, ties averaged).
inline std::vector<double> mid_ranks(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

struct PairwiseCorrelation {
    double value = 0.0;
    bool constant_input = false; // one side had zero variance; value forced to 0
};

/// Pearson product-moment correlation; constant inputs yield 0 and a flag.
inline PairwiseCorrelation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("pearson: length mismatch");
    const size_t n = x.size();
    if (n < 2) throw Error("pearson: need at least 2 paired observations");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, true};
    double r = sxy / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);
    return {r, false};
}

/// Spearman rank correlation: Pearson on mid-ranks.
inline PairwiseCorrelation spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(mid_ranks(x), mid_ranks(y));
}

/// Type-7 (linear interpolation) quantile of an already sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (sorted.size() == 1) return sorted[0];
    const double h = p * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730950488016887242097);
}

/// Two-sided normal-approximation p-value for point/se; se == 0 degenerates
/// to 1 when the point is 0 and 0 otherwise.
inline double normal_p_value(double point, double se) {
    if (se <= 0.0) return point == 0.0 ? 1.0 : 0.0;
    return 2.0 * (1.0 - normal_cdf(std::abs(point) / se));
}

} // namespace causalse
