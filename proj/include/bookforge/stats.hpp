#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace bookforge {

struct Correlation {
    double statistic = 0.0;
    double pvalue = 1.0;
};

/// 1-based ascending ranks; tied values share the mean of their rank span.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace detail {

// Sizes of the groups of equal values.
inline std::vector<double> tie_groups(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    std::vector<double> groups;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        if (j - i > 1) groups.push_back(static_cast<double>(j - i));
        i = j;
    }
    return groups;
}

} // namespace detail

/**
 * Kendall tau-b with a two-sided p-value from the tie-corrected normal
 * approximation of the null distribution.
 *
 * Returns nothing when fewer than two observations are given or either series
 * is constant (the statistic is undefined).
 */
inline std::optional<Correlation> kendall_tau(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::nullopt;
    double concordant = 0.0, discordant = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = (x[i] - x[j]) * (y[i] - y[j]);
            if (s > 0) concordant += 1.0;
            else if (s < 0) discordant += 1.0;
        }
    const auto tx = detail::tie_groups(x.first(n));
    const auto ty = detail::tie_groups(y.first(n));
    const double nn = static_cast<double>(n);
    const double n0 = nn * (nn - 1.0) / 2.0;
    double n1 = 0.0, n2 = 0.0, vt = 0.0, vu = 0.0, t1 = 0.0, u1 = 0.0, t2 = 0.0, u2 = 0.0;
    for (double t : tx) {
        n1 += t * (t - 1.0) / 2.0;
        vt += t * (t - 1.0) * (2.0 * t + 5.0);
        t1 += t * (t - 1.0);
        t2 += t * (t - 1.0) * (t - 2.0);
    }
    for (double u : ty) {
        n2 += u * (u - 1.0) / 2.0;
        vu += u * (u - 1.0) * (2.0 * u + 5.0);
        u1 += u * (u - 1.0);
        u2 += u * (u - 1.0) * (u - 2.0);
    }
    if (n1 >= n0 || n2 >= n0) return std::nullopt;
    Correlation c;
    c.statistic = std::clamp((concordant - discordant) / std::sqrt((n0 - n1) * (n0 - n2)), -1.0, 1.0);
    double var = (nn * (nn - 1.0) * (2.0 * nn + 5.0) - vt - vu) / 18.0 + t1 * u1 / (2.0 * nn * (nn - 1.0));
    if (n > 2) var += t2 * u2 / (9.0 * nn * (nn - 1.0) * (nn - 2.0));
    if (var > 0.0) {
        const double z = (concordant - discordant) / std::sqrt(var);
        c.pvalue = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
    return c;
}

/**
 * Spearman rank correlation with a two-sided p-value from Student's t with
 * n - 2 degrees of freedom. Needs at least three observations and two
 * non-constant series.
 */
inline std::optional<Correlation> spearman(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 3) return std::nullopt;
    const auto rx = average_ranks(x.first(n));
    const auto ry = average_ranks(y.first(n));
    const double mean = (static_cast<double>(n) + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    Correlation c;
    c.statistic = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n) - 2.0;
    const double r2 = c.statistic * c.statistic;
    if (r2 >= 1.0) {
        c.pvalue = 0.0;
    } else {
        const double t = std::abs(c.statistic) * std::sqrt(df / (1.0 - r2));
        boost::math::students_t dist(df);
        c.pvalue = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
    }
    return c;
}

} // namespace bookforge
