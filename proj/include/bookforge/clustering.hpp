#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace bookforge {

/// Symmetric n x n matrix with zero diagonal and finite entries.
class Dissimilarity {
public:
    Dissimilarity() = default;

    explicit Dissimilarity(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    /// Row-major n*n values; validated.
    Dissimilarity(std::size_t n, std::vector<double> values) : n_(n), d_(std::move(values)) {
        if (d_.size() != n * n) throw Error("dissimilarity: expected " + std::to_string(n * n) + " values");
        for (std::size_t i = 0; i < n; ++i) {
            if (d_[i * n + i] != 0.0) throw Error("dissimilarity: non-zero diagonal at " + std::to_string(i));
            for (std::size_t j = 0; j < n; ++j) {
                const double x = d_[i * n + j];
                if (!std::isfinite(x)) throw Error("dissimilarity: non-finite entry");
                if (x != d_[j * n + i]) throw Error("dissimilarity: matrix is not symmetric");
            }
        }
    }

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, double v) {
        if (i == j) return;
        d_[i * n_ + j] = v;
        d_[j * n_ + i] = v;
    }

    const std::vector<double>& values() const { return d_; }

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

/**
 * Item -> cluster assignment. Cluster ids are canonical: numbered 0..k-1 in
 * order of each cluster's first item, so equal partitions compare equal.
 */
class Partition {
public:
    Partition() = default;

    explicit Partition(const std::vector<std::size_t>& labels) : assignment_(labels.size()) {
        std::vector<std::size_t> remap;
        std::vector<std::size_t> seen_label;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto it = std::find(seen_label.begin(), seen_label.end(), labels[i]);
            if (it == seen_label.end()) {
                seen_label.push_back(labels[i]);
                assignment_[i] = seen_label.size() - 1;
            } else {
                assignment_[i] = static_cast<std::size_t>(it - seen_label.begin());
            }
        }
        k_ = seen_label.size();
    }

    std::size_t size() const { return assignment_.size(); }
    std::size_t k() const { return k_; }
    std::size_t operator[](std::size_t i) const { return assignment_[i]; }
    const std::vector<std::size_t>& assignment() const { return assignment_; }

    std::vector<std::vector<std::size_t>> clusters() const {
        std::vector<std::vector<std::size_t>> out(k_);
        for (std::size_t i = 0; i < assignment_.size(); ++i) out[assignment_[i]].push_back(i);
        return out;
    }

    bool same_cluster(std::size_t i, std::size_t j) const { return assignment_[i] == assignment_[j]; }

    bool operator==(const Partition&) const = default;

private:
    std::vector<std::size_t> assignment_;
    std::size_t k_ = 0;
};

enum class ClusterMethod { agnes, diana, pam };

inline std::string_view to_string(ClusterMethod m) {
    switch (m) {
    case ClusterMethod::agnes: return "agnes";
    case ClusterMethod::diana: return "diana";
    case ClusterMethod::pam: return "pam";
    }
    return "agnes";
}

inline ClusterMethod parse_cluster_method(std::string_view s) {
    if (s == "agnes") return ClusterMethod::agnes;
    if (s == "diana") return ClusterMethod::diana;
    if (s == "pam") return ClusterMethod::pam;
    throw ConfigError("unknown clustering method '" + std::string(s) + "' (expected agnes, diana or pam)");
}

namespace detail {

inline void check_k(std::size_t n, std::size_t k) {
    if (k < 1 || k > n)
        throw ConfigError("cluster count " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
}

} // namespace detail

/// Agglomerative nesting with average linkage (UPGMA), stopped at k clusters.
inline Partition agnes(const Dissimilarity& d, std::size_t k) {
    const std::size_t n = d.size();
    detail::check_k(n, k);
    // active clusters are keyed by their smallest member; merges keep the lower key
    std::vector<double> dist(d.values());
    std::vector<std::size_t> weight(n, 1), label(n);
    std::iota(label.begin(), label.end(), 0);
    std::vector<bool> active(n, true);
    for (std::size_t clusters = n; clusters > k; --clusters) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (active[j] && dist[i * n + j] < best) {
                    best = dist[i * n + j];
                    bi = i;
                    bj = j;
                }
        }
        const double wi = static_cast<double>(weight[bi]), wj = static_cast<double>(weight[bj]);
        for (std::size_t m = 0; m < n; ++m) {
            if (!active[m] || m == bi || m == bj) continue;
            const double v = (wi * dist[bi * n + m] + wj * dist[bj * n + m]) / (wi + wj);
            dist[bi * n + m] = dist[m * n + bi] = v;
        }
        weight[bi] += weight[bj];
        active[bj] = false;
        for (auto& l : label)
            if (l == bj) l = bi;
    }
    return Partition(label);
}

/**
 * Divisive analysis: repeatedly split the cluster of largest diameter with the
 * splinter-group procedure until k clusters exist.
 */
inline Partition diana(const Dissimilarity& d, std::size_t k) {
    const std::size_t n = d.size();
    detail::check_k(n, k);
    std::vector<std::vector<std::size_t>> clusters{std::vector<std::size_t>(n)};
    std::iota(clusters[0].begin(), clusters[0].end(), 0);
    auto diameter = [&](const std::vector<std::size_t>& c) {
        double m = 0.0;
        for (std::size_t a = 0; a < c.size(); ++a)
            for (std::size_t b = a + 1; b < c.size(); ++b) m = std::max(m, d(c[a], c[b]));
        return m;
    };
    while (clusters.size() < k) {
        std::size_t pick = clusters.size();
        double widest = -1.0;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            if (clusters[c].size() < 2) continue;
            const double dm = diameter(clusters[c]);
            if (dm > widest || (dm == widest && clusters[c].front() < clusters[pick].front())) {
                widest = dm;
                pick = c;
            }
        }
        std::vector<std::size_t> rest = clusters[pick], splinter;
        // seed the splinter group with the member of largest average dissimilarity
        auto avg_to = [&](std::size_t i, const std::vector<std::size_t>& group) {
            double s = 0.0;
            std::size_t cnt = 0;
            for (auto j : group)
                if (j != i) {
                    s += d(i, j);
                    ++cnt;
                }
            return cnt ? s / static_cast<double>(cnt) : 0.0;
        };
        std::size_t first = 0;
        double best = -1.0;
        for (std::size_t a = 0; a < rest.size(); ++a) {
            const double v = avg_to(rest[a], rest);
            if (v > best) {
                best = v;
                first = a;
            }
        }
        splinter.push_back(rest[first]);
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(first));
        while (rest.size() > 1) {
            std::size_t move = rest.size();
            double gain = 0.0;
            for (std::size_t a = 0; a < rest.size(); ++a) {
                const double g = avg_to(rest[a], rest) - avg_to(rest[a], splinter);
                if (g > gain) {
                    gain = g;
                    move = a;
                }
            }
            if (move == rest.size()) break;
            splinter.push_back(rest[move]);
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(move));
        }
        std::sort(splinter.begin(), splinter.end());
        clusters[pick] = std::move(rest);
        clusters.push_back(std::move(splinter));
    }
    std::vector<std::size_t> label(n);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (auto i : clusters[c]) label[i] = c;
    return Partition(label);
}

struct PamResult {
    Partition partition;
    std::vector<std::size_t> medoids;
    std::vector<double> cost_trace; // total cost after BUILD, then after each accepted swap
};

/// Partitioning around medoids: greedy BUILD followed by best-improvement SWAP to a local optimum.
inline PamResult pam_detailed(const Dissimilarity& d, std::size_t k) {
    const std::size_t n = d.size();
    detail::check_k(n, k);
    std::vector<std::size_t> medoids;
    std::vector<bool> is_medoid(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    // Sums over sorted terms do not depend on the index order of the input.
    auto sorted_sum = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    };
    std::vector<double> row_sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = d(i, j);
        row_sum[i] = sorted_sum(std::move(row));
    }
    auto total_cost = [&](const std::vector<std::size_t>& meds) {
        std::vector<double> terms(n);
        for (std::size_t j = 0; j < n; ++j) {
            double m = std::numeric_limits<double>::infinity();
            for (auto x : meds) m = std::min(m, d(j, x));
            terms[j] = m;
        }
        return sorted_sum(std::move(terms));
    };

    // BUILD
    {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (row_sum[i] < row_sum[best]) best = i;
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = d(j, best);
    }
    while (medoids.size() < k) {
        std::size_t best = n;
        double best_gain = -1.0;
        std::vector<double> terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (is_medoid[i]) continue;
            for (std::size_t j = 0; j < n; ++j) terms[j] = std::max(nearest[j] - d(j, i), 0.0);
            const double g = sorted_sum(terms);
            if (g > best_gain || (g == best_gain && row_sum[i] < row_sum[best])) {
                best_gain = g;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d(j, best));
    }

    PamResult out;
    double cost = total_cost(medoids);
    out.cost_trace.push_back(cost);

    // SWAP
    for (std::size_t guard = 0; guard < 100 * n + 100; ++guard) {
        double best_cost = cost;
        std::size_t bm = 0, bh = 0;
        bool found = false;
        for (std::size_t m = 0; m < medoids.size(); ++m)
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                auto trial = medoids;
                trial[m] = h;
                const double c = total_cost(trial);
                const bool better = found ? (c < best_cost || (c == best_cost && (row_sum[h] < row_sum[bh] ||
                                                                    (row_sum[h] == row_sum[bh] &&
                                                                     row_sum[medoids[m]] < row_sum[medoids[bm]]))))
                                          : c < cost - 1e-12 * std::max(1.0, std::abs(cost));
                if (better) {
                    best_cost = c;
                    bm = m;
                    bh = h;
                    found = true;
                }
            }
        if (!found) break;
        is_medoid[medoids[bm]] = false;
        is_medoid[bh] = true;
        medoids[bm] = bh;
        cost = best_cost;
        out.cost_trace.push_back(cost);
    }

    std::vector<std::size_t> sorted = medoids;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> label(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t pick = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sorted.size(); ++c)
            if (d(j, sorted[c]) < best) {
                best = d(j, sorted[c]);
                pick = c;
            }
        label[j] = pick;
    }
    for (std::size_t c = 0; c < sorted.size(); ++c) label[sorted[c]] = c;
    out.partition = Partition(label);
    out.medoids = sorted;
    return out;
}

inline Partition pam(const Dissimilarity& d, std::size_t k) { return pam_detailed(d, k).partition; }

inline Partition cluster(const Dissimilarity& d, std::size_t k, ClusterMethod method) {
    switch (method) {
    case ClusterMethod::agnes: return agnes(d, k);
    case ClusterMethod::diana: return diana(d, k);
    case ClusterMethod::pam: return pam(d, k);
    }
    return agnes(d, k);
}

struct AffinityParams {
    double damping = 0.9;
    int max_iter = 1000;
    int convergence_iter = 100;        // iterations with an unchanged exemplar set
    std::optional<double> preference;  // default: median off-diagonal similarity
};

struct AffinityResult {
    std::vector<std::size_t> exemplars;
    std::size_t k = 0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace detail

/**
 * Affinity propagation over a full similarity matrix (row-major n*n).
 *
 * Responsibility/availability message passing with damping; the diagonal is
 * replaced by the preference. When every off-diagonal similarity is equal the
 * answer is a single exemplar (item 0).
 */
inline AffinityResult affinity_propagation(std::size_t n, std::vector<double> s, const AffinityParams& p = {}) {
    if (!(p.damping >= 0.5 && p.damping < 1.0)) throw ConfigError("affinity propagation damping must lie in [0.5, 1)");
    if (s.size() != n * n) throw Error("affinity propagation: similarity matrix has the wrong size");
    AffinityResult out;
    if (n == 0) return out;
    std::vector<double> off;
    off.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) off.push_back(s[i * n + j]);
    const double pref = p.preference ? *p.preference : detail::median(off);
    const bool all_equal = std::all_of(off.begin(), off.end(), [&](double x) { return x == off.front(); });
    if (n == 1 || all_equal) {
        out.exemplars = {0};
        out.k = 1;
        out.converged = true;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) s[i * n + i] = pref;
    // relative jitter of order 1e-16 breaks exact ties between interchangeable items
    Rng jitter(0x5eedu);
    for (auto& x : s) {
        const double z = jitter.normal();
        x += (std::numeric_limits<double>::epsilon() * x + std::numeric_limits<double>::min() * 100.0) * z;
    }

    std::vector<double> r(n * n, 0.0), a(n * n, 0.0);
    std::vector<std::size_t> last, stable_set;
    int unchanged = 0;
    const double lam = p.damping;
    for (int it = 1; it <= p.max_iter; ++it) {
        out.iterations = it;
        for (std::size_t i = 0; i < n; ++i) {
            double first = -std::numeric_limits<double>::infinity(), second = first;
            std::size_t arg = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = a[i * n + k] + s[i * n + k];
                if (v > first) {
                    second = first;
                    first = v;
                    arg = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                const double nr = s[i * n + k] - (k == arg ? second : first);
                r[i * n + k] = lam * r[i * n + k] + (1.0 - lam) * nr;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            double pos = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (i != k) pos += std::max(0.0, r[i * n + k]);
            for (std::size_t i = 0; i < n; ++i) {
                double na;
                if (i == k) na = pos;
                else na = std::min(0.0, r[k * n + k] + pos - std::max(0.0, r[i * n + k]));
                a[i * n + k] = lam * a[i * n + k] + (1.0 - lam) * na;
            }
        }
        std::vector<std::size_t> ex;
        for (std::size_t k = 0; k < n; ++k)
            if (a[k * n + k] + r[k * n + k] > 0.0) ex.push_back(k);
        if (ex == last) ++unchanged;
        else unchanged = 0;
        last = ex;
        if (!ex.empty() && unchanged >= 1) stable_set = ex;
        if (!ex.empty() && unchanged >= p.convergence_iter) {
            out.converged = true;
            break;
        }
    }
    if (out.converged) out.exemplars = last;
    else if (!stable_set.empty()) out.exemplars = stable_set;
    else if (!last.empty()) out.exemplars = last;
    else out.exemplars = {0};
    out.k = out.exemplars.size();
    return out;
}

/// AP on similarity = -dissimilarity.
inline AffinityResult affinity_propagation(const Dissimilarity& d, const AffinityParams& p = {}) {
    std::vector<double> s(d.values());
    for (auto& x : s) x = -x;
    return affinity_propagation(d.size(), std::move(s), p);
}

} // namespace bookforge
