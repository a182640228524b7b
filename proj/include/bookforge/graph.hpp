#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "error.hpp"

namespace bookforge {

/**
 * Directed induced subgraph over a set of articles.
 *
 * Nodes are numbered 0..n-1. Adjacency lists are sorted, free of duplicates
 * and self-loops.
 */
class SubNetwork {
public:
    SubNetwork() = default;

    SubNetwork(std::vector<std::string> ids, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
        : ids_(std::move(ids)), out_(ids_.size()), in_(ids_.size()) {
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (!local_.emplace(ids_[i], i).second) throw SchemaError("duplicate node id '" + ids_[i] + "'");
        for (auto [s, t] : edges) {
            if (s >= ids_.size() || t >= ids_.size()) throw SchemaError("edge endpoint out of range");
            if (s != t) out_[s].push_back(t);
        }
        for (auto& adj : out_) {
            std::sort(adj.begin(), adj.end());
            adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
        }
        for (std::size_t s = 0; s < out_.size(); ++s)
            for (auto t : out_[s]) in_[t].push_back(s);
        for (const auto& adj : out_) edge_count_ += adj.size();
    }

    std::size_t size() const { return ids_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(std::size_t v) const { return ids_[v]; }
    const std::vector<std::size_t>& out(std::size_t v) const { return out_[v]; }
    const std::vector<std::size_t>& in(std::size_t v) const { return in_[v]; }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = local_.find(id);
        if (it == local_.end()) return std::nullopt;
        return it->second;
    }

    bool has_edge(std::size_t s, std::size_t t) const { return std::binary_search(out_[s].begin(), out_[s].end(), t); }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> local_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::vector<std::size_t>> in_;
    std::size_t edge_count_ = 0;
};

/// Induced subgraph on `members` (duplicates collapsed, nodes ordered by corpus position).
inline SubNetwork build_subnetwork(const Corpus& corpus, std::span<const std::string> members) {
    std::vector<std::size_t> idx;
    idx.reserve(members.size());
    for (const auto& m : members) idx.push_back(corpus.index_of(m));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

    std::unordered_map<std::size_t, std::size_t> local;
    local.reserve(idx.size());
    std::vector<std::string> ids;
    ids.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        local.emplace(idx[i], i);
        ids.push_back(corpus[idx[i]].id);
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (auto t : corpus.links_of(idx[i])) {
            auto it = local.find(t);
            if (it != local.end()) edges.emplace_back(i, it->second);
        }
    return SubNetwork(std::move(ids), edges);
}

struct CentralityParams {
    double damping = 0.85;
    double tol = 1e-10;
    int max_iter = 200;
};

/// Per-node structural measures, indexed like the graph's nodes.
struct StructuralFeatures {
    std::vector<double> in_degree;
    std::vector<double> out_degree;
    std::vector<double> pagerank;
    std::vector<double> betweenness;
    std::vector<double> closeness;
    std::vector<double> hub;
    std::vector<double> authority;
};

namespace detail {

inline void check_params(const CentralityParams& p) {
    if (!(p.damping > 0.0 && p.damping < 1.0)) throw ConfigError("damping must lie in (0,1)");
    if (!(p.tol > 0.0)) throw ConfigError("tolerance must be positive");
    if (p.max_iter < 1) throw ConfigError("max_iter must be at least 1");
}

// Power iteration with uniform teleport; dangling mass is spread uniformly.
inline std::vector<double> pagerank(const SubNetwork& g, const CentralityParams& p) {
    const std::size_t n = g.size();
    if (n == 0) return {};
    std::vector<double> pr(n, 1.0 / static_cast<double>(n)), next(n);
    double residual = 0.0;
    for (int it = 0; it < p.max_iter; ++it) {
        double dangling = 0.0;
        for (std::size_t v = 0; v < n; ++v)
            if (g.out(v).empty()) dangling += pr[v];
        const double base = (1.0 - p.damping) / n + p.damping * dangling / n;
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (auto u : g.in(v)) s += pr[u] / static_cast<double>(g.out(u).size());
            next[v] = base + p.damping * s;
        }
        residual = 0.0;
        for (std::size_t v = 0; v < n; ++v) residual += std::abs(next[v] - pr[v]);
        pr.swap(next);
        if (residual < p.tol) {
            double total = 0.0;
            for (double x : pr) total += x;
            for (double& x : pr) x /= total;
            return pr;
        }
    }
    throw ConvergenceError("pagerank did not converge in " + std::to_string(p.max_iter) + " iterations", residual);
}

inline bool normalize_l2(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (s <= 0.0) return false;
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return true;
}

// Authority is the dominant eigenvector of A^T A reached from A^T 1, the limit of
// alternating hub/authority updates; restarted Lanczos gets there without the slow
// tail of plain power iteration. Edgeless graphs get uniform unit vectors.
inline void hits(const SubNetwork& g, const CentralityParams& p, std::vector<double>& hub, std::vector<double>& auth) {
    const std::size_t n = g.size();
    hub.assign(n, n ? 1.0 / std::sqrt(static_cast<double>(n)) : 0.0);
    auth = hub;
    if (n == 0 || g.edge_count() == 0) return;

    std::vector<double> tmp(n);
    auto hub_of = [&](const std::vector<double>& a, std::vector<double>& h) {
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (auto u : g.out(v)) s += a[u];
            h[v] = s;
        }
    };
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        hub_of(x, tmp);
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (auto u : g.in(v)) s += tmp[u];
            y[v] = s;
        }
    };
    auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    };

    std::vector<double> y(n);
    for (std::size_t v = 0; v < n; ++v) y[v] = static_cast<double>(g.in(v).size());
    normalize_l2(y);

    const std::size_t block = std::min<std::size_t>(n, 30);
    std::vector<std::vector<double>> q;
    std::vector<double> w(n), my(n);
    double residual = std::numeric_limits<double>::infinity();
    int used = 0;
    while (used < p.max_iter) {
        q.assign(1, y);
        std::vector<double> alpha, beta;
        while (q.size() <= block && used < p.max_iter) {
            apply(q.back(), w);
            ++used;
            alpha.push_back(dot(q.back(), w));
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : q) {
                    const double c = dot(b, w);
                    for (std::size_t i = 0; i < n; ++i) w[i] -= c * b[i];
                }
            const double norm = std::sqrt(dot(w, w));
            if (norm <= 1e-12 * std::max(1.0, std::abs(alpha.back()))) break;
            if (q.size() == block) break;
            beta.push_back(norm);
            for (auto& x : w) x /= norm;
            q.push_back(w);
        }
        const auto m = static_cast<Eigen::Index>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
        const double theta = eig.eigenvalues()(m - 1);
        const Eigen::VectorXd s = eig.eigenvectors().col(m - 1);
        std::fill(y.begin(), y.end(), 0.0);
        for (Eigen::Index j = 0; j < m; ++j)
            for (std::size_t i = 0; i < n; ++i) y[i] += s(j) * q[static_cast<std::size_t>(j)][i];
        double total = 0.0;
        for (double x : y) total += x;
        for (auto& x : y) x = std::max(0.0, total < 0 ? -x : x);
        if (!normalize_l2(y) || theta <= 0.0) break;

        apply(y, my);
        ++used;
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual += std::abs(my[i] / theta - y[i]);
        if (residual < p.tol) {
            auth = y;
            hub.assign(n, 0.0);
            hub_of(auth, hub);
            normalize_l2(hub);
            return;
        }
    }
    throw ConvergenceError("HITS did not converge in " + std::to_string(p.max_iter) + " iterations", residual);
}

// Brandes accumulation plus closeness from the same BFS sweeps.
inline void shortest_path_measures(const SubNetwork& g, std::vector<double>& betweenness, std::vector<double>& closeness) {
    const std::size_t n = g.size();
    betweenness.assign(n, 0.0);
    closeness.assign(n, 0.0);
    std::vector<std::int64_t> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<std::size_t> queue(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(sigma.begin(), sigma.end(), 0.0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        std::size_t head = 0, tail = 0;
        queue[tail++] = s;
        double total = 0.0;
        while (head < tail) {
            auto v = queue[head++];
            order.push_back(v);
            total += static_cast<double>(dist[v]);
            for (auto w : g.out(v)) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    queue[tail++] = w;
                }
                if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
            }
        }
        closeness[s] = order.size() > 1 ? static_cast<double>(order.size() - 1) / total : 0.0;
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            auto w = *it;
            for (auto v : g.in(w))
                if (dist[v] >= 0 && dist[v] + 1 == dist[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) betweenness[w] += delta[w];
        }
    }
}

} // namespace detail

/**
 * Degrees, PageRank, betweenness, closeness, hub and authority of every node.
 *
 * Betweenness is the raw (unnormalized) sum of shortest-path pair fractions on
 * the directed graph. Closeness uses out-distances: (reachable - 1) / sum of
 * distances, 0 when nothing is reachable. Throws ConvergenceError when PageRank
 * or HITS exceed `max_iter`.
 */
inline StructuralFeatures compute_centralities(const SubNetwork& g, const CentralityParams& p = {}) {
    detail::check_params(p);
    StructuralFeatures f;
    const std::size_t n = g.size();
    f.in_degree.resize(n);
    f.out_degree.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        f.in_degree[v] = static_cast<double>(g.in(v).size());
        f.out_degree[v] = static_cast<double>(g.out(v).size());
    }
    f.pagerank = detail::pagerank(g, p);
    detail::shortest_path_measures(g, f.betweenness, f.closeness);
    detail::hits(g, p, f.hub, f.authority);
    return f;
}

/// BFS hop distances from `source`; -1 marks unreachable nodes.
inline std::vector<std::int64_t> bfs_distances(const SubNetwork& g, std::size_t source) {
    std::vector<std::int64_t> dist(g.size(), -1);
    std::queue<std::size_t> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        auto v = q.front();
        q.pop();
        for (auto w : g.out(v))
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
    }
    return dist;
}

/// Hop distance from a seed set; all fields empty when no seed reaches the node.
struct SeedDistance {
    std::optional<double> min, avg, max;
};

/// Per-node min/avg/max directed hop distance over the seeds that reach it.
inline std::vector<SeedDistance> seed_distances(const SubNetwork& g, std::span<const std::string> seeds) {
    if (seeds.empty()) throw ConfigError("seed_distances needs at least one seed");
    std::vector<std::vector<std::int64_t>> per_seed;
    for (const auto& s : seeds) {
        auto v = g.find(s);
        if (!v) throw SchemaError("seed '" + s + "' is not in the sub-network");
        per_seed.push_back(bfs_distances(g, *v));
    }
    std::vector<SeedDistance> out(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
        std::size_t reached = 0;
        for (const auto& d : per_seed) {
            if (d[v] < 0) continue;
            const double x = static_cast<double>(d[v]);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            sum += x;
            ++reached;
        }
        if (reached) out[v] = {lo, sum / static_cast<double>(reached), hi};
    }
    return out;
}

} // namespace bookforge
