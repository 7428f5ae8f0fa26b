#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "egoflux/error.hpp"
#include "egoflux/features.hpp"
#include "egoflux/random.hpp"

namespace egoflux {

/// Dense symmetric distance matrix with zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, double value) {
        d_[i * n_ + j] = value;
        d_[j * n_ + i] = value;
    }

    // Row labels (post ids) in matrix order; may be empty for synthetic matrices.
    std::vector<std::string> ids;

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

/// d(i, j) = 1 - cos(v_i, v_j), clamped to [0, 2].
inline DistanceMatrix cosine_distance_matrix(const EmbeddingSet& emb, const std::vector<std::string>& ids) {
    std::vector<Eigen::VectorXd> unit;
    unit.reserve(ids.size());
    for (const auto& id : ids) {
        const auto& v = emb.at(id);
        Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        const double norm = e.norm();
        if (!(norm > 0.0)) throw InvalidArgument("zero-norm embedding for id '" + id + "'");
        unit.push_back(e / norm);
    }
    DistanceMatrix dm(ids.size());
    dm.ids = ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            dm.set(i, j, std::clamp(1.0 - unit[i].dot(unit[j]), 0.0, 2.0));
        }
    }
    return dm;
}

struct Clustering {
    std::size_t k = 0;
    std::vector<std::size_t> medoids;     // row index of each cluster's medoid
    std::vector<std::size_t> assignment;  // row -> cluster index
    double total_cost = 0.0;
    int swap_iterations = 0;
    std::vector<double> cost_trace;  // total cost after BUILD and after every applied swap

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (auto c : assignment) ++sizes[c];
        return sizes;
    }
};

/// Nearest-medoid assignment (ties to the lowest cluster index; every medoid is
/// pinned to its own cluster) and the resulting total cost.
inline void assign_to_medoids(const DistanceMatrix& dm, Clustering& c) {
    const std::size_t n = dm.size();
    c.k = c.medoids.size();
    c.assignment.assign(n, 0);
    c.total_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < c.k; ++m) {
            if (c.medoids[m] == i) {
                best = m;
                best_d = 0.0;
                break;
            }
            const double d = dm(i, c.medoids[m]);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        c.assignment[i] = best;
        c.total_cost += best_d;
    }
}

inline double medoid_set_cost(const DistanceMatrix& dm, const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < dm.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) best = std::min(best, dm(i, m));
        cost += best;
    }
    return cost;
}

/// Partitioning Around Medoids: greedy BUILD followed by best-improvement SWAP
/// until no single (medoid, non-medoid) exchange lowers the total cost. The seed
/// only orders candidates whose costs tie exactly. Medoids are reported in
/// ascending row order, which fixes the cluster numbering.
inline Clustering kmedoids(const DistanceMatrix& dm, std::size_t k, std::uint64_t seed = 42) {
    const std::size_t n = dm.size();
    if (k < 2 || k >= n) {
        throw InvalidArgument("kmedoids: k must satisfy 2 <= k < n (k=" + std::to_string(k) +
                              ", n=" + std::to_string(n) + ")");
    }
    // Seeded tie-break priority: lower value wins among exactly equal costs.
    std::vector<std::size_t> priority(n);
    std::iota(priority.begin(), priority.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(priority);
    const auto better = [&](double cost, std::size_t cand, double best_cost, std::size_t best) {
        return cost < best_cost || (cost == best_cost && priority[cand] < priority[best]);
    };

    std::vector<char> is_medoid(n, 0);
    std::vector<std::size_t> medoids;
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    // BUILD
    {
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += dm(c, j);
            if (best == n || better(s, c, best_cost, best)) {
                best = c;
                best_cost = s;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = dm(best, j);
    }
    while (medoids.size() < k) {
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += std::min(nearest[j], dm(c, j));
            if (best == n || better(s, c, best_cost, best)) {
                best = c;
                best_cost = s;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dm(best, j));
    }

    Clustering out;
    out.cost_trace.push_back(medoid_set_cost(dm, medoids));

    // SWAP: evaluate every exchange through nearest / second-nearest distances.
    double current = out.cost_trace.back();
    for (;;) {
        std::vector<double> d1(n), d2(n);
        std::vector<std::size_t> near_slot(n);
        for (std::size_t j = 0; j < n; ++j) {
            double a = std::numeric_limits<double>::infinity(), b = a;
            std::size_t slot = 0;
            for (std::size_t m = 0; m < medoids.size(); ++m) {
                const double d = dm(j, medoids[m]);
                if (d < a) {
                    b = a;
                    a = d;
                    slot = m;
                } else if (d < b) {
                    b = d;
                }
            }
            d1[j] = a;
            d2[j] = b;
            near_slot[j] = slot;
        }
        double best_delta = 0.0;
        std::size_t best_slot = 0, best_h = n;
        for (std::size_t h = 0; h < n; ++h) {
            if (is_medoid[h]) continue;
            for (std::size_t m = 0; m < medoids.size(); ++m) {
                double delta = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double dh = dm(j, h);
                    if (near_slot[j] == m) {
                        delta += std::min(dh, d2[j]) - d1[j];
                    } else if (dh < d1[j]) {
                        delta += dh - d1[j];
                    }
                }
                const bool take =
                    delta < best_delta ||
                    (best_h != n && delta == best_delta &&
                     std::pair(priority[h], priority[medoids[m]]) <
                         std::pair(priority[best_h], priority[medoids[best_slot]]));
                if (take) {
                    best_delta = delta;
                    best_slot = m;
                    best_h = h;
                }
            }
        }
        if (best_h == n) break;
        std::vector<std::size_t> candidate = medoids;
        candidate[best_slot] = best_h;
        const double cost = medoid_set_cost(dm, candidate);
        // The incremental delta can report a gain that is only rounding noise.
        if (!(cost < current)) break;
        is_medoid[medoids[best_slot]] = 0;
        is_medoid[best_h] = 1;
        medoids = std::move(candidate);
        current = cost;
        out.cost_trace.push_back(cost);
        ++out.swap_iterations;
    }

    std::sort(medoids.begin(), medoids.end());
    out.medoids = medoids;
    assign_to_medoids(dm, out);
    return out;
}

/// Mean silhouette width. Singleton members score 0, and a point with
/// a = b = 0 scores 0.
inline double silhouette(const DistanceMatrix& dm, const Clustering& c) {
    if (c.k < 2) throw InvalidArgument("silhouette: requires at least two clusters");
    const std::size_t n = dm.size();
    if (c.assignment.size() != n) throw InvalidArgument("silhouette: assignment size mismatch");
    const auto sizes = c.cluster_sizes();
    for (auto s : sizes) {
        if (s == 0) throw InvalidArgument("silhouette: empty cluster");
    }
    double total = 0.0;
    std::vector<double> sums(c.k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[c.assignment[j]] += dm(i, j);
        }
        const std::size_t own = c.assignment[i];
        if (sizes[own] == 1) continue;
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < c.k; ++q) {
            if (q != own) b = std::min(b, sums[q] / static_cast<double>(sizes[q]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

struct KSelection {
    std::size_t k = 0;
    Clustering clustering;
    std::map<std::size_t, double> scores;  // k -> silhouette
};

/// Runs PAM for each k in [k_min, k_max] and keeps the highest silhouette
/// (ties go to the smaller k).
inline KSelection select_k(const DistanceMatrix& dm, std::size_t k_min, std::size_t k_max, std::uint64_t seed = 42) {
    if (k_min > k_max) throw InvalidArgument("select_k: empty k range");
    if (k_min < 2 || k_max + 1 > dm.size()) throw InvalidArgument("select_k: k range must lie within [2, n-1]");
    KSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = k_min; k <= k_max; ++k) {
        Clustering c = kmedoids(dm, k, seed);
        const double s = silhouette(dm, c);
        sel.scores[k] = s;
        if (s > best) {
            best = s;
            sel.k = k;
            sel.clustering = std::move(c);
        }
    }
    return sel;
}

/// Samples `sample_size` rows uniformly (seeded), runs PAM on the sample, then
/// assigns every row to its nearest sampled medoid. Returned medoids index `ids`.
struct SampledClustering {
    Clustering clustering;               // over all ids
    std::vector<std::size_t> sample;     // indices into ids, ascending
    DistanceMatrix sample_distances;
    Clustering sample_clustering;
};

inline SampledClustering kmedoids_sampled(const EmbeddingSet& emb, const std::vector<std::string>& ids, std::size_t k,
                                          std::size_t sample_size, std::uint64_t seed = 42) {
    if (sample_size >= ids.size()) sample_size = ids.size();
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed ^ 0x5eed5a3c1e5ULL);
    rng.shuffle(order);
    order.resize(sample_size);
    std::sort(order.begin(), order.end());

    SampledClustering out;
    out.sample = order;
    std::vector<std::string> sample_ids;
    for (auto i : order) sample_ids.push_back(ids[i]);
    out.sample_distances = cosine_distance_matrix(emb, sample_ids);
    out.sample_clustering = kmedoids(out.sample_distances, k, seed);

    Clustering& full = out.clustering;
    full.k = k;
    for (auto m : out.sample_clustering.medoids) full.medoids.push_back(order[m]);
    full.assignment.assign(ids.size(), 0);
    full.total_cost = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& v = emb.at(ids[i]);
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < k; ++m) {
            const double d = full.medoids[m] == i ? 0.0
                                                  : std::clamp(1.0 - cosine_similarity(v, emb.at(ids[full.medoids[m]])),
                                                               0.0, 2.0);
            if (d < best_d) {
                best_d = d;
                full.assignment[i] = m;
            }
            if (full.medoids[m] == i) break;
        }
        full.total_cost += best_d;
    }
    full.cost_trace = out.sample_clustering.cost_trace;
    full.swap_iterations = out.sample_clustering.swap_iterations;
    return out;
}

struct TopicSummary {
    std::size_t topic = 0;
    std::string label;
    std::vector<std::pair<std::string, double>> top_words;  // descending score
};

/// Per cluster, the mean TF-IDF vector of its member documents and its
/// `top_n` highest-scoring tokens (ties broken by token). `docs` is aligned
/// with the clustering rows.
inline std::vector<TopicSummary> summarize_topics(const Clustering& c, const TfidfModel& tfidf,
                                                  const std::vector<TokenDoc>& docs, std::size_t top_n = 50) {
    if (docs.size() != c.assignment.size()) throw InvalidArgument("summarize_topics: docs and clustering misaligned");
    const auto tokens = tfidf.tokens_by_column();
    std::vector<std::vector<double>> sums(c.k, std::vector<double>(tfidf.dim(), 0.0));
    std::vector<std::size_t> members(c.k, 0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto v = transform_tfidf(tfidf, docs[i]);
        auto& acc = sums[c.assignment[i]];
        for (std::size_t t = 0; t < v.indices.size(); ++t) acc[v.indices[t]] += v.values[t];
        ++members[c.assignment[i]];
    }
    std::vector<TopicSummary> out;
    for (std::size_t q = 0; q < c.k; ++q) {
        TopicSummary s;
        s.topic = q;
        s.label = "topic_" + std::to_string(q);
        std::vector<std::pair<std::string, double>> scored;
        for (std::size_t j = 0; j < tfidf.dim(); ++j) {
            if (sums[q][j] > 0.0) scored.emplace_back(tokens[j], sums[q][j] / static_cast<double>(members[q]));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (scored.size() > top_n) scored.resize(top_n);
        s.top_words = std::move(scored);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace egoflux
