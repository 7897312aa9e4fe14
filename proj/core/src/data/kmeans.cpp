#include "vadeers/data/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "vadeers/error.hpp"

namespace vadeers::data {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Nearest centroid for every point; returns true if any label changed.
bool assign(const nn::Matrix& points, const nn::Matrix& centroids, std::vector<std::size_t>& labels) {
    bool changed = false;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centroids.rows(); ++k) {
            const double d = sq_dist(points.row(i), centroids.row(k));
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        if (labels[i] != best) {
            labels[i] = best;
            changed = true;
        }
    }
    return changed;
}

nn::Matrix seed_plus_plus(const nn::Matrix& points, std::size_t clusters, Rng& rng) {
    const std::size_t n = points.rows();
    nn::Matrix centroids(clusters, points.cols());
    std::vector<bool> taken(n, false);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t pick = first(rng);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < clusters; ++k) {
        if (k > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += d2[i];
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng);
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    if (d2[i] <= 0.0) continue;
                    target -= d2[i];
                    if (target < 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                // Every point coincides with a chosen centroid: take the first unused one.
                pick = static_cast<std::size_t>(std::find(taken.begin(), taken.end(), false) - taken.begin());
            }
        }
        taken[pick] = true;
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(k).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(k)));
    }
    return centroids;
}

/// Single-point moves that lower the inertia once both centroids follow the
/// point. Stops only where no such move exists, which a Lloyd fixed point need not be.
void hartigan(const nn::Matrix& points, KMeansResult& res, std::size_t max_passes) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t clusters = res.centroids.rows();
    nn::Matrix sums(clusters, d);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) sums(res.labels[i], c) += points(i, c);
        ++counts[res.labels[i]];
    }
    auto centroid = [&](std::size_t k) {
        std::vector<double> m(d);
        for (std::size_t c = 0; c < d; ++c) m[c] = sums(k, c) / static_cast<double>(counts[k]);
        return m;
    };
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = res.labels[i];
            if (counts[a] < 2) continue;
            const double na = static_cast<double>(counts[a]);
            const double remove = na / (na - 1.0) * sq_dist(points.row(i), centroid(a));
            std::size_t target = a;
            double best = remove * (1.0 - 1e-12);
            for (std::size_t b = 0; b < clusters; ++b) {
                if (b == a) continue;
                const double nb = static_cast<double>(counts[b]);
                const double add = counts[b] == 0 ? 0.0 : nb / (nb + 1.0) * sq_dist(points.row(i), centroid(b));
                if (add < best) {
                    best = add;
                    target = b;
                }
            }
            if (target == a) continue;
            for (std::size_t c = 0; c < d; ++c) {
                sums(a, c) -= points(i, c);
                sums(target, c) += points(i, c);
            }
            --counts[a];
            ++counts[target];
            res.labels[i] = target;
            moved = true;
        }
        if (!moved) break;
        for (std::size_t k = 0; k < clusters; ++k)
            if (counts[k] > 0) {
                const auto m = centroid(k);
                std::copy(m.begin(), m.end(), res.centroids.row(k).begin());
            }
        res.inertia_history.push_back(inertia(points, res.labels, res.centroids));
    }
}

KMeansResult lloyd(const nn::Matrix& points, std::size_t clusters, Rng& rng, std::size_t max_iters) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    KMeansResult res;
    res.centroids = seed_plus_plus(points, clusters, rng);
    res.labels.assign(n, std::numeric_limits<std::size_t>::max());
    assign(points, res.centroids, res.labels);
    res.inertia_history.push_back(inertia(points, res.labels, res.centroids));

    for (std::size_t it = 0; it < max_iters; ++it) {
        nn::Matrix sums(clusters, d);
        std::vector<std::size_t> counts(clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = points.row(i);
            auto acc = sums.row(res.labels[i]);
            for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
            ++counts[res.labels[i]];
        }
        for (std::size_t k = 0; k < clusters; ++k) {
            if (counts[k] == 0) continue;
            for (std::size_t c = 0; c < d; ++c) res.centroids(k, c) = sums(k, c) / static_cast<double>(counts[k]);
        }
        for (std::size_t k = 0; k < clusters; ++k) {
            if (counts[k] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dist = sq_dist(points.row(i), res.centroids.row(res.labels[i]));
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            if (far_d <= 0.0) continue;
            std::copy(points.row(far).begin(), points.row(far).end(), res.centroids.row(k).begin());
            --counts[res.labels[far]];
            res.labels[far] = k;
            counts[k] = 1;
        }
        const bool changed = assign(points, res.centroids, res.labels);
        const double in = inertia(points, res.labels, res.centroids);
        const double prev = res.inertia_history.back();
        if (in > prev * (1.0 + 1e-12) + 1e-12) {
            throw NumericError("kmeans: inertia rose from " + std::to_string(prev) + " to " + std::to_string(in));
        }
        res.inertia_history.push_back(in);
        res.iterations = it + 1;
        if (!changed) break;
    }

    hartigan(points, res, max_iters);

    // Final centroids are the means of the final assignment.
    nn::Matrix sums(clusters, d);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = points.row(i);
        auto acc = sums.row(res.labels[i]);
        for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
        ++counts[res.labels[i]];
    }
    for (std::size_t k = 0; k < clusters; ++k) {
        if (counts[k] == 0) {
            ++res.empty_clusters;
            continue;
        }
        for (std::size_t c = 0; c < d; ++c) res.centroids(k, c) = sums(k, c) / static_cast<double>(counts[k]);
    }
    res.inertia = inertia(points, res.labels, res.centroids);
    return res;
}

}  // namespace

double inertia(const nn::Matrix& points, const std::vector<std::size_t>& labels, const nn::Matrix& centroids) {
    if (labels.size() != points.rows()) throw ContractError("inertia: label count does not match points");
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        if (labels[i] >= centroids.rows()) throw IndexError("inertia: label " + std::to_string(labels[i]));
        s += sq_dist(points.row(i), centroids.row(labels[i]));
    }
    return s;
}

KMeansResult kmeans(const nn::Matrix& points, std::size_t clusters, std::uint64_t seed, const KMeansOptions& options) {
    if (clusters == 0 || points.rows() < clusters) {
        throw ContractError("kmeans: need n >= G >= 1, got n=" + std::to_string(points.rows()) +
                            " G=" + std::to_string(clusters));
    }
    if (points.cols() == 0) throw ContractError("kmeans: points have no columns");
    if (!points.all_finite()) throw DataError("kmeans: non-finite point");
    if (options.n_init == 0) throw ContractError("kmeans: n_init must be positive");
    Rng rng(seed);
    KMeansResult best;
    bool have = false;
    for (std::size_t run = 0; run < options.n_init; ++run) {
        KMeansResult r = lloyd(points, clusters, rng, options.max_iters);
        if (!have || r.inertia < best.inertia) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

nn::Matrix zscore_columns(const nn::Matrix& points) {
    nn::Matrix out = points;
    const std::size_t n = points.rows();
    if (n == 0) return out;
    for (std::size_t c = 0; c < points.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += points(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (points(r, c) - mean) * (points(r, c) - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        const double scale = sd > 0.0 ? sd : 1.0;
        for (std::size_t r = 0; r < n; ++r) out(r, c) = (points(r, c) - mean) / scale;
    }
    return out;
}

GuidingLabelReport derive_guiding_labels(Dataset& dataset, std::size_t clusters, std::uint64_t seed) {
    auto [profiles, rows] = dataset.profile_matrix();
    if (rows.size() < clusters) {
        throw DataError("derive_guiding_labels: " + std::to_string(rows.size()) + " profiled drugs, need at least " +
                        std::to_string(clusters));
    }
    GuidingLabelReport report;
    report.clustering = kmeans(zscore_columns(profiles), clusters, seed);
    report.labeled_drugs = rows;
    for (auto& d : dataset.drugs) d.guiding_label.reset();
    for (std::size_t r = 0; r < rows.size(); ++r) dataset.drugs[rows[r]].guiding_label = report.clustering.labels[r];
    report.occupied_clusters =
        std::set<std::size_t>(report.clustering.labels.begin(), report.clustering.labels.end()).size();
    if (report.occupied_clusters < clusters) {
        report.warnings.push_back("inhibition profiles fill only " + std::to_string(report.occupied_clusters) +
                                  " of " + std::to_string(clusters) + " clusters; unused labels stay empty");
        spdlog::warn("{}", report.warnings.back());
    }
    return report;
}

}  // namespace vadeers::data
