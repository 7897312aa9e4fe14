#include "vadeers/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "vadeers/error.hpp"

namespace vadeers::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Mean of the finite entries, NaN if none.
double finite_mean(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    }
    return n == 0 ? kNaN : s / static_cast<double>(n);
}

std::size_t label_count(std::span<const std::size_t> labels) {
    std::size_t m = 0;
    for (std::size_t l : labels) m = std::max(m, l + 1);
    return m;
}

}  // namespace

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty()) {
        throw ContractError("rmse: lengths " + std::to_string(y_true.size()) + " and " +
                            std::to_string(y_pred.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) s += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    return std::sqrt(s / static_cast<double>(y_true.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ContractError("pearson: need two equal-length inputs of length >= 2, got " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
    }
    if (is_constant(a) || is_constant(b)) throw ContractError("pearson: constant input, correlation undefined");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw ContractError("pearson: zero variance, correlation undefined");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double silhouette(const nn::Matrix& points, std::span<const std::size_t> labels) {
    const std::size_t n = points.rows();
    if (labels.size() != n) throw ContractError("silhouette: label count does not match points");
    const std::set<std::size_t> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw ContractError("silhouette: need at least two distinct labels");
    const std::size_t k = *distinct.rbegin() + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : labels) ++sizes[l];

    std::vector<double> sums(k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[labels[j]] += distance(points.row(i), points.row(j));
        }
        const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == labels[i] || sizes[c] == 0) continue;
            b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

SymmetricEigen symmetric_eigen(const nn::Matrix& sym) {
    const std::size_t d = sym.rows();
    if (sym.cols() != d) throw ContractError("symmetric_eigen: matrix " + sym.shape_string() + " is not square");
    nn::Matrix a = sym;
    nn::Matrix v(d, d);
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

    double scale = 0.0;
    for (double x : a.data()) scale = std::max(scale, std::abs(x));
    const double tol = std::numeric_limits<double>::epsilon() * (scale > 0.0 ? scale : 1.0);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) off = std::max(off, std::abs(a(p, q)));
        }
        if (off <= tol) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol * 1e-3) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    SymmetricEigen out;
    out.vectors = nn::Matrix(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        out.values.push_back(a(order[j], order[j]));
        for (std::size_t i = 0; i < d; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

Pca2 pca2(const nn::Matrix& points) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (d < 2) throw ContractError("pca2: need at least 2 columns, got " + std::to_string(d));
    if (n < 3) throw ContractError("pca2: need at least 3 rows, got " + std::to_string(n));

    nn::Matrix centered = points;
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < n; ++r) m += points(r, c);
        m /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) centered(r, c) -= m;
    }
    nn::Matrix cov = nn::matmul(nn::transpose(centered), centered);
    for (double& x : cov.data()) x /= static_cast<double>(n - 1);
    // Exact symmetry keeps the rotations stable.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) cov(j, i) = cov(i, j);
    }
    const SymmetricEigen eig = symmetric_eigen(cov);

    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);

    Pca2 out;
    out.components = nn::Matrix(2, d);
    for (std::size_t k = 0; k < 2; ++k) {
        std::size_t big = 0;
        for (std::size_t i = 1; i < d; ++i) {
            if (std::abs(eig.vectors(i, k)) > std::abs(eig.vectors(big, k))) big = i;
        }
        const double sign = eig.vectors(big, k) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) out.components(k, i) = sign * eig.vectors(i, k);
        out.explained[k] = std::max(0.0, eig.values[k]);
        out.ratio[k] = trace > 0.0 ? out.explained[k] / trace : 0.0;
    }
    out.projection = nn::matmul(centered, nn::transpose(out.components));
    return out;
}

std::map<std::size_t, ClusterSummary> cluster_stats(const nn::Matrix& rows, std::span<const std::size_t> labels,
                                                    std::size_t clusters) {
    if (labels.size() != rows.rows()) throw ContractError("cluster_stats: label count does not match rows");
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= clusters) {
            throw IndexError("cluster_stats: label " + std::to_string(labels[i]) + " outside 0.." +
                             std::to_string(clusters - 1));
        }
        members[labels[i]].push_back(i);
    }
    std::map<std::size_t, ClusterSummary> out;
    const std::size_t d = rows.cols();
    for (const auto& [label, idx] : members) {
        ClusterSummary s;
        s.count = idx.size();
        s.centroid.assign(d, 0.0);
        for (std::size_t i : idx) {
            for (std::size_t c = 0; c < d; ++c) s.centroid[c] += rows(i, c);
        }
        for (double& x : s.centroid) x /= static_cast<double>(idx.size());
        if (idx.size() >= 2) {
            std::vector<double> sd(d, 0.0);
            for (std::size_t i : idx) {
                for (std::size_t c = 0; c < d; ++c) sd[c] += (rows(i, c) - s.centroid[c]) * (rows(i, c) - s.centroid[c]);
            }
            for (double& x : sd) x = std::sqrt(x / static_cast<double>(idx.size()));
            s.std = std::move(sd);
        }
        out.emplace(label, std::move(s));
    }
    return out;
}

std::vector<std::size_t> nearest_centroid(const nn::Matrix& points, const nn::Matrix& centroids) {
    if (points.cols() != centroids.cols() || centroids.rows() == 0) {
        throw ContractError("nearest_centroid: points " + points.shape_string() + ", centroids " +
                            centroids.shape_string());
    }
    std::vector<std::size_t> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centroids.rows(); ++k) {
            const double dd = distance(points.row(i), centroids.row(k));
            if (dd < best) {
                best = dd;
                out[i] = k;
            }
        }
    }
    return out;
}

Fidelity generation_fidelity(const nn::Matrix& true_rows, std::span<const std::size_t> true_labels,
                             const nn::Matrix& generated_rows, std::span<const std::size_t> components,
                             std::span<const std::optional<std::size_t>> matching) {
    if (true_rows.cols() != generated_rows.cols()) {
        throw ContractError("generation_fidelity: true rows " + true_rows.shape_string() + ", generated " +
                            generated_rows.shape_string());
    }
    const auto truth = cluster_stats(true_rows, true_labels, label_count(true_labels));
    const auto gen = cluster_stats(generated_rows, components, label_count(components));
    if (truth.empty()) throw ContractError("generation_fidelity: no true clusters");

    nn::Matrix true_centroids(truth.size(), true_rows.cols());
    std::vector<std::size_t> true_ids;
    for (const auto& [label, s] : truth) {
        std::copy(s.centroid.begin(), s.centroid.end(), true_centroids.row(true_ids.size()).begin());
        true_ids.push_back(label);
    }

    Fidelity f;
    std::vector<double> c_rmse, c_pear, s_rmse, s_pear, g_std;
    for (const auto& [k, g] : gen) {
        FidelityPair p;
        p.component = k;
        if (k < matching.size()) {
            p.label = matching[k];
            if (p.label && !truth.count(*p.label)) p.label.reset();
        } else {
            const nn::Matrix c = nn::Matrix::row_vector(g.centroid);
            p.label = true_ids[nearest_centroid(c, true_centroids)[0]];
        }
        p.generated_std_mean = g.std ? mean_of(*g.std) : kNaN;
        if (!p.label) {
            p.centroid_rmse = p.centroid_pearson = p.std_rmse = p.std_pearson = kNaN;
            f.missing.push_back(k);
            f.pairs.push_back(p);
            continue;
        }
        const ClusterSummary& t = truth.at(*p.label);
        p.centroid_rmse = rmse(t.centroid, g.centroid);
        p.centroid_pearson =
            (is_constant(t.centroid) || is_constant(g.centroid)) ? kNaN : pearson(t.centroid, g.centroid);
        if (t.std && g.std) {
            p.std_rmse = rmse(*t.std, *g.std);
            p.std_pearson = (is_constant(*t.std) || is_constant(*g.std)) ? kNaN : pearson(*t.std, *g.std);
        } else {
            p.std_rmse = p.std_pearson = kNaN;
        }
        c_rmse.push_back(p.centroid_rmse);
        c_pear.push_back(p.centroid_pearson);
        s_rmse.push_back(p.std_rmse);
        s_pear.push_back(p.std_pearson);
        g_std.push_back(p.generated_std_mean);
        f.pairs.push_back(p);
    }
    f.centroid_rmse = finite_mean(c_rmse);
    f.centroid_pearson = finite_mean(c_pear);
    f.std_rmse = finite_mean(s_rmse);
    f.std_pearson = finite_mean(s_pear);
    f.generated_std_mean = finite_mean(g_std);
    return f;
}

}  // namespace vadeers::eval
