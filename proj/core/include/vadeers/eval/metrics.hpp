#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vadeers/nn/matrix.hpp"

namespace vadeers::eval {

/// Root mean squared error. Equal, non-zero lengths.
double rmse(std::span<const double> y_true, std::span<const double> y_pred);

/// Pearson correlation. ContractError when either input is constant (the
/// correlation is undefined) or lengths differ / are below 2.
double pearson(std::span<const double> a, std::span<const double> b);

/// Mean silhouette with Euclidean distances. Points in singleton clusters
/// score 0. ContractError when fewer than two distinct labels are present.
double silhouette(const nn::Matrix& points, std::span<const std::size_t> labels);

struct Pca2 {
    nn::Matrix projection;               // n x 2
    nn::Matrix components;               // 2 x d, unit rows
    std::array<double, 2> explained{};   // covariance eigenvalues (n - 1 normalization)
    std::array<double, 2> ratio{};       // share of total variance
};

/// Projection onto the top two principal axes of the centred data. Each
/// axis is oriented so its largest-magnitude loading is positive. Requires
/// n >= 3 and d >= 2.
Pca2 pca2(const nn::Matrix& points);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues descending; eigenvectors are the columns of `vectors`.
struct SymmetricEigen {
    std::vector<double> values;
    nn::Matrix vectors;
};
SymmetricEigen symmetric_eigen(const nn::Matrix& symmetric);

struct ClusterSummary {
    std::size_t count = 0;
    std::vector<double> centroid;
    /// Population STD per feature; absent for single-row clusters.
    std::optional<std::vector<double>> std;
};

/// Per-label centroid and STD. Labels must be < `clusters`; labels without
/// rows are simply absent from the result.
std::map<std::size_t, ClusterSummary> cluster_stats(const nn::Matrix& rows, std::span<const std::size_t> labels,
                                                    std::size_t clusters);

struct FidelityPair {
    std::size_t component = 0;
    std::optional<std::size_t> label;  // nullopt: unmatched
    double centroid_rmse = 0.0;
    double centroid_pearson = 0.0;
    /// NaN when either side has fewer than two rows or a constant STD vector.
    double std_rmse = 0.0;
    double std_pearson = 0.0;
    /// Mean of the generated feature-wise STD vector (NaN for single rows).
    double generated_std_mean = 0.0;
};

struct Fidelity {
    std::vector<FidelityPair> pairs;
    double centroid_rmse = 0.0;
    double centroid_pearson = 0.0;
    double std_rmse = 0.0;
    double std_pearson = 0.0;
    double generated_std_mean = 0.0;
    std::vector<std::size_t> missing;  // components without a matched label
};

/// Compares generated clusters with true clusters feature by feature.
/// `matching[k]` names the true label of component k; components beyond the
/// supplied matching (or all of them, when it is empty) are matched to the
/// nearest true centroid. Unmatched components are listed in `missing` and
/// excluded from the averages.
Fidelity generation_fidelity(const nn::Matrix& true_rows, std::span<const std::size_t> true_labels,
                             const nn::Matrix& generated_rows, std::span<const std::size_t> components,
                             std::span<const std::optional<std::size_t>> matching = {});

/// Index of the nearest row of `centroids` for every row of `points`.
std::vector<std::size_t> nearest_centroid(const nn::Matrix& points, const nn::Matrix& centroids);

}  // namespace vadeers::eval
