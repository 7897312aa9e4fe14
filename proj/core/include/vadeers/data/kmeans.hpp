#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vadeers/data/dataset.hpp"
#include "vadeers/nn/matrix.hpp"

namespace vadeers::data {

struct KMeansOptions {
    std::size_t max_iters = 300;
    /// Independent k-means++ restarts; the lowest-inertia run wins.
    std::size_t n_init = 50;
};

struct KMeansResult {
    std::vector<std::size_t> labels;
    nn::Matrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    /// Inertia after every assignment step of the winning run.
    std::vector<double> inertia_history;
    /// Clusters that ended with no members (only possible with duplicate points).
    std::size_t empty_clusters = 0;
};

/// Lloyd's algorithm with k-means++ seeding. A cluster that empties is
/// re-seeded at the point farthest from its current centroid. Ties go to the
/// lowest centroid index. Requires n >= G >= 1.
KMeansResult kmeans(const nn::Matrix& points, std::size_t clusters, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Sum of squared distances from each point to its assigned centroid.
double inertia(const nn::Matrix& points, const std::vector<std::size_t>& labels, const nn::Matrix& centroids);

/// Column z-scores (zero-variance columns only centred).
nn::Matrix zscore_columns(const nn::Matrix& points);

struct GuidingLabelReport {
    KMeansResult clustering;
    /// Drug indices that received a label, in drug order.
    std::vector<std::size_t> labeled_drugs;
    std::size_t occupied_clusters = 0;
    std::vector<std::string> warnings;
};

/// Clusters the z-scored inhibition profiles into G groups and writes the
/// cluster index as guiding label of every profiled drug; other drugs are
/// left unlabeled. Fewer profiled drugs than G is a DataError. Degenerate
/// profiles that cannot fill G clusters keep the labels k-means produced and
/// add a warning.
GuidingLabelReport derive_guiding_labels(Dataset& dataset, std::size_t clusters, std::uint64_t seed);

}  // namespace vadeers::data
