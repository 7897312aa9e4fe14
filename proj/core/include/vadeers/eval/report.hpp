#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/data/scaler.hpp"
#include "vadeers/eval/metrics.hpp"
#include "vadeers/model/vadeers.hpp"
#include "vadeers/train/split.hpp"

namespace vadeers::eval {

struct ClusterReport {
    std::size_t component = 0;
    std::optional<std::size_t> label;
    double centroid_rmse = 0.0;
    double centroid_pearson = 0.0;
    double std_rmse = 0.0;
    double std_pearson = 0.0;
    double generated_std_mean = 0.0;

    bool operator==(const ClusterReport&) const;
};

/// Every metric of one evaluated run. Generation metrics are absent for the
/// vanilla prior. IC50 and profile errors are on the natural data scale.
struct MetricReport {
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t n_test_pairs = 0;

    double ic50_rmse = 0.0;
    double ic50_pearson = 0.0;
    double ip_rmse = 0.0;
    std::optional<double> silhouette_latent;

    std::optional<double> silhouette_generated;
    std::optional<double> centroid_rmse;
    std::optional<double> centroid_pearson;
    std::optional<double> std_rmse;
    std::optional<double> std_pearson;
    /// Mean generated within-cluster STD (natural scale).
    std::optional<double> generated_std_mean;
    /// Share of generated profiles whose nearest true cluster centroid is the
    /// cluster matched to their component.
    std::optional<double> nearest_centroid_accuracy;
    std::vector<ClusterReport> per_cluster;

    bool operator==(const MetricReport&) const;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

struct EvaluateOptions {
    std::size_t n_per_component = 300;
    std::uint64_t seed = 0;
};

/// Everything `evaluate` computed, including plot data.
struct Evaluation {
    MetricReport report;
    /// Encoder means of labeled drugs and their guiding labels.
    nn::Matrix latent_means;
    std::vector<std::size_t> latent_labels;
    /// Generated profiles (natural scale) and their source components.
    nn::Matrix generated_ip;
    std::vector<std::size_t> generated_components;
};

/// Runs the full metric battery: IC50 on test pairs, profile reconstruction
/// on profiled drugs (decoded from encoder means), latent silhouette with
/// guiding labels, and component-conditioned generation. DataError when the
/// split has no test pairs.
Evaluation evaluate(const model::Vadeers& model, const train::TrainingData& data, const data::Scaler& scaler,
                    const EvaluateOptions& options = {});

/// Decoded profiles of `n` draws from component k, standardized scale.
nn::Matrix generate_ip(const model::Vadeers& model, std::size_t component, std::size_t n, Rng& rng);

}  // namespace vadeers::eval
