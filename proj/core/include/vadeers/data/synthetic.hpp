#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/data/dataset.hpp"
#include "vadeers/nn/matrix.hpp"

namespace vadeers::data {

/// Generator settings. Drugs carry a latent factor u = c_g + spread * d
/// (c_g a cluster center, d a standard normal deviation); the embedding is a
/// fixed linear map of u plus noise, the profile is the cluster's profile
/// center plus a linear map of d plus noise. Cells carry a factor v that
/// drives expression, mutation calls and nothing else. IC50 is a cluster
/// effect plus a drug effect plus the bilinear term u'Wv plus noise.
struct SyntheticSpec {
    std::size_t n_drugs = 120;
    std::size_t n_profiled = 60;
    std::size_t n_cells = 150;
    double observance = 0.7;

    std::size_t smiles_dim = 32;
    std::size_t ip_dim = 24;
    std::size_t n_expression = 14;
    std::size_t n_mutation = 3;
    std::size_t n_tissue = 3;

    std::size_t clusters = 3;
    std::size_t drug_factor_dim = 6;
    std::size_t cell_factor_dim = 6;

    double cluster_separation = 5.0;
    double within_cluster_spread = 1.0;
    double embedding_noise = 0.1;

    double ip_base = 60.0;
    double ip_center_spread = 20.0;
    double ip_within = 4.0;
    double ip_noise = 2.0;

    double expression_noise = 0.2;
    double mutation_noise = 0.3;

    double cluster_effect = 2.0;
    double drug_effect = 0.7;
    double interaction_scale = 1.0;
    double ic50_noise = 0.1;

    std::uint64_t seed = 0;

    std::size_t bio_dim() const noexcept { return n_expression + n_mutation + n_tissue; }
    /// ContractError on an invalid combination.
    void validate() const;

    /// Small dims for tests and desk-scale experiments.
    static SyntheticSpec desk();
    /// Shapes of the original screen: 304 drugs (117 profiled), 922 cells,
    /// 300/294/241 feature widths.
    static SyntheticSpec paper();

    bool operator==(const SyntheticSpec&) const = default;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

/// Generated dataset plus the hidden structure used to build it.
struct SyntheticData {
    Dataset dataset;
    SyntheticSpec spec;
    /// Cluster of every drug (profiled or not).
    std::vector<std::size_t> planted_labels;
    nn::Matrix drug_factors;  // n_drugs x drug_factor_dim
    nn::Matrix cell_factors;  // n_cells x cell_factor_dim
    nn::Matrix interaction;   // drug_factor_dim x cell_factor_dim
    std::vector<double> drug_offsets;
    std::vector<double> cluster_offsets;
    nn::Matrix ip_centers;  // clusters x ip_dim

    /// Noise-free IC50 of drug i against a cell factor vector.
    double ic50_mean(std::size_t drug, std::span<const double> cell_factor) const;
    Manifest manifest() const;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace vadeers::data
