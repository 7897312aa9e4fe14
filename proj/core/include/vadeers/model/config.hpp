#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vadeers::model {

enum class PriorVariant { vanilla, gmm_constrained, gmm_unconstrained };

std::string_view to_string(PriorVariant variant);
/// Throws ContractError for unknown names.
PriorVariant parse_prior_variant(std::string_view name);

/// Network shapes. Defaults are the full-size architecture; `desk()` is a
/// scaled-down variant for fast experiments on synthetic data.
struct ModelConfig {
    std::size_t smiles_dim = 300;
    std::size_t ip_dim = 294;
    std::size_t bio_dim = 241;
    std::size_t latent_dim = 10;
    /// Hidden widths of the drug and cell-line encoders.
    std::vector<std::size_t> encoder_dims{128, 64};
    /// Hidden widths of every decoder.
    std::vector<std::size_t> decoder_dims{64, 128};
    std::vector<std::size_t> dspn_dims{512, 256, 128};
    double dspn_dropout = 0.5;
    /// Number of leading DSPN hidden layers that get dropout.
    std::size_t dspn_dropout_layers = 2;
    /// Mixture components (K) and distinct guiding labels (G), G <= K.
    std::size_t components = 3;
    std::size_t guiding_labels = 3;
    PriorVariant prior = PriorVariant::gmm_constrained;
    /// DSPN consumes the encoder mean (true) or the sampled z (false).
    bool dspn_uses_mean = true;

    void validate() const;
    bool has_gmm() const noexcept { return prior != PriorVariant::vanilla; }

    static ModelConfig desk();

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Weights of the loss terms: SMILES reconstruction, inhibition-profile
/// prediction, prior log-likelihood, posterior entropy, cell-line
/// reconstruction, and sensitivity prediction.
struct LossWeights {
    double smiles = 1.0;
    double ip = 1.0;
    double prior = 1.0;
    double entropy = 1.0;
    double cae = 1.0;
    double dspn = 1.0;

    void validate() const;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

}  // namespace vadeers::model
