#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vadeers/gmm/prior.hpp"
#include "vadeers/model/config.hpp"
#include "vadeers/nn/mlp.hpp"

namespace vadeers::model {

/// Encoder output for one drug: Gaussian posterior parameters and a single
/// reparameterized sample z = mu + exp(log_sigma) * eps.
struct EncoderOutput {
    std::vector<double> mu;
    std::vector<double> log_sigma;
    std::vector<double> z_sample;
};

struct DecoderOutput {
    std::vector<double> smiles;
    std::vector<double> ip;
};

struct CaeOutput {
    std::vector<double> latent;
    double loss = 0.0;
};

/// The three-module network: drug VAE (encoder with mean/log-sigma heads,
/// SMILES-embedding decoder, inhibition-profile decoder) with its latent
/// prior, the cell-line autoencoder, and the sensitivity predictor.
class Vadeers {
public:
    struct EncoderVars {
        nn::Var mu;
        nn::Var log_sigma;
        nn::Var z;
    };
    struct DecoderVars {
        nn::Var smiles;
        nn::Var ip;
    };

    /// Fresh weights drawn from `seed`.
    static Vadeers create(const ModelConfig& config, std::uint64_t seed);
    /// Binds to existing parameters, validating every name and shape.
    static Vadeers bind(const ModelConfig& config, nn::ParamStore params);

    const ModelConfig& config() const noexcept { return config_; }
    const nn::ParamStore& params() const noexcept { return params_; }
    nn::ParamStore& params() noexcept { return params_; }

    std::vector<nn::ParamId> dvae_ids() const;
    /// Trainable mixture parameters (empty for the vanilla prior; no
    /// log-scales for the constrained one).
    std::vector<nn::ParamId> prior_ids() const;
    std::vector<nn::ParamId> cae_ids() const;
    std::vector<nn::ParamId> dspn_ids() const;
    std::vector<nn::ParamId> trainable_ids() const;

    /// The learned mixture, or nullopt for the vanilla prior.
    std::optional<gmm::GmmParams> gmm() const;
    /// The latent prior as a mixture (standard normal for vanilla).
    gmm::GmmParams prior() const;

    // Taped building blocks.
    EncoderVars encode(nn::Tape& tape, nn::Var smiles, Rng& rng) const;
    DecoderVars decode(nn::Tape& tape, nn::Var z) const;
    nn::Var cae_encode(nn::Tape& tape, nn::Var cells) const;
    nn::Var cae_decode(nn::Tape& tape, nn::Var latent) const;
    nn::Var dspn(nn::Tape& tape, nn::Var drug_latent, nn::Var cell_latent, nn::Mode mode, Rng* rng) const;
    /// Nx1 log p(z) under the semi-supervised prior.
    nn::Var log_prior(nn::Tape& tape, nn::Var z, std::span<const gmm::GuidingLabel> labels) const;

    // Single-row value API.
    EncoderOutput dvae_encode(std::span<const double> smiles, Rng& rng) const;
    DecoderOutput dvae_decode(std::span<const double> z) const;
    CaeOutput cae_forward_loss(std::span<const double> cell_features) const;
    double dspn_predict(std::span<const double> drug_mu, std::span<const double> cell_latent, nn::Mode mode,
                        Rng* rng) const;

    // Batched eval-mode helpers.
    nn::Matrix encode_means(const nn::Matrix& smiles) const;
    nn::Matrix decode_batch_ip(const nn::Matrix& z) const;
    nn::Matrix decode_batch_smiles(const nn::Matrix& z) const;
    nn::Matrix cell_latents(const nn::Matrix& cells) const;
    /// Eval-mode predictions for row-aligned drug means and cell latents (Nx1).
    nn::Matrix predict(const nn::Matrix& drug_mu, const nn::Matrix& cell_latent) const;

private:
    Vadeers() = default;
    void bind_modules();

    ModelConfig config_;
    nn::ParamStore params_;
    nn::Mlp encoder_trunk_;
    nn::Mlp mu_head_;
    nn::Mlp log_sigma_head_;
    nn::Mlp smiles_decoder_;
    nn::Mlp ip_decoder_;
    nn::Mlp cae_encoder_;
    nn::Mlp cae_decoder_;
    nn::Mlp dspn_;
};

}  // namespace vadeers::model
