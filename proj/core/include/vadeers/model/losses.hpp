#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vadeers/model/vadeers.hpp"

namespace vadeers::model {

/// Drug rows of a minibatch. Rows without a measured inhibition profile have
/// has_ip = false and their `ip` row is ignored.
struct DrugBatch {
    nn::Matrix smiles;
    nn::Matrix ip;
    std::vector<bool> has_ip;
    std::vector<gmm::GuidingLabel> labels;

    std::size_t rows() const noexcept { return smiles.rows(); }
    void validate(const ModelConfig& config) const;
};

/// One (drug row, cell row) sensitivity entry. Unobserved entries carry no loss.
struct PairEntry {
    std::size_t drug_row = 0;
    std::size_t cell_row = 0;
    double ic50 = 0.0;
    bool observed = true;
};

struct PairBatch {
    DrugBatch drugs;
    nn::Matrix cells;
    std::vector<PairEntry> entries;
};

/// Loss terms. Raw means plus their weighted contributions; the contributions
/// sum to `total`.
struct LossBreakdown {
    double smiles_mse = 0.0;  // mean over drug rows
    double ip_mse = 0.0;      // mean over rows that have a profile
    double log_prior = 0.0;   // mean over drug rows
    double entropy = 0.0;     // mean over drug rows
    double cae_mse = 0.0;
    double dspn_mse = 0.0;    // mean over observed entries

    double smiles_term = 0.0;
    double ip_term = 0.0;
    double prior_term = 0.0;
    double entropy_term = 0.0;
    double cae_term = 0.0;
    double dspn_term = 0.0;

    double dvae = 0.0;
    double total = 0.0;
    std::size_t observed_pairs = 0;
    /// No observed pairs: the DSPN term is zero.
    bool dspn_empty = false;

    double sum_of_terms() const noexcept {
        return smiles_term + ip_term + prior_term + entropy_term + cae_term + dspn_term;
    }
};

struct LossGraph {
    nn::Var total;
    LossBreakdown breakdown;
};

/// Analytical entropy of N(mu, diag(exp(2 log_sigma))): D/2 (1 + ln 2 pi) + sum log_sigma.
double gaussian_entropy(std::span<const double> log_sigma);

/// Per-compound DVAE loss evaluated from already-computed forward values:
/// r_S MSE(x_S, x_S') + r_I MSE(x_I, x_I') - r_P log p(z) - r_E H[q].
/// The profile term is skipped when `ip` is absent.
LossBreakdown dvae_loss(std::span<const double> smiles, std::span<const double> smiles_recon,
                        std::optional<std::span<const double>> ip, std::span<const double> ip_pred,
                        std::span<const double> z, std::span<const double> log_sigma, gmm::GuidingLabel label,
                        const gmm::GmmParams& prior, const LossWeights& weights);

/// Drug-VAE loss averaged over the batch rows (the break-phase objective).
LossGraph dvae_loss_graph(nn::Tape& tape, const Vadeers& model, const DrugBatch& batch, const LossWeights& weights,
                          Rng& rng);

/// Whole-model loss: DVAE + r_CAE * CAE + r_DSPN * masked DSPN MSE.
/// `mode` controls DSPN dropout.
LossGraph total_loss_graph(nn::Tape& tape, const Vadeers& model, const PairBatch& batch, const LossWeights& weights,
                           nn::Mode mode, Rng& rng);

/// DSPN-only loss on fixed latents (drug means and cell latents already
/// computed), used once the autoencoders are frozen.
LossGraph dspn_loss_graph(nn::Tape& tape, const Vadeers& model, const nn::Matrix& drug_latents,
                          const nn::Matrix& cell_latents, std::span<const PairEntry> entries,
                          const LossWeights& weights, nn::Mode mode, Rng& rng);

}  // namespace vadeers::model
