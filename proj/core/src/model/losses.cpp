#include "vadeers/model/losses.hpp"

#include <cmath>

#include "vadeers/error.hpp"

namespace vadeers::model {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double span_mse(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size() || a.empty()) {
        throw ContractError(std::string(what) + ": widths " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

struct DvaeParts {
    nn::Var loss;
    nn::Var mu;
    nn::Var z;
    LossBreakdown breakdown;
};

DvaeParts build_dvae(nn::Tape& tape, const Vadeers& model, const DrugBatch& batch, const LossWeights& weights,
                     Rng& rng) {
    const ModelConfig& cfg = model.config();
    batch.validate(cfg);
    const std::size_t rows = batch.rows();

    nn::Var x_s = tape.constant(batch.smiles);
    auto enc = model.encode(tape, x_s, rng);
    auto dec = model.decode(tape, enc.z);

    nn::Matrix ip_mask(rows, 1);
    std::size_t n_ip = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (batch.has_ip[r]) {
            ip_mask(r, 0) = 1.0;
            ++n_ip;
        }
    }

    nn::Var smiles_rows = nn::row_mse(dec.smiles, x_s);
    nn::Var ip_rows = nn::mul_constant(nn::row_mse(dec.ip, tape.constant(batch.ip)), ip_mask);
    nn::Var prior_rows = model.log_prior(tape, enc.z, batch.labels);
    const double entropy_const = 0.5 * static_cast<double>(cfg.latent_dim) * (1.0 + kLog2Pi);
    nn::Var entropy_rows = nn::add_scalar(nn::sum_rows(enc.log_sigma), entropy_const);

    nn::Var smiles_mean = nn::mean(smiles_rows);
    nn::Var ip_mean = nn::mean(ip_rows);
    nn::Var prior_mean = nn::mean(prior_rows);
    nn::Var entropy_mean = nn::mean(entropy_rows);

    nn::Var smiles_term = nn::scale(smiles_mean, weights.smiles);
    nn::Var ip_term = nn::scale(ip_mean, weights.ip);
    nn::Var prior_term = nn::scale(prior_mean, -weights.prior);
    nn::Var entropy_term = nn::scale(entropy_mean, -weights.entropy);
    nn::Var loss = nn::add(nn::add(smiles_term, ip_term), nn::add(prior_term, entropy_term));

    LossBreakdown b;
    b.smiles_mse = smiles_mean.value()(0, 0);
    b.ip_mse = n_ip == 0 ? 0.0 : ip_mean.value()(0, 0) * static_cast<double>(rows) / static_cast<double>(n_ip);
    b.log_prior = prior_mean.value()(0, 0);
    b.entropy = entropy_mean.value()(0, 0);
    b.smiles_term = smiles_term.value()(0, 0);
    b.ip_term = ip_term.value()(0, 0);
    b.prior_term = prior_term.value()(0, 0);
    b.entropy_term = entropy_term.value()(0, 0);
    b.dvae = loss.value()(0, 0);
    b.total = b.dvae;
    b.dspn_empty = true;
    return {loss, enc.mu, enc.z, b};
}

nn::Var dspn_term(nn::Tape& tape, const Vadeers& model, nn::Var drug_latent, nn::Var cell_latent,
                  std::span<const PairEntry> entries, const LossWeights& weights, nn::Mode mode, Rng& rng,
                  LossBreakdown& b) {
    std::vector<std::size_t> drug_rows;
    std::vector<std::size_t> cell_rows;
    std::vector<double> targets;
    for (const auto& e : entries) {
        if (!e.observed) continue;
        if (e.drug_row >= drug_latent.value().rows() || e.cell_row >= cell_latent.value().rows()) {
            throw IndexError("pair entry (" + std::to_string(e.drug_row) + ", " + std::to_string(e.cell_row) +
                             ") outside the batch");
        }
        drug_rows.push_back(e.drug_row);
        cell_rows.push_back(e.cell_row);
        targets.push_back(e.ic50);
    }
    b.observed_pairs = targets.size();
    b.dspn_empty = targets.empty();
    if (targets.empty()) {
        b.dspn_mse = 0.0;
        b.dspn_term = 0.0;
        return tape.constant(nn::Matrix(1, 1, 0.0));
    }
    nn::Var pred = model.dspn(tape, nn::gather_rows(drug_latent, drug_rows), nn::gather_rows(cell_latent, cell_rows),
                              mode, &rng);
    nn::Var err = nn::mse(pred, tape.constant(nn::Matrix::column_vector(targets)));
    nn::Var term = nn::scale(err, weights.dspn);
    b.dspn_mse = err.value()(0, 0);
    b.dspn_term = term.value()(0, 0);
    return term;
}

}  // namespace

void DrugBatch::validate(const ModelConfig& config) const {
    const std::size_t n = smiles.rows();
    if (n == 0) throw ContractError("DrugBatch: empty batch");
    if (smiles.cols() != config.smiles_dim) {
        throw ContractError("DrugBatch: smiles width " + std::to_string(smiles.cols()) + ", model expects " +
                            std::to_string(config.smiles_dim));
    }
    if (ip.rows() != n || ip.cols() != config.ip_dim) {
        throw ContractError("DrugBatch: ip block " + ip.shape_string() + ", expected " + std::to_string(n) + "x" +
                            std::to_string(config.ip_dim));
    }
    if (has_ip.size() != n || labels.size() != n) throw ContractError("DrugBatch: mask/label count mismatch");
}

double gaussian_entropy(std::span<const double> log_sigma) {
    double s = 0.5 * static_cast<double>(log_sigma.size()) * (1.0 + kLog2Pi);
    for (double v : log_sigma) s += v;
    return s;
}

LossBreakdown dvae_loss(std::span<const double> smiles, std::span<const double> smiles_recon,
                        std::optional<std::span<const double>> ip, std::span<const double> ip_pred,
                        std::span<const double> z, std::span<const double> log_sigma, gmm::GuidingLabel label,
                        const gmm::GmmParams& prior, const LossWeights& weights) {
    if (label && *label >= prior.components()) {
        throw IndexError("guiding label " + std::to_string(*label) + " out of range for K=" +
                         std::to_string(prior.components()));
    }
    if (z.size() != log_sigma.size()) throw ContractError("dvae_loss: z and log_sigma widths differ");
    LossBreakdown b;
    b.smiles_mse = span_mse(smiles, smiles_recon, "dvae_loss smiles");
    b.ip_mse = ip ? span_mse(*ip, ip_pred, "dvae_loss ip") : 0.0;
    b.log_prior = gmm::log_prior(z, label, prior);
    b.entropy = gaussian_entropy(log_sigma);
    b.smiles_term = weights.smiles * b.smiles_mse;
    b.ip_term = weights.ip * b.ip_mse;
    b.prior_term = -weights.prior * b.log_prior;
    b.entropy_term = -weights.entropy * b.entropy;
    b.dvae = b.smiles_term + b.ip_term + b.prior_term + b.entropy_term;
    b.total = b.dvae;
    b.dspn_empty = true;
    return b;
}

LossGraph dvae_loss_graph(nn::Tape& tape, const Vadeers& model, const DrugBatch& batch, const LossWeights& weights,
                          Rng& rng) {
    auto parts = build_dvae(tape, model, batch, weights, rng);
    return {parts.loss, parts.breakdown};
}

LossGraph total_loss_graph(nn::Tape& tape, const Vadeers& model, const PairBatch& batch, const LossWeights& weights,
                           nn::Mode mode, Rng& rng) {
    const ModelConfig& cfg = model.config();
    if (batch.cells.cols() != cfg.bio_dim || batch.cells.rows() == 0) {
        throw ContractError("PairBatch: cell block " + batch.cells.shape_string() + ", model expects width " +
                            std::to_string(cfg.bio_dim));
    }
    auto parts = build_dvae(tape, model, batch.drugs, weights, rng);
    LossBreakdown& b = parts.breakdown;

    nn::Var cells = tape.constant(batch.cells);
    nn::Var cell_latent = model.cae_encode(tape, cells);
    nn::Var cae_mse = nn::mse(model.cae_decode(tape, cell_latent), cells);
    nn::Var cae_term = nn::scale(cae_mse, weights.cae);
    b.cae_mse = cae_mse.value()(0, 0);
    b.cae_term = cae_term.value()(0, 0);

    nn::Var drug_latent = cfg.dspn_uses_mean ? parts.mu : parts.z;
    nn::Var dspn = dspn_term(tape, model, drug_latent, cell_latent, batch.entries, weights, mode, rng, b);

    nn::Var total = nn::add(nn::add(parts.loss, cae_term), dspn);
    b.total = total.value()(0, 0);
    return {total, b};
}

LossGraph dspn_loss_graph(nn::Tape& tape, const Vadeers& model, const nn::Matrix& drug_latents,
                          const nn::Matrix& cell_latents, std::span<const PairEntry> entries,
                          const LossWeights& weights, nn::Mode mode, Rng& rng) {
    LossBreakdown b;
    nn::Var term = dspn_term(tape, model, tape.constant(drug_latents), tape.constant(cell_latents), entries, weights,
                             mode, rng, b);
    b.total = term.value()(0, 0);
    return {term, b};
}

}  // namespace vadeers::model
