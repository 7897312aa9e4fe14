#include "vadeers/model/vadeers.hpp"

#include "vadeers/error.hpp"

namespace vadeers::model {
namespace {

using nn::Activation;
using nn::LayerSpec;
using nn::make_stack;

std::vector<std::size_t> init_of(const std::vector<std::size_t>& v) { return {v.begin(), v.end() - 1}; }

struct Layout {
    std::vector<LayerSpec> encoder_trunk, mu_head, log_sigma_head, smiles_decoder, ip_decoder, cae_encoder,
        cae_decoder, dspn;
};

Layout layout_for(const ModelConfig& c) {
    Layout l;
    const std::size_t trunk_out = c.encoder_dims.back();
    l.encoder_trunk = make_stack(c.smiles_dim, init_of(c.encoder_dims), trunk_out, Activation::relu);
    l.mu_head = {{trunk_out, c.latent_dim, Activation::identity, 0.0}};
    l.log_sigma_head = {{trunk_out, c.latent_dim, Activation::identity, 0.0}};
    l.smiles_decoder = make_stack(c.latent_dim, c.decoder_dims, c.smiles_dim);
    l.ip_decoder = make_stack(c.latent_dim, c.decoder_dims, c.ip_dim);
    l.cae_encoder = make_stack(c.bio_dim, c.encoder_dims, c.latent_dim);
    l.cae_decoder = make_stack(c.latent_dim, c.decoder_dims, c.bio_dim);
    l.dspn = make_stack(2 * c.latent_dim, c.dspn_dims, 1, Activation::identity, c.dspn_dropout,
                        c.dspn_dropout_layers);
    return l;
}

void require_width(std::span<const double> v, std::size_t expected, const char* what) {
    if (v.size() != expected) {
        throw ContractError(std::string(what) + ": got " + std::to_string(v.size()) + " values, expected " +
                            std::to_string(expected));
    }
}

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

nn::Matrix standard_normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    nn::Matrix eps(rows, cols);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : eps.data()) v = normal(rng);
    return eps;
}

}  // namespace

Vadeers Vadeers::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Vadeers m;
    m.config_ = config;
    Rng init(seed);
    const Layout l = layout_for(config);
    nn::Mlp::create(m.params_, "dvae.encoder", l.encoder_trunk, init);
    nn::Mlp::create(m.params_, "dvae.mu", l.mu_head, init);
    nn::Mlp::create(m.params_, "dvae.log_sigma", l.log_sigma_head, init);
    nn::Mlp::create(m.params_, "dvae.smiles_decoder", l.smiles_decoder, init);
    nn::Mlp::create(m.params_, "dvae.ip_decoder", l.ip_decoder, init);
    nn::Mlp::create(m.params_, "cae.encoder", l.cae_encoder, init);
    nn::Mlp::create(m.params_, "cae.decoder", l.cae_decoder, init);
    nn::Mlp::create(m.params_, "dspn", l.dspn, init);
    if (config.has_gmm()) {
        auto g = gmm::GmmParams::initialize(config.components, config.latent_dim,
                                            config.prior == PriorVariant::gmm_constrained, init);
        m.params_.add("gmm.logits", std::move(g.mixture_logits));
        m.params_.add("gmm.means", std::move(g.means));
        m.params_.add("gmm.log_scales", std::move(g.log_scales));
    }
    m.bind_modules();
    return m;
}

Vadeers Vadeers::bind(const ModelConfig& config, nn::ParamStore params) {
    config.validate();
    Vadeers m;
    m.config_ = config;
    m.params_ = std::move(params);
    m.bind_modules();
    return m;
}

void Vadeers::bind_modules() {
    const Layout l = layout_for(config_);
    encoder_trunk_ = nn::Mlp::bind(params_, "dvae.encoder", l.encoder_trunk);
    mu_head_ = nn::Mlp::bind(params_, "dvae.mu", l.mu_head);
    log_sigma_head_ = nn::Mlp::bind(params_, "dvae.log_sigma", l.log_sigma_head);
    smiles_decoder_ = nn::Mlp::bind(params_, "dvae.smiles_decoder", l.smiles_decoder);
    ip_decoder_ = nn::Mlp::bind(params_, "dvae.ip_decoder", l.ip_decoder);
    cae_encoder_ = nn::Mlp::bind(params_, "cae.encoder", l.cae_encoder);
    cae_decoder_ = nn::Mlp::bind(params_, "cae.decoder", l.cae_decoder);
    dspn_ = nn::Mlp::bind(params_, "dspn", l.dspn);

    const auto gmm_ids = params_.with_prefix("gmm.");
    if (!config_.has_gmm()) {
        if (!gmm_ids.empty()) throw DataError("vanilla prior must not carry mixture parameters");
    } else {
        for (const char* name : {"gmm.logits", "gmm.means", "gmm.log_scales"}) {
            if (!params_.find(name)) throw DataError(std::string("missing mixture parameter '") + name + "'");
        }
        const auto p = gmm();
        p->validate();
        if (p->components() != config_.components || p->dim() != config_.latent_dim) {
            throw DataError("mixture has K=" + std::to_string(p->components()) + ", D=" + std::to_string(p->dim()) +
                            "; config expects K=" + std::to_string(config_.components) +
                            ", D=" + std::to_string(config_.latent_dim));
        }
    }
    const std::size_t expected = params_.size() - gmm_ids.size();
    std::size_t bound = 0;
    for (const nn::Mlp* mlp : {&encoder_trunk_, &mu_head_, &log_sigma_head_, &smiles_decoder_, &ip_decoder_,
                               &cae_encoder_, &cae_decoder_, &dspn_})
        bound += mlp->param_ids().size();
    if (bound != expected) throw DataError("parameter set contains unknown entries");
}

std::vector<nn::ParamId> Vadeers::dvae_ids() const {
    std::vector<nn::ParamId> ids;
    for (const nn::Mlp* mlp : {&encoder_trunk_, &mu_head_, &log_sigma_head_, &smiles_decoder_, &ip_decoder_}) {
        auto p = mlp->param_ids();
        ids.insert(ids.end(), p.begin(), p.end());
    }
    return ids;
}

std::vector<nn::ParamId> Vadeers::prior_ids() const {
    std::vector<nn::ParamId> ids;
    if (!config_.has_gmm()) return ids;
    ids.push_back(*params_.find("gmm.logits"));
    ids.push_back(*params_.find("gmm.means"));
    if (config_.prior == PriorVariant::gmm_unconstrained) ids.push_back(*params_.find("gmm.log_scales"));
    return ids;
}

std::vector<nn::ParamId> Vadeers::cae_ids() const {
    auto ids = cae_encoder_.param_ids();
    auto dec = cae_decoder_.param_ids();
    ids.insert(ids.end(), dec.begin(), dec.end());
    return ids;
}

std::vector<nn::ParamId> Vadeers::dspn_ids() const { return dspn_.param_ids(); }

std::vector<nn::ParamId> Vadeers::trainable_ids() const {
    std::vector<nn::ParamId> ids = dvae_ids();
    for (const auto& group : {prior_ids(), cae_ids(), dspn_ids()}) ids.insert(ids.end(), group.begin(), group.end());
    return ids;
}

std::optional<gmm::GmmParams> Vadeers::gmm() const {
    if (!config_.has_gmm()) return std::nullopt;
    gmm::GmmParams p;
    p.mixture_logits = params_.value(*params_.find("gmm.logits"));
    p.means = params_.value(*params_.find("gmm.means"));
    p.log_scales = params_.value(*params_.find("gmm.log_scales"));
    p.constrained = config_.prior == PriorVariant::gmm_constrained;
    return p;
}

gmm::GmmParams Vadeers::prior() const {
    if (auto p = gmm()) return *p;
    return gmm::GmmParams::standard_normal(config_.latent_dim);
}

Vadeers::EncoderVars Vadeers::encode(nn::Tape& tape, nn::Var smiles, Rng& rng) const {
    nn::Var h = encoder_trunk_.forward(tape, params_, smiles, nn::Mode::eval, nullptr);
    nn::Var mu = mu_head_.forward(tape, params_, h, nn::Mode::eval, nullptr);
    nn::Var log_sigma = log_sigma_head_.forward(tape, params_, h, nn::Mode::eval, nullptr);
    const nn::Matrix eps = standard_normal_matrix(mu.value().rows(), mu.value().cols(), rng);
    nn::Var z = nn::add(mu, nn::mul_constant(nn::exp(log_sigma), eps));
    if (!z.value().all_finite()) throw NumericError("drug encoder: non-finite latent sample");
    return {mu, log_sigma, z};
}

Vadeers::DecoderVars Vadeers::decode(nn::Tape& tape, nn::Var z) const {
    return {smiles_decoder_.forward(tape, params_, z, nn::Mode::eval, nullptr),
            ip_decoder_.forward(tape, params_, z, nn::Mode::eval, nullptr)};
}

nn::Var Vadeers::cae_encode(nn::Tape& tape, nn::Var cells) const {
    return cae_encoder_.forward(tape, params_, cells, nn::Mode::eval, nullptr);
}

nn::Var Vadeers::cae_decode(nn::Tape& tape, nn::Var latent) const {
    return cae_decoder_.forward(tape, params_, latent, nn::Mode::eval, nullptr);
}

nn::Var Vadeers::dspn(nn::Tape& tape, nn::Var drug_latent, nn::Var cell_latent, nn::Mode mode, Rng* rng) const {
    return dspn_.forward(tape, params_, nn::concat_cols(drug_latent, cell_latent), mode, rng);
}

nn::Var Vadeers::log_prior(nn::Tape& tape, nn::Var z, std::span<const gmm::GuidingLabel> labels) const {
    if (!config_.has_gmm()) {
        const nn::Matrix zeros(1, config_.latent_dim);
        return gmm::component_log_densities(z, tape.constant(zeros), tape.constant(zeros));
    }
    gmm::GmmVars vars{tape.parameter(params_, *params_.find("gmm.logits")),
                      tape.parameter(params_, *params_.find("gmm.means")), nn::Var{}};
    const nn::ParamId scales = *params_.find("gmm.log_scales");
    vars.log_scales = config_.prior == PriorVariant::gmm_unconstrained
                          ? tape.parameter(params_, scales)
                          : tape.constant(nn::Matrix(config_.components, config_.latent_dim));
    return gmm::log_prior(z, vars, labels);
}

EncoderOutput Vadeers::dvae_encode(std::span<const double> smiles, Rng& rng) const {
    require_width(smiles, config_.smiles_dim, "dvae_encode");
    nn::Tape tape(nn::Tape::Recording::off);
    auto enc = encode(tape, tape.constant(nn::Matrix::row_vector(smiles)), rng);
    return {to_vector(enc.mu.value().row(0)), to_vector(enc.log_sigma.value().row(0)),
            to_vector(enc.z.value().row(0))};
}

DecoderOutput Vadeers::dvae_decode(std::span<const double> z) const {
    require_width(z, config_.latent_dim, "dvae_decode");
    nn::Tape tape(nn::Tape::Recording::off);
    auto dec = decode(tape, tape.constant(nn::Matrix::row_vector(z)));
    return {to_vector(dec.smiles.value().row(0)), to_vector(dec.ip.value().row(0))};
}

CaeOutput Vadeers::cae_forward_loss(std::span<const double> cell_features) const {
    require_width(cell_features, config_.bio_dim, "cae_forward_loss");
    nn::Tape tape(nn::Tape::Recording::off);
    nn::Var x = tape.constant(nn::Matrix::row_vector(cell_features));
    nn::Var latent = cae_encode(tape, x);
    nn::Var loss = nn::mse(x, cae_decode(tape, latent));
    return {to_vector(latent.value().row(0)), loss.value()(0, 0)};
}

double Vadeers::dspn_predict(std::span<const double> drug_mu, std::span<const double> cell_latent, nn::Mode mode,
                             Rng* rng) const {
    require_width(drug_mu, config_.latent_dim, "dspn_predict drug latent");
    require_width(cell_latent, config_.latent_dim, "dspn_predict cell latent");
    nn::Tape tape(nn::Tape::Recording::off);
    nn::Var out = dspn(tape, tape.constant(nn::Matrix::row_vector(drug_mu)),
                       tape.constant(nn::Matrix::row_vector(cell_latent)), mode, rng);
    return out.value()(0, 0);
}

nn::Matrix Vadeers::encode_means(const nn::Matrix& smiles) const {
    nn::Tape tape(nn::Tape::Recording::off);
    nn::Var h = encoder_trunk_.forward(tape, params_, tape.constant(smiles), nn::Mode::eval, nullptr);
    return mu_head_.forward(tape, params_, h, nn::Mode::eval, nullptr).value();
}

nn::Matrix Vadeers::decode_batch_ip(const nn::Matrix& z) const {
    return ip_decoder_.forward(params_, z, nn::Mode::eval, nullptr);
}

nn::Matrix Vadeers::decode_batch_smiles(const nn::Matrix& z) const {
    return smiles_decoder_.forward(params_, z, nn::Mode::eval, nullptr);
}

nn::Matrix Vadeers::cell_latents(const nn::Matrix& cells) const {
    return cae_encoder_.forward(params_, cells, nn::Mode::eval, nullptr);
}

nn::Matrix Vadeers::predict(const nn::Matrix& drug_mu, const nn::Matrix& cell_latent) const {
    nn::Tape tape(nn::Tape::Recording::off);
    return dspn(tape, tape.constant(drug_mu), tape.constant(cell_latent), nn::Mode::eval, nullptr).value();
}

}  // namespace vadeers::model
