#include "vadeers/model/config.hpp"

#include <cmath>

#include "vadeers/error.hpp"

namespace vadeers::model {

std::string_view to_string(PriorVariant variant) {
    switch (variant) {
        case PriorVariant::vanilla: return "vanilla";
        case PriorVariant::gmm_constrained: return "gmm_constrained";
        case PriorVariant::gmm_unconstrained: return "gmm_unconstrained";
    }
    return "unknown";
}

PriorVariant parse_prior_variant(std::string_view name) {
    if (name == "vanilla") return PriorVariant::vanilla;
    if (name == "gmm_constrained") return PriorVariant::gmm_constrained;
    if (name == "gmm_unconstrained") return PriorVariant::gmm_unconstrained;
    throw ContractError("unknown prior variant '" + std::string(name) +
                        "' (expected vanilla, gmm_constrained or gmm_unconstrained)");
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* what) {
        if (v == 0) throw ContractError(std::string("ModelConfig: ") + what + " must be positive");
    };
    positive(smiles_dim, "smiles_dim");
    positive(ip_dim, "ip_dim");
    positive(bio_dim, "bio_dim");
    positive(latent_dim, "latent_dim");
    positive(components, "components");
    positive(guiding_labels, "guiding_labels");
    if (encoder_dims.empty()) throw ContractError("ModelConfig: encoder needs at least one hidden layer");
    for (auto* dims : {&encoder_dims, &decoder_dims, &dspn_dims})
        for (std::size_t d : *dims) positive(d, "hidden width");
    if (guiding_labels > components) {
        throw ContractError("ModelConfig: G=" + std::to_string(guiding_labels) + " exceeds K=" +
                            std::to_string(components));
    }
    if (!(dspn_dropout >= 0.0 && dspn_dropout < 1.0)) throw ContractError("ModelConfig: dspn_dropout must be in [0,1)");
    if (dspn_dropout_layers > dspn_dims.size()) {
        throw ContractError("ModelConfig: dspn_dropout_layers exceeds the number of DSPN hidden layers");
    }
}

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.smiles_dim = 32;
    c.ip_dim = 24;
    c.bio_dim = 20;
    c.dspn_dims = {128, 64, 32};
    return c;
}

void LossWeights::validate() const {
    for (double w : {smiles, ip, prior, entropy, cae, dspn}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("LossWeights: weights must be finite and >= 0");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"smiles_dim", c.smiles_dim},
                       {"ip_dim", c.ip_dim},
                       {"bio_dim", c.bio_dim},
                       {"latent_dim", c.latent_dim},
                       {"encoder_dims", c.encoder_dims},
                       {"decoder_dims", c.decoder_dims},
                       {"dspn_dims", c.dspn_dims},
                       {"dspn_dropout", c.dspn_dropout},
                       {"dspn_dropout_layers", c.dspn_dropout_layers},
                       {"components", c.components},
                       {"guiding_labels", c.guiding_labels},
                       {"prior", std::string(to_string(c.prior))},
                       {"dspn_uses_mean", c.dspn_uses_mean}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.smiles_dim = j.value("smiles_dim", d.smiles_dim);
    c.ip_dim = j.value("ip_dim", d.ip_dim);
    c.bio_dim = j.value("bio_dim", d.bio_dim);
    c.latent_dim = j.value("latent_dim", d.latent_dim);
    c.encoder_dims = j.value("encoder_dims", d.encoder_dims);
    c.decoder_dims = j.value("decoder_dims", d.decoder_dims);
    c.dspn_dims = j.value("dspn_dims", d.dspn_dims);
    c.dspn_dropout = j.value("dspn_dropout", d.dspn_dropout);
    c.dspn_dropout_layers = j.value("dspn_dropout_layers", d.dspn_dropout_layers);
    c.components = j.value("components", d.components);
    c.guiding_labels = j.value("guiding_labels", d.guiding_labels);
    c.prior = parse_prior_variant(j.value("prior", std::string(to_string(d.prior))));
    c.dspn_uses_mean = j.value("dspn_uses_mean", d.dspn_uses_mean);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"smiles", w.smiles}, {"ip", w.ip},   {"prior", w.prior},
                       {"entropy", w.entropy}, {"cae", w.cae}, {"dspn", w.dspn}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    LossWeights d;
    w.smiles = j.value("smiles", d.smiles);
    w.ip = j.value("ip", d.ip);
    w.prior = j.value("prior", d.prior);
    w.entropy = j.value("entropy", d.entropy);
    w.cae = j.value("cae", d.cae);
    w.dspn = j.value("dspn", d.dspn);
}

}  // namespace vadeers::model
