#include "vadeers/nn/mlp.hpp"

#include <cmath>

#include "vadeers/error.hpp"

namespace vadeers::nn {

std::vector<LayerSpec> make_stack(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
                                  Activation output_activation, double dropout_rate, std::size_t dropout_layers) {
    std::vector<LayerSpec> layers;
    std::size_t prev = in_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        layers.push_back({prev, hidden[i], Activation::relu, i < dropout_layers ? dropout_rate : 0.0});
        prev = hidden[i];
    }
    layers.push_back({prev, out_dim, output_activation, 0.0});
    return layers;
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (double& v : w.data()) v = dist(rng);
    return w;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : mask.data()) v = u(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

void Mlp::validate(const std::vector<LayerSpec>& layers, const std::string& prefix) {
    if (layers.empty()) throw ContractError("Mlp '" + prefix + "': no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in_dim == 0 || l.out_dim == 0) {
            throw ContractError("Mlp '" + prefix + "': layer " + std::to_string(i) + " has a zero dimension");
        }
        if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
            throw ContractError("Mlp '" + prefix + "': layer " + std::to_string(i) + " dropout rate must be in [0,1)");
        }
        if (i > 0 && layers[i - 1].out_dim != l.in_dim) {
            throw ContractError("Mlp '" + prefix + "': layer " + std::to_string(i - 1) + " outputs " +
                                std::to_string(layers[i - 1].out_dim) + " but layer " + std::to_string(i) +
                                " expects " + std::to_string(l.in_dim));
        }
    }
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::vector<LayerSpec> layers, Rng& init) {
    validate(layers, prefix);
    Mlp mlp;
    mlp.prefix_ = prefix;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string base = prefix + "." + std::to_string(i);
        mlp.weights_.push_back(store.add(base + ".weight", glorot_uniform(layers[i].in_dim, layers[i].out_dim, init)));
        mlp.biases_.push_back(store.add(base + ".bias", Matrix(1, layers[i].out_dim)));
    }
    mlp.layers_ = std::move(layers);
    return mlp;
}

Mlp Mlp::bind(const ParamStore& store, const std::string& prefix, std::vector<LayerSpec> layers) {
    validate(layers, prefix);
    Mlp mlp;
    mlp.prefix_ = prefix;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string base = prefix + "." + std::to_string(i);
        auto w = store.find(base + ".weight");
        auto b = store.find(base + ".bias");
        if (!w || !b) throw DataError("missing parameters for layer '" + base + "'");
        const Matrix& wv = store.value(*w);
        const Matrix& bv = store.value(*b);
        if (wv.rows() != layers[i].in_dim || wv.cols() != layers[i].out_dim || bv.rows() != 1 ||
            bv.cols() != layers[i].out_dim) {
            throw DataError("parameter shape mismatch for layer '" + base + "': weight " + wv.shape_string() +
                            ", bias " + bv.shape_string() + ", expected " + std::to_string(layers[i].in_dim) + "x" +
                            std::to_string(layers[i].out_dim));
        }
        mlp.weights_.push_back(*w);
        mlp.biases_.push_back(*b);
    }
    mlp.layers_ = std::move(layers);
    return mlp;
}

Var Mlp::forward(Tape& tape, const ParamStore& store, Var input, Mode mode, Rng* rng) const {
    if (input.value().cols() != in_dim()) {
        throw ContractError("Mlp '" + prefix_ + "': input " + input.value().shape_string() + " but layer 0 expects " +
                            std::to_string(in_dim()) + " columns");
    }
    Var h = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& spec = layers_[i];
        h = affine(h, tape.parameter(store, weights_[i]), tape.parameter(store, biases_[i]));
        if (spec.activation == Activation::relu) h = relu(h);
        if (mode == Mode::train && spec.dropout_rate > 0.0) {
            if (rng == nullptr) throw ContractError("Mlp '" + prefix_ + "': train-mode dropout needs an rng");
            h = mul_constant(h, dropout_mask(h.value().rows(), h.value().cols(), spec.dropout_rate, *rng));
        }
        if (!h.value().all_finite()) {
            throw NumericError("Mlp '" + prefix_ + "': non-finite activation at layer " + std::to_string(i));
        }
    }
    return h;
}

Matrix Mlp::forward(const ParamStore& store, const Matrix& input, Mode mode, Rng* rng) const {
    Tape tape(Tape::Recording::off);
    return forward(tape, store, tape.constant(input), mode, rng).value();
}

std::vector<ParamId> Mlp::param_ids() const {
    std::vector<ParamId> ids;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        ids.push_back(weights_[i]);
        ids.push_back(biases_[i]);
    }
    return ids;
}

}  // namespace vadeers::nn
