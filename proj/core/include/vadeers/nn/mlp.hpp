#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vadeers/nn/ops.hpp"

namespace vadeers::nn {

enum class Activation { relu, identity };
enum class Mode { train, eval };

struct LayerSpec {
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;
    Activation activation = Activation::relu;
    double dropout_rate = 0.0;
};

/// Layer specs for a stack of hidden widths followed by a linear output.
/// `dropout_layers` hidden layers from the front get `dropout_rate`.
std::vector<LayerSpec> make_stack(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                                  std::size_t out_dim, Activation output_activation = Activation::identity,
                                  double dropout_rate = 0.0, std::size_t dropout_layers = 0);

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero bias.
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

/// Dense feed-forward network whose weights live in a ParamStore.
/// Each layer is affine -> activation -> dropout (train mode only).
class Mlp {
public:
    Mlp() = default;

    /// Registers "<prefix>.<i>.weight" / "<prefix>.<i>.bias" for every layer.
    static Mlp create(ParamStore& store, const std::string& prefix, std::vector<LayerSpec> layers, Rng& init);

    /// Rebinds to parameters already present in `store` (checkpoint loading).
    static Mlp bind(const ParamStore& store, const std::string& prefix, std::vector<LayerSpec> layers);

    /// `rng` may be null in eval mode or when no layer has dropout.
    Var forward(Tape& tape, const ParamStore& store, Var input, Mode mode, Rng* rng) const;

    /// Value-only forward pass; the same kernels as the taped pass.
    Matrix forward(const ParamStore& store, const Matrix& input, Mode mode, Rng* rng) const;

    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    std::vector<ParamId> param_ids() const;
    std::size_t in_dim() const { return layers_.front().in_dim; }
    std::size_t out_dim() const { return layers_.back().out_dim; }
    const std::string& prefix() const noexcept { return prefix_; }

private:
    static void validate(const std::vector<LayerSpec>& layers, const std::string& prefix);

    std::string prefix_;
    std::vector<LayerSpec> layers_;
    std::vector<ParamId> weights_;
    std::vector<ParamId> biases_;
};

}  // namespace vadeers::nn
