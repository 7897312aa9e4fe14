#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vadeers/nn/ops.hpp"

namespace vadeers::gmm {

/// Observed mixture component for a training sample, if any.
using GuidingLabel = std::optional<std::size_t>;

/// Diagonal Gaussian mixture over a D-dimensional latent space.
///
/// Weights are softmax(mixture_logits); component k has mean means.row(k) and
/// per-dimension standard deviation exp(log_scales(k, d)). A constrained
/// mixture pins every covariance to the identity (log_scales == 0).
struct GmmParams {
    nn::Matrix mixture_logits;  // 1 x K
    nn::Matrix means;           // K x D
    nn::Matrix log_scales;      // K x D
    bool constrained = false;

    std::size_t components() const noexcept { return means.rows(); }
    std::size_t dim() const noexcept { return means.cols(); }

    /// Throws ContractError when shapes disagree, values are non-finite, or a
    /// constrained mixture has non-zero log_scales.
    void validate() const;

    /// Zero logits, means drawn from N(0, 4 I), unit scales.
    static GmmParams initialize(std::size_t components, std::size_t dim, bool constrained, Rng& rng);
    /// Single fixed N(0, I) component.
    static GmmParams standard_normal(std::size_t dim);

    friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

/// log N(z | mean, diag(exp(2 log_scale))). Shared by the value and taped paths.
double diag_gaussian_log_density(std::span<const double> z, std::span<const double> mean,
                                 std::span<const double> log_scale);

double log_component_density(std::span<const double> z, std::size_t k, const GmmParams& params);
double log_mixture_density(std::span<const double> z, const GmmParams& params);

/// Semi-supervised prior: the labelled component's density when `label` is
/// set, otherwise the full mixture density.
double log_prior(std::span<const double> z, GuidingLabel label, const GmmParams& params);

std::vector<double> mixture_weights(const GmmParams& params);

/// Posterior over components, p(C = k | z).
std::vector<double> responsibilities(std::span<const double> z, const GmmParams& params);
std::size_t most_likely_component(std::span<const double> z, const GmmParams& params);

/// n i.i.d. draws from component k.
nn::Matrix sample_component(std::size_t k, const GmmParams& params, std::size_t n, Rng& rng);

struct MixtureDraw {
    nn::Matrix samples;
    std::vector<std::size_t> components;
};
MixtureDraw sample_mixture(const GmmParams& params, std::size_t n, Rng& rng);

/// Taped variables of a mixture. log_scales is a constant for constrained
/// mixtures so it never collects a gradient.
struct GmmVars {
    nn::Var logits;
    nn::Var means;
    nn::Var log_scales;
};

/// NxD latent rows -> NxK matrix of log N(z_n | mu_k, Sigma_k).
nn::Var component_log_densities(nn::Var z, nn::Var means, nn::Var log_scales);

/// Nx1 column of log_prior for every latent row. Labelled rows never reach the
/// mixture weights, so the logits are trained by unlabelled rows only.
nn::Var log_prior(nn::Var z, const GmmVars& gmm, std::span<const GuidingLabel> labels);

}  // namespace vadeers::gmm
