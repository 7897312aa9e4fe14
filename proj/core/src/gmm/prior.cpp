#include "vadeers/gmm/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vadeers/error.hpp"

namespace vadeers::gmm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_component(std::size_t k, const GmmParams& params) {
    if (k >= params.components()) {
        throw IndexError("component " + std::to_string(k) + " out of range for K=" +
                         std::to_string(params.components()));
    }
}

void require_dim(std::span<const double> z, const GmmParams& params) {
    if (z.size() != params.dim()) {
        throw ContractError("latent vector has " + std::to_string(z.size()) + " dims, mixture expects " +
                            std::to_string(params.dim()));
    }
}

std::vector<double> weighted_log_terms(std::span<const double> z, const GmmParams& params) {
    require_dim(z, params);
    const auto log_w = [&] {
        std::vector<double> w(params.components());
        const auto logits = params.mixture_logits.row(0);
        const double m = *std::max_element(logits.begin(), logits.end());
        double s = 0.0;
        for (double v : logits) s += std::exp(v - m);
        const double lse = m + std::log(s);
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = logits[k] - lse;
        return w;
    }();
    std::vector<double> terms(params.components());
    for (std::size_t k = 0; k < terms.size(); ++k) terms[k] = log_w[k] + log_component_density(z, k, params);
    return terms;
}

double logsumexp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

void GmmParams::validate() const {
    const std::size_t k = means.rows();
    if (k == 0 || means.cols() == 0) throw ContractError("GmmParams: empty mixture");
    if (mixture_logits.rows() != 1 || mixture_logits.cols() != k) {
        throw ContractError("GmmParams: logits " + mixture_logits.shape_string() + " for " + std::to_string(k) +
                            " components");
    }
    if (!log_scales.same_shape(means)) {
        throw ContractError("GmmParams: log_scales " + log_scales.shape_string() + " vs means " +
                            means.shape_string());
    }
    if (!means.all_finite() || !log_scales.all_finite()) throw ContractError("GmmParams: non-finite values");
    if (constrained) {
        for (double v : log_scales.data())
            if (v != 0.0) throw ContractError("GmmParams: constrained mixture must have unit scales");
    }
}

GmmParams GmmParams::initialize(std::size_t components, std::size_t dim, bool constrained, Rng& rng) {
    if (components == 0 || dim == 0) throw ContractError("GmmParams::initialize: K and D must be positive");
    GmmParams p;
    p.mixture_logits = nn::Matrix(1, components);
    p.means = nn::Matrix(components, dim);
    p.log_scales = nn::Matrix(components, dim);
    p.constrained = constrained;
    std::normal_distribution<double> normal(0.0, 2.0);
    for (double& v : p.means.data()) v = normal(rng);
    return p;
}

GmmParams GmmParams::standard_normal(std::size_t dim) {
    GmmParams p;
    p.mixture_logits = nn::Matrix(1, 1);
    p.means = nn::Matrix(1, dim);
    p.log_scales = nn::Matrix(1, dim);
    p.constrained = true;
    return p;
}

double diag_gaussian_log_density(std::span<const double> z, std::span<const double> mean,
                                 std::span<const double> log_scale) {
    double acc = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d) {
        const double u = (z[d] - mean[d]) * std::exp(-log_scale[d]);
        acc += kLog2Pi + 2.0 * log_scale[d] + u * u;
    }
    return -0.5 * acc;
}

double log_component_density(std::span<const double> z, std::size_t k, const GmmParams& params) {
    require_component(k, params);
    require_dim(z, params);
    return diag_gaussian_log_density(z, params.means.row(k), params.log_scales.row(k));
}

double log_mixture_density(std::span<const double> z, const GmmParams& params) {
    const auto terms = weighted_log_terms(z, params);
    return logsumexp(terms);
}

double log_prior(std::span<const double> z, GuidingLabel label, const GmmParams& params) {
    if (label) return log_component_density(z, *label, params);
    return log_mixture_density(z, params);
}

std::vector<double> mixture_weights(const GmmParams& params) {
    const auto logits = params.mixture_logits.row(0);
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += (w[k] = std::exp(logits[k] - m));
    for (double& v : w) v /= s;
    return w;
}

std::vector<double> responsibilities(std::span<const double> z, const GmmParams& params) {
    auto terms = weighted_log_terms(z, params);
    const double lse = logsumexp(terms);
    for (double& t : terms) t = std::exp(t - lse);
    return terms;
}

std::size_t most_likely_component(std::span<const double> z, const GmmParams& params) {
    const auto r = weighted_log_terms(z, params);
    return static_cast<std::size_t>(std::distance(r.begin(), std::max_element(r.begin(), r.end())));
}

nn::Matrix sample_component(std::size_t k, const GmmParams& params, std::size_t n, Rng& rng) {
    require_component(k, params);
    if (n == 0) throw ContractError("sample_component: n must be >= 1");
    nn::Matrix out(n, params.dim());
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto mean = params.means.row(k);
    const auto ls = params.log_scales.row(k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < params.dim(); ++d) out(i, d) = mean[d] + std::exp(ls[d]) * normal(rng);
    return out;
}

MixtureDraw sample_mixture(const GmmParams& params, std::size_t n, Rng& rng) {
    if (n == 0) throw ContractError("sample_mixture: n must be >= 1");
    const auto w = mixture_weights(params);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    MixtureDraw draw{nn::Matrix(n, params.dim()), std::vector<std::size_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        draw.components[i] = k;
        const auto mean = params.means.row(k);
        const auto ls = params.log_scales.row(k);
        for (std::size_t d = 0; d < params.dim(); ++d)
            draw.samples(i, d) = mean[d] + std::exp(ls[d]) * normal(rng);
    }
    return draw;
}

nn::Var component_log_densities(nn::Var z, nn::Var means, nn::Var log_scales) {
    if (z.tape == nullptr || z.tape != means.tape || z.tape != log_scales.tape) {
        throw ContractError("component_log_densities: operands live on different tapes");
    }
    nn::Tape& tape = *z.tape;
    const nn::Matrix& zv = z.value();
    const nn::Matrix& mv = means.value();
    const nn::Matrix& sv = log_scales.value();
    if (zv.cols() != mv.cols() || !sv.same_shape(mv)) {
        throw ContractError("component_log_densities: z " + zv.shape_string() + ", means " + mv.shape_string() +
                            ", log_scales " + sv.shape_string());
    }
    nn::Matrix out(zv.rows(), mv.rows());
    for (std::size_t n = 0; n < zv.rows(); ++n)
        for (std::size_t k = 0; k < mv.rows(); ++k)
            out(n, k) = diag_gaussian_log_density(zv.row(n), mv.row(k), sv.row(k));

    return tape.record(std::move(out), {z, means, log_scales},
                       [z, means, log_scales](const nn::Matrix& g, nn::GradientSink& sink) {
                           const nn::Matrix& zv = z.value();
                           const nn::Matrix& mv = means.value();
                           const nn::Matrix& sv = log_scales.value();
                           const std::size_t dims = zv.cols();
                           nn::Matrix gz(zv.rows(), dims);
                           nn::Matrix gm(mv.rows(), dims);
                           nn::Matrix gs(sv.rows(), dims);
                           for (std::size_t n = 0; n < zv.rows(); ++n) {
                               for (std::size_t k = 0; k < mv.rows(); ++k) {
                                   const double w = g(n, k);
                                   if (w == 0.0) continue;
                                   for (std::size_t d = 0; d < dims; ++d) {
                                       const double inv_var = std::exp(-2.0 * sv(k, d));
                                       const double diff = zv(n, d) - mv(k, d);
                                       gz(n, d) -= w * diff * inv_var;
                                       gm(k, d) += w * diff * inv_var;
                                       gs(k, d) += w * (diff * diff * inv_var - 1.0);
                                   }
                               }
                           }
                           sink.add(z, std::move(gz));
                           sink.add(means, std::move(gm));
                           sink.add(log_scales, std::move(gs));
                       });
}

nn::Var log_prior(nn::Var z, const GmmVars& gmm, std::span<const GuidingLabel> labels) {
    const std::size_t k = gmm.means.value().rows();
    for (const auto& label : labels) {
        if (label && *label >= k) {
            throw IndexError("guiding label " + std::to_string(*label) + " out of range for K=" + std::to_string(k));
        }
    }
    nn::Var densities = component_log_densities(z, gmm.means, gmm.log_scales);
    nn::Var mixture = nn::logsumexp_rows(nn::add_bias(densities, nn::log_softmax_rows(gmm.logits)));
    return nn::select_or(densities, mixture, labels);
}

}  // namespace vadeers::gmm
