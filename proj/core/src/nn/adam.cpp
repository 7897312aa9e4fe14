#include "vadeers/nn/adam.hpp"

#include <cmath>

#include "vadeers/error.hpp"

namespace vadeers::nn {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, const AdamHyper& hyper, std::int64_t step) {
    if (grads.size() != params.size() || first_moment.size() != params.size() ||
        second_moment.size() != params.size()) {
        throw ContractError("adam_update: params " + std::to_string(params.size()) + ", grads " +
                            std::to_string(grads.size()) + ", moments " + std::to_string(first_moment.size()) + "/" +
                            std::to_string(second_moment.size()));
    }
    if (step < 1) throw ContractError("adam_update: step index must be >= 1");
    const double t = static_cast<double>(step);
    const double bias1 = 1.0 - std::pow(hyper.beta1, t);
    const double bias2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        first_moment[i] = hyper.beta1 * first_moment[i] + (1.0 - hyper.beta1) * g;
        second_moment[i] = hyper.beta2 * second_moment[i] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = first_moment[i] / bias1;
        const double v_hat = second_moment[i] / bias2;
        params[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
}

Adam::Adam(const ParamStore& store, std::vector<ParamId> ids) : ids_(std::move(ids)) {
    for (ParamId id : ids_) {
        const Matrix& p = store.value(id);
        first_.emplace(id, Matrix(p.rows(), p.cols()));
        second_.emplace(id, Matrix(p.rows(), p.cols()));
    }
}

void Adam::step(ParamStore& store, const Gradients& grads, double lr) {
    ++steps_;
    AdamHyper h = hyper;
    h.lr = lr;
    for (ParamId id : ids_) {
        Matrix& p = store.value(id);
        auto it = grads.find(id);
        if (it == grads.end()) {
            const Matrix zero(p.rows(), p.cols());
            adam_update(p.data(), zero.data(), first_.at(id).data(), second_.at(id).data(), h, steps_);
        } else {
            require_same_shape(p, it->second, "Adam::step");
            adam_update(p.data(), it->second.data(), first_.at(id).data(), second_.at(id).data(), h, steps_);
        }
    }
}

}  // namespace vadeers::nn
