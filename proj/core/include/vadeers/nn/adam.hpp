#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "vadeers/nn/tape.hpp"

namespace vadeers::nn {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of a flat parameter block. `step` is the
/// 1-based index of this update.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, const AdamHyper& hyper, std::int64_t step);

/// Adam over a fixed subset of a ParamStore. Moments start at zero.
class Adam {
public:
    Adam(const ParamStore& store, std::vector<ParamId> ids);

    /// Applies one update with learning rate `lr`. Gradients missing from
    /// `grads` are treated as zero.
    void step(ParamStore& store, const Gradients& grads, double lr);

    std::int64_t steps() const noexcept { return steps_; }
    const std::vector<ParamId>& ids() const noexcept { return ids_; }
    const Matrix& first_moment(ParamId id) const { return first_.at(id); }
    const Matrix& second_moment(ParamId id) const { return second_.at(id); }

    AdamHyper hyper;

private:
    std::vector<ParamId> ids_;
    std::map<ParamId, Matrix> first_;
    std::map<ParamId, Matrix> second_;
    std::int64_t steps_ = 0;
};

}  // namespace vadeers::nn
