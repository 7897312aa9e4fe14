#pragma once

#include <functional>
#include <span>

#include "vadeers/error.hpp"
#include "vadeers/model/vadeers.hpp"
#include "vadeers/train/run_log.hpp"
#include "vadeers/train/split.hpp"

namespace vadeers::train {

/// A non-finite loss stopped training. Carries the parameters from before the
/// failing step and the log up to that point.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, nn::ParamStore last_good, RunLog log)
        : NumericError(what), last_good_(std::move(last_good)), log_(std::move(log)) {}

    const nn::ParamStore& last_good() const noexcept { return last_good_; }
    const RunLog& log() const noexcept { return log_; }

private:
    nn::ParamStore last_good_;
    RunLog log_;
};

/// Optional observers, called synchronously from the training loop.
struct TrainHooks {
    /// Cell indices of every batch that produces a gradient.
    std::function<void(std::span<const std::size_t>)> on_batch_cells;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    model::Vadeers model;
    RunLog log;
};

/// Two-phase training.
///
/// Joint phase: Adam on the whole-model loss over shuffled minibatches of
/// training pairs. After every `dvae_break_every_steps` joint steps the
/// drug VAE and mixture train alone for `dvae_break_epochs` epochs over the
/// profiled drugs (own Adam state, joint learning rate).
///
/// DSPN phase: the drug VAE, cell autoencoder and mixture are frozen; a fresh
/// Adam trains the predictor on precomputed latents with a step-decayed
/// learning rate.
///
/// Initial weights come from schedule.seed. Throws DivergenceError on a
/// non-finite loss.
TrainResult train(const TrainingData& data, const model::ModelConfig& config, const TrainSchedule& schedule,
                  const model::LossWeights& weights, const TrainHooks& hooks = {});

/// Continues from an existing model instead of fresh weights.
TrainResult train(model::Vadeers model, const TrainingData& data, const TrainSchedule& schedule,
                  const model::LossWeights& weights, const TrainHooks& hooks = {});

/// Parameters that the DSPN phase must leave untouched.
std::vector<nn::ParamId> frozen_ids(const model::Vadeers& model);

/// Standardized-scale RMSE of eval-mode predictions on `pairs`.
double pair_rmse(const model::Vadeers& model, const TrainingData& data, std::span<const Pair> pairs);

}  // namespace vadeers::train
