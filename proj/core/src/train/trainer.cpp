#include "vadeers/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "vadeers/model/losses.hpp"
#include "vadeers/nn/adam.hpp"

namespace vadeers::train {
namespace {

void accumulate(model::LossBreakdown& acc, const model::LossBreakdown& b) {
    acc.smiles_mse += b.smiles_mse;
    acc.ip_mse += b.ip_mse;
    acc.log_prior += b.log_prior;
    acc.entropy += b.entropy;
    acc.cae_mse += b.cae_mse;
    acc.dspn_mse += b.dspn_mse;
    acc.smiles_term += b.smiles_term;
    acc.ip_term += b.ip_term;
    acc.prior_term += b.prior_term;
    acc.entropy_term += b.entropy_term;
    acc.cae_term += b.cae_term;
    acc.dspn_term += b.dspn_term;
    acc.dvae += b.dvae;
    acc.total += b.total;
    acc.observed_pairs += b.observed_pairs;
}

model::LossBreakdown averaged(model::LossBreakdown acc, std::size_t batches) {
    if (batches == 0) return acc;
    const double n = static_cast<double>(batches);
    for (double* f : {&acc.smiles_mse, &acc.ip_mse, &acc.log_prior, &acc.entropy, &acc.cae_mse, &acc.dspn_mse,
                      &acc.smiles_term, &acc.ip_term, &acc.prior_term, &acc.entropy_term, &acc.cae_term,
                      &acc.dspn_term, &acc.dvae, &acc.total}) {
        *f /= n;
    }
    return acc;
}

bool gradients_finite(const nn::Gradients& grads) {
    for (const auto& [id, g] : grads) {
        if (!g.all_finite()) return false;
    }
    return true;
}

model::DrugBatch gather_drugs(const model::DrugBatch& all, std::span<const std::size_t> rows) {
    model::DrugBatch b;
    b.smiles = nn::gather_rows(all.smiles, rows);
    b.ip = nn::gather_rows(all.ip, rows);
    for (std::size_t r : rows) {
        b.has_ip.push_back(all.has_ip[r]);
        b.labels.push_back(all.labels[r]);
    }
    return b;
}

/// One z sample per drug without recording gradients.
nn::Matrix sample_latents(const model::Vadeers& m, const nn::Matrix& smiles, Rng& rng) {
    nn::Tape tape(nn::Tape::Recording::off);
    return m.encode(tape, tape.constant(smiles), rng).z.value();
}

class Loop {
public:
    Loop(model::Vadeers& m, const TrainingData& data, const TrainSchedule& schedule, const model::LossWeights& weights,
         const TrainHooks& hooks)
        : m_(m), data_(data), s_(schedule), w_(weights), hooks_(hooks),
          rng_(schedule.seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL), frozen_(frozen_ids(m)) {
        log_.schedule = schedule;
    }

    RunLog run() {
        const auto start = std::chrono::steady_clock::now();
        try {
            if (s_.joint_epochs > 0) joint_phase();
            if (s_.dspn_epochs > 0) dspn_phase();
        } catch (const DivergenceError&) {
            throw;
        } catch (const NumericError& e) {
            // Parameters only change in Adam steps, after every check, so
            // the current values are still the last good ones.
            diverge(stage_, e.what());
        }
        log_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return log_;
    }

private:
    void event(EventKind kind, Phase phase, std::size_t epoch, double lr,
               std::optional<std::uint64_t> hash = std::nullopt) {
        log_.events.push_back({kind, phase, epoch, log_.joint_steps, lr, hash});
    }

    [[noreturn]] void diverge(const std::string& where, const std::string& cause = "non-finite loss or gradient") {
        log_.wall_seconds = 0.0;
        throw DivergenceError(cause + " during " + where + " (joint step " + std::to_string(log_.joint_steps) + ")",
                              m_.params(), log_);
    }

    void report_cells(std::span<const Pair* const> batch) {
        if (!hooks_.on_batch_cells) return;
        cells_.clear();
        for (const Pair* p : batch) cells_.push_back(p->cell);
        hooks_.on_batch_cells(cells_);
    }

    void finish_epoch(Phase phase, std::size_t epoch, std::size_t batches, double lr,
                      const model::LossBreakdown& acc) {
        EpochRecord rec;
        rec.phase = phase;
        rec.epoch = epoch;
        rec.batches = batches;
        rec.steps_after = log_.joint_steps;
        rec.lr = lr;
        rec.loss = averaged(acc, batches);
        rec.val_ic50_rmse = pair_rmse(m_, data_, data_.split.val_pairs);
        rec.frozen_hash = nn::hash_params(m_.params(), frozen_);
        log_.epochs.push_back(rec);
        if (hooks_.on_epoch) hooks_.on_epoch(rec);
    }

    void joint_phase() {
        nn::ParamStore& params = m_.params();
        nn::Adam adam(params, m_.trainable_ids());
        std::vector<const Pair*> order;
        for (const auto& p : data_.split.train_pairs) order.push_back(&p);

        event(EventKind::phase_start, Phase::joint, 0, s_.lr_joint);
        stage_ = "joint training";
        for (std::size_t epoch = 0; epoch < s_.joint_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng_);
            model::LossBreakdown acc;
            std::size_t batches = 0;
            for (std::size_t begin = 0; begin < order.size(); begin += s_.batch_size) {
                const std::size_t end = std::min(order.size(), begin + s_.batch_size);
                const std::span<const Pair* const> batch(order.data() + begin, end - begin);
                report_cells(batch);
                const model::PairBatch pb = make_pair_batch(data_, batch);
                nn::Tape tape;
                auto graph = model::total_loss_graph(tape, m_, pb, w_, nn::Mode::train, rng_);
                if (!std::isfinite(graph.breakdown.total)) diverge("joint training");
                const nn::Gradients grads = tape.gradients(graph.total);
                if (!gradients_finite(grads)) diverge("joint training");
                adam.step(params, grads, s_.lr_joint);
                accumulate(acc, graph.breakdown);
                ++batches;
                ++log_.joint_steps;
                if (log_.joint_steps % s_.dvae_break_every_steps == 0) {
                    dvae_break(epoch);
                    stage_ = "joint training";
                }
            }
            finish_epoch(Phase::joint, epoch, batches, s_.lr_joint, acc);
        }
        event(EventKind::phase_end, Phase::joint, s_.joint_epochs, s_.lr_joint);
    }

    void dvae_break(std::size_t epoch) {
        event(EventKind::break_start, Phase::joint, epoch, s_.lr_joint);
        stage_ = "a DVAE break";
        if (!break_adam_) {
            auto ids = m_.dvae_ids();
            const auto prior = m_.prior_ids();
            ids.insert(ids.end(), prior.begin(), prior.end());
            break_adam_.emplace(m_.params(), std::move(ids));
        }
        std::vector<std::size_t> order = data_.profiled_drugs;
        for (std::size_t be = 0; be < s_.dvae_break_epochs && !order.empty(); ++be) {
            std::shuffle(order.begin(), order.end(), rng_);
            for (std::size_t begin = 0; begin < order.size(); begin += s_.dvae_break_batch) {
                const std::size_t end = std::min(order.size(), begin + s_.dvae_break_batch);
                const model::DrugBatch batch =
                    gather_drugs(data_.drugs, std::span<const std::size_t>(order.data() + begin, end - begin));
                nn::Tape tape;
                auto graph = model::dvae_loss_graph(tape, m_, batch, w_, rng_);
                if (!std::isfinite(graph.breakdown.total)) diverge("a DVAE break");
                const nn::Gradients grads = tape.gradients(graph.total);
                if (!gradients_finite(grads)) diverge("a DVAE break");
                break_adam_->step(m_.params(), grads, s_.lr_joint);
            }
        }
        ++log_.breaks;
        event(EventKind::break_end, Phase::joint, epoch, s_.lr_joint);
    }

    void dspn_phase() {
        nn::ParamStore& params = m_.params();
        stage_ = "DSPN training";
        const std::uint64_t frozen_hash = nn::hash_params(params, frozen_);
        event(EventKind::freeze, Phase::dspn, 0, s_.lr_dspn, frozen_hash);
        event(EventKind::phase_start, Phase::dspn, 0, s_.lr_dspn);

        const bool use_mean = m_.config().dspn_uses_mean;
        nn::Matrix drug_latents = use_mean ? m_.encode_means(data_.drugs.smiles) : nn::Matrix();
        const nn::Matrix cell_latents = m_.cell_latents(data_.cells);
        nn::Adam adam(params, m_.dspn_ids());
        std::vector<const Pair*> order;
        for (const auto& p : data_.split.train_pairs) order.push_back(&p);
        std::vector<model::PairEntry> entries;

        for (std::size_t epoch = 0; epoch < s_.dspn_epochs; ++epoch) {
            const double lr = s_.dspn_lr(epoch);
            if (epoch % s_.dspn_decay_every == 0) event(EventKind::lr_change, Phase::dspn, epoch, lr);
            if (!use_mean) drug_latents = sample_latents(m_, data_.drugs.smiles, rng_);
            std::shuffle(order.begin(), order.end(), rng_);
            model::LossBreakdown acc;
            std::size_t batches = 0;
            for (std::size_t begin = 0; begin < order.size(); begin += s_.batch_size) {
                const std::size_t end = std::min(order.size(), begin + s_.batch_size);
                const std::span<const Pair* const> batch(order.data() + begin, end - begin);
                report_cells(batch);
                entries.clear();
                for (const Pair* p : batch) entries.push_back({p->drug, p->cell, p->ic50, true});
                nn::Tape tape;
                auto graph = model::dspn_loss_graph(tape, m_, drug_latents, cell_latents, entries, w_,
                                                    nn::Mode::train, rng_);
                if (!std::isfinite(graph.breakdown.total)) diverge("DSPN training");
                const nn::Gradients grads = tape.gradients(graph.total);
                if (!gradients_finite(grads)) diverge("DSPN training");
                adam.step(params, grads, lr);
                accumulate(acc, graph.breakdown);
                ++batches;
            }
            finish_epoch(Phase::dspn, epoch, batches, lr, acc);
            if (log_.epochs.back().frozen_hash != frozen_hash) {
                throw ContractError("frozen parameters changed during DSPN epoch " + std::to_string(epoch));
            }
        }
        event(EventKind::phase_end, Phase::dspn, s_.dspn_epochs, s_.dspn_lr(s_.dspn_epochs - 1));
    }

    model::Vadeers& m_;
    const TrainingData& data_;
    const TrainSchedule& s_;
    const model::LossWeights& w_;
    const TrainHooks& hooks_;
    Rng rng_;
    std::vector<nn::ParamId> frozen_;
    std::optional<nn::Adam> break_adam_;
    std::vector<std::size_t> cells_;
    const char* stage_ = "joint training";
    RunLog log_;
};

void check_shapes(const model::ModelConfig& c, const TrainingData& d) {
    auto mismatch = [](const char* what, std::size_t model, std::size_t data) {
        if (model != data) {
            throw ContractError(std::string(what) + ": model expects " + std::to_string(model) + ", data has " +
                                std::to_string(data));
        }
    };
    mismatch("smiles_dim", c.smiles_dim, d.drugs.smiles.cols());
    mismatch("ip_dim", c.ip_dim, d.drugs.ip.cols());
    mismatch("bio_dim", c.bio_dim, d.cells.cols());
    for (const auto& l : d.drugs.labels) {
        if (l && *l >= c.guiding_labels) {
            throw ContractError("guiding label " + std::to_string(*l) + " but G=" + std::to_string(c.guiding_labels));
        }
    }
    if (d.split.train_pairs.empty()) throw DataError("no training pairs");
}

}  // namespace

std::vector<nn::ParamId> frozen_ids(const model::Vadeers& m) {
    std::vector<nn::ParamId> ids = m.dvae_ids();
    const auto cae = m.cae_ids();
    ids.insert(ids.end(), cae.begin(), cae.end());
    const auto gmm = m.params().with_prefix("gmm.");
    ids.insert(ids.end(), gmm.begin(), gmm.end());
    return ids;
}

double pair_rmse(const model::Vadeers& m, const TrainingData& data, std::span<const Pair> pairs) {
    if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
    const nn::Matrix mu = m.encode_means(data.drugs.smiles);
    const nn::Matrix cl = m.cell_latents(data.cells);
    std::vector<std::size_t> di;
    std::vector<std::size_t> ci;
    for (const auto& p : pairs) {
        di.push_back(p.drug);
        ci.push_back(p.cell);
    }
    const nn::Matrix pred = m.predict(nn::gather_rows(mu, di), nn::gather_rows(cl, ci));
    double s = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) s += (pred(i, 0) - pairs[i].ic50) * (pred(i, 0) - pairs[i].ic50);
    return std::sqrt(s / static_cast<double>(pairs.size()));
}

TrainResult train(model::Vadeers m, const TrainingData& data, const TrainSchedule& schedule,
                  const model::LossWeights& weights, const TrainHooks& hooks) {
    schedule.validate();
    weights.validate();
    check_shapes(m.config(), data);
    Loop loop(m, data, schedule, weights, hooks);
    RunLog log = loop.run();
    return {std::move(m), std::move(log)};
}

TrainResult train(const TrainingData& data, const model::ModelConfig& config, const TrainSchedule& schedule,
                  const model::LossWeights& weights, const TrainHooks& hooks) {
    config.validate();
    return train(model::Vadeers::create(config, schedule.seed), data, schedule, weights, hooks);
}

}  // namespace vadeers::train
