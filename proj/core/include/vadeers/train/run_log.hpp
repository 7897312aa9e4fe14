#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/model/losses.hpp"

namespace vadeers::train {

/// Training protocol settings.
struct TrainSchedule {
    std::size_t joint_epochs = 150;
    std::size_t dspn_epochs = 50;
    double lr_joint = 0.005;
    double lr_dspn = 0.001;
    double dspn_lr_decay = 0.1;
    std::size_t dspn_decay_every = 10;
    std::size_t batch_size = 128;
    std::size_t dvae_break_every_steps = 1000;
    std::size_t dvae_break_epochs = 100;
    std::size_t dvae_break_batch = 8;
    std::uint64_t seed = 0;

    std::size_t total_epochs() const noexcept { return joint_epochs + dspn_epochs; }
    /// Learning rate of DSPN-only epoch `e` (0-based within that phase).
    double dspn_lr(std::size_t e) const;
    void validate() const;

    /// Shorter run for desk-scale synthetic experiments.
    static TrainSchedule desk();

    bool operator==(const TrainSchedule&) const = default;
};

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

enum class Phase { joint, dspn };

std::string to_string(Phase p);

enum class EventKind { phase_start, phase_end, break_start, break_end, freeze, lr_change };

std::string to_string(EventKind k);

struct RunEvent {
    EventKind kind = EventKind::phase_start;
    Phase phase = Phase::joint;
    /// Epoch index within the phase.
    std::size_t epoch = 0;
    /// Joint-phase optimizer steps completed so far.
    std::size_t step = 0;
    double lr = 0.0;
    std::optional<std::uint64_t> frozen_hash;

    bool operator==(const RunEvent&) const = default;
};

struct EpochRecord {
    Phase phase = Phase::joint;
    std::size_t epoch = 0;
    std::size_t batches = 0;
    std::size_t steps_after = 0;
    double lr = 0.0;
    /// Batch-mean loss terms.
    model::LossBreakdown loss;
    /// Standardized-scale IC50 RMSE on validation pairs (NaN when there are none).
    double val_ic50_rmse = 0.0;
    /// Hash of DVAE, CAE and mixture parameters at epoch end.
    std::uint64_t frozen_hash = 0;

    bool operator==(const EpochRecord&) const;
};

struct RunLog {
    TrainSchedule schedule;
    std::vector<EpochRecord> epochs;
    std::vector<RunEvent> events;
    std::size_t joint_steps = 0;
    std::size_t breaks = 0;
    double wall_seconds = 0.0;

    /// Wall clock excluded.
    bool operator==(const RunLog& other) const;

    /// One JSON object per line: a header, then epochs and events in order.
    std::string to_jsonl() const;
};

/// Checks the log against its schedule: epoch counts per phase, a break at
/// every multiple of dvae_break_every_steps and nowhere else, one freeze at
/// the phase boundary, constant frozen hash in the DSPN phase, and the DSPN
/// learning-rate decay. Returns the list of violations (empty when valid).
std::vector<std::string> verify_run_log(const RunLog& log);

}  // namespace vadeers::train
