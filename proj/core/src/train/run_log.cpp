#include "vadeers/train/run_log.hpp"

#include <cmath>

#include "vadeers/error.hpp"

namespace vadeers::train {
namespace {

nlohmann::json breakdown_json(const model::LossBreakdown& b) {
    return {{"smiles_mse", b.smiles_mse}, {"ip_mse", b.ip_mse},         {"log_prior", b.log_prior},
            {"entropy", b.entropy},       {"cae_mse", b.cae_mse},       {"dspn_mse", b.dspn_mse},
            {"dvae", b.dvae},             {"total", b.total},           {"observed_pairs", b.observed_pairs}};
}

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

double TrainSchedule::dspn_lr(std::size_t e) const {
    return lr_dspn * std::pow(dspn_lr_decay, static_cast<double>(e / dspn_decay_every));
}

void TrainSchedule::validate() const {
    auto fail = [](const std::string& m) { throw ContractError("train schedule: " + m); };
    if (joint_epochs + dspn_epochs == 0) fail("no epochs");
    if (!(lr_joint > 0.0) || !(lr_dspn > 0.0)) fail("learning rates must be positive");
    if (!(dspn_lr_decay > 0.0)) fail("dspn_lr_decay must be positive");
    if (dspn_decay_every == 0 || batch_size == 0 || dvae_break_every_steps == 0 || dvae_break_batch == 0) {
        fail("counts must be positive");
    }
}

TrainSchedule TrainSchedule::desk() {
    TrainSchedule s;
    s.joint_epochs = 40;
    s.dspn_epochs = 20;
    s.dvae_break_every_steps = 1000;
    s.dvae_break_epochs = 100;
    return s;
}

void to_json(nlohmann::json& j, const TrainSchedule& s) {
    j = nlohmann::json{{"total_epochs", s.total_epochs()},
                       {"joint_epochs", s.joint_epochs},
                       {"dspn_epochs", s.dspn_epochs},
                       {"lr_joint", s.lr_joint},
                       {"lr_dspn", s.lr_dspn},
                       {"dspn_lr_decay", s.dspn_lr_decay},
                       {"dspn_decay_every", s.dspn_decay_every},
                       {"batch_size", s.batch_size},
                       {"dvae_break_every_steps", s.dvae_break_every_steps},
                       {"dvae_break_epochs", s.dvae_break_epochs},
                       {"dvae_break_batch", s.dvae_break_batch},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
    const TrainSchedule d = s;
    s.joint_epochs = j.value("joint_epochs", d.joint_epochs);
    s.dspn_epochs = j.value("dspn_epochs", d.dspn_epochs);
    s.lr_joint = j.value("lr_joint", d.lr_joint);
    s.lr_dspn = j.value("lr_dspn", d.lr_dspn);
    s.dspn_lr_decay = j.value("dspn_lr_decay", d.dspn_lr_decay);
    s.dspn_decay_every = j.value("dspn_decay_every", d.dspn_decay_every);
    s.batch_size = j.value("batch_size", d.batch_size);
    s.dvae_break_every_steps = j.value("dvae_break_every_steps", d.dvae_break_every_steps);
    s.dvae_break_epochs = j.value("dvae_break_epochs", d.dvae_break_epochs);
    s.dvae_break_batch = j.value("dvae_break_batch", d.dvae_break_batch);
    s.seed = j.value("seed", d.seed);
    if (j.contains("total_epochs") && j.at("total_epochs").get<std::size_t>() != s.total_epochs()) {
        throw ContractError("train schedule: total_epochs must equal joint_epochs + dspn_epochs");
    }
}

std::string to_string(Phase p) { return p == Phase::joint ? "joint" : "dspn"; }

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::phase_start: return "phase_start";
        case EventKind::phase_end: return "phase_end";
        case EventKind::break_start: return "break_start";
        case EventKind::break_end: return "break_end";
        case EventKind::freeze: return "freeze";
        case EventKind::lr_change: return "lr_change";
    }
    return "unknown";
}

bool EpochRecord::operator==(const EpochRecord& o) const {
    const auto& a = loss;
    const auto& b = o.loss;
    return phase == o.phase && epoch == o.epoch && batches == o.batches && steps_after == o.steps_after &&
           lr == o.lr && frozen_hash == o.frozen_hash && same_double(val_ic50_rmse, o.val_ic50_rmse) &&
           a.smiles_mse == b.smiles_mse && a.ip_mse == b.ip_mse && a.log_prior == b.log_prior &&
           a.entropy == b.entropy && a.cae_mse == b.cae_mse && a.dspn_mse == b.dspn_mse && a.dvae == b.dvae &&
           a.total == b.total && a.observed_pairs == b.observed_pairs;
}

bool RunLog::operator==(const RunLog& o) const {
    return schedule == o.schedule && epochs == o.epochs && events == o.events && joint_steps == o.joint_steps &&
           breaks == o.breaks;
}

std::string RunLog::to_jsonl() const {
    std::string out;
    nlohmann::json header{{"record", "run"},
                          {"schedule", schedule},
                          {"joint_steps", joint_steps},
                          {"breaks", breaks},
                          {"wall_seconds", wall_seconds}};
    out += header.dump() + "\n";
    for (const auto& e : epochs) {
        nlohmann::json j{{"record", "epoch"},
                         {"phase", to_string(e.phase)},
                         {"epoch", e.epoch},
                         {"batches", e.batches},
                         {"steps_after", e.steps_after},
                         {"lr", e.lr},
                         {"loss", breakdown_json(e.loss)},
                         {"frozen_hash", e.frozen_hash}};
        j["val_ic50_rmse"] = std::isnan(e.val_ic50_rmse) ? nlohmann::json() : nlohmann::json(e.val_ic50_rmse);
        out += j.dump() + "\n";
    }
    for (const auto& ev : events) {
        nlohmann::json j{{"record", "event"},
                         {"kind", to_string(ev.kind)},
                         {"phase", to_string(ev.phase)},
                         {"epoch", ev.epoch},
                         {"step", ev.step},
                         {"lr", ev.lr}};
        if (ev.frozen_hash) j["frozen_hash"] = *ev.frozen_hash;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<std::string> verify_run_log(const RunLog& log) {
    std::vector<std::string> bad;
    const TrainSchedule& s = log.schedule;

    std::size_t joint = 0;
    std::size_t dspn = 0;
    bool seen_dspn = false;
    for (const auto& e : log.epochs) {
        if (e.phase == Phase::joint) {
            if (seen_dspn) bad.push_back("joint epoch after the DSPN phase started");
            if (e.epoch != joint) bad.push_back("joint epoch numbering broken at " + std::to_string(e.epoch));
            ++joint;
        } else {
            seen_dspn = true;
            if (e.epoch != dspn) bad.push_back("dspn epoch numbering broken at " + std::to_string(e.epoch));
            if (e.lr != s.dspn_lr(e.epoch)) {
                bad.push_back("dspn epoch " + std::to_string(e.epoch) + " ran at lr " + std::to_string(e.lr) +
                              ", expected " + std::to_string(s.dspn_lr(e.epoch)));
            }
            ++dspn;
        }
    }
    if (joint != s.joint_epochs) {
        bad.push_back(std::to_string(joint) + " joint epochs, schedule says " + std::to_string(s.joint_epochs));
    }
    if (dspn != s.dspn_epochs) {
        bad.push_back(std::to_string(dspn) + " dspn epochs, schedule says " + std::to_string(s.dspn_epochs));
    }

    // Breaks: start/end pairs at exact multiples of the step interval.
    std::vector<std::size_t> break_steps;
    std::optional<std::size_t> open;
    std::optional<std::uint64_t> freeze_hash;
    std::size_t freezes = 0;
    for (const auto& ev : log.events) {
        switch (ev.kind) {
            case EventKind::break_start:
                if (open) bad.push_back("nested break at step " + std::to_string(ev.step));
                open = ev.step;
                break;
            case EventKind::break_end:
                if (!open || *open != ev.step) bad.push_back("unmatched break end at step " + std::to_string(ev.step));
                if (open) break_steps.push_back(*open);
                open.reset();
                break;
            case EventKind::freeze:
                ++freezes;
                freeze_hash = ev.frozen_hash;
                if (ev.step != log.joint_steps) bad.push_back("freeze before the joint phase finished");
                break;
            default: break;
        }
    }
    if (open) bad.push_back("break at step " + std::to_string(*open) + " never ended");
    const std::size_t expected_breaks = log.joint_steps / s.dvae_break_every_steps;
    if (break_steps.size() != expected_breaks || log.breaks != expected_breaks) {
        bad.push_back(std::to_string(break_steps.size()) + " breaks, expected " + std::to_string(expected_breaks));
    }
    for (std::size_t i = 0; i < break_steps.size(); ++i) {
        if (break_steps[i] != (i + 1) * s.dvae_break_every_steps) {
            bad.push_back("break " + std::to_string(i) + " at step " + std::to_string(break_steps[i]) +
                          ", expected " + std::to_string((i + 1) * s.dvae_break_every_steps));
        }
    }

    if (s.dspn_epochs > 0) {
        if (freezes != 1 || !freeze_hash) {
            bad.push_back(std::to_string(freezes) + " freeze events, expected 1");
        } else {
            for (const auto& e : log.epochs) {
                if (e.phase == Phase::dspn && e.frozen_hash != *freeze_hash) {
                    bad.push_back("frozen parameters changed during dspn epoch " + std::to_string(e.epoch));
                }
            }
        }
        // An lr_change event opens every decay block.
        std::vector<std::size_t> lr_epochs;
        for (const auto& ev : log.events) {
            if (ev.kind != EventKind::lr_change) continue;
            lr_epochs.push_back(ev.epoch);
            if (ev.lr != s.dspn_lr(ev.epoch)) bad.push_back("lr_change event carries the wrong rate");
        }
        std::vector<std::size_t> want;
        for (std::size_t e = 0; e < s.dspn_epochs; e += s.dspn_decay_every) want.push_back(e);
        if (lr_epochs != want) bad.push_back("lr changes do not follow the decay period");
    }
    return bad;
}

}  // namespace vadeers::train
