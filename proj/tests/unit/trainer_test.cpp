#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>

#include "fixtures.hpp"
#include "vadeers/data/synthetic.hpp"
#include "vadeers/error.hpp"
#include "vadeers/train/checkpoint.hpp"
#include "vadeers/train/pipeline.hpp"
#include "vadeers/train/trainer.hpp"

using namespace vadeers;
using model::PriorVariant;
using train::Phase;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

train::Prepared small_prepared(std::uint64_t seed = 0) {
    const auto syn = data::generate_synthetic(fixture::small_spec(seed));
    return train::prepare(syn.dataset, train::SplitSpec{5, 5, seed}, 3, seed);
}

std::set<std::size_t> cells_of(const std::vector<train::Pair>& pairs) {
    std::set<std::size_t> out;
    for (const auto& p : pairs) out.insert(p.cell);
    return out;
}

std::uint64_t hash_of(const model::Vadeers& m, std::vector<nn::ParamId> ids) {
    return nn::hash_params(m.params(), ids);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("split at the original screen's size") {
    const auto syn = data::generate_synthetic(data::SyntheticSpec::paper());
    const auto split = train::split_by_cell_line(syn.dataset, train::SplitSpec{100, 100, 5});
    CHECK(split.train_cells.size() == 722);
    CHECK(split.val_cells.size() == 100);
    CHECK(split.test_cells.size() == 100);
    CHECK(split.train_pairs.size() + split.val_pairs.size() + split.test_pairs.size() ==
          syn.dataset.sensitivities.size());

    std::set<std::size_t> all;
    for (const auto* part : {&split.train_cells, &split.val_cells, &split.test_cells}) {
        CHECK(std::is_sorted(part->begin(), part->end()));
        all.insert(part->begin(), part->end());
    }
    CHECK(all.size() == 922);

    const std::set<std::size_t> val(split.val_cells.begin(), split.val_cells.end());
    const std::set<std::size_t> test(split.test_cells.begin(), split.test_cells.end());
    for (auto c : cells_of(split.val_pairs)) CHECK(val.count(c));
    for (auto c : cells_of(split.test_pairs)) CHECK(test.count(c));
    for (auto c : cells_of(split.train_pairs)) CHECK_FALSE((val.count(c) || test.count(c)));

    CHECK(train::split_by_cell_line(syn.dataset, train::SplitSpec{100, 100, 5}) == split);
    const auto other = train::split_by_cell_line(syn.dataset, train::SplitSpec{100, 100, 6});
    CHECK(other.val_cells != split.val_cells);
    CHECK(train::hash_cells(other.train_cells) != train::hash_cells(split.train_cells));
}

TEST_CASE("split needs more cells than it holds out") {
    auto spec = fixture::small_spec();
    const auto ds = data::generate_synthetic(spec).dataset;
    CHECK_THROWS_AS(train::split_by_cell_line(ds, train::SplitSpec{20, 20, 0}), DataError);
    CHECK_NOTHROW(train::split_by_cell_line(ds, train::SplitSpec{20, 19, 0}));
}

TEST_CASE("schedule learning-rate decay") {
    train::TrainSchedule s;
    CHECK(s.total_epochs() == 200);
    CHECK(s.dspn_lr(0) == doctest::Approx(1e-3));
    CHECK(s.dspn_lr(9) == doctest::Approx(1e-3));
    CHECK(s.dspn_lr(10) == doctest::Approx(1e-4));
    CHECK(s.dspn_lr(49) == doctest::Approx(1e-7));
    s.batch_size = 0;
    CHECK_THROWS_AS(s.validate(), ContractError);
}

TEST_CASE("without joint epochs the drug VAE and cell autoencoder keep their initial weights") {
    const auto prep = small_prepared();
    const auto cfg = fixture::small_model(PriorVariant::gmm_constrained);
    const auto init = model::Vadeers::create(cfg, 3);
    const auto result = train::train(prep.training, cfg, fixture::short_schedule(0, 3, 3), {});
    CHECK(hash_of(result.model, train::frozen_ids(result.model)) == hash_of(init, train::frozen_ids(init)));
    CHECK(hash_of(result.model, result.model.dspn_ids()) != hash_of(init, init.dspn_ids()));
    CHECK(result.log.joint_steps == 0);
    CHECK(result.log.breaks == 0);
    CHECK(train::verify_run_log(result.log).empty());
}

TEST_CASE("run log follows the schedule") {
    const auto prep = small_prepared(1);
    for (auto variant : fixture::kVariants) {
        CAPTURE(model::to_string(variant));
        const auto cfg = fixture::small_model(variant);
        const auto sched = fixture::short_schedule(6, 5, 1);
        const auto result = train::train(prep.training, cfg, sched, {});
        const auto& log = result.log;
        CHECK(train::verify_run_log(log).empty());

        const std::size_t per_epoch = (prep.training.split.train_pairs.size() + 31) / 32;
        CHECK(log.joint_steps == 6 * per_epoch);
        CHECK(log.breaks == log.joint_steps / 20);
        REQUIRE(log.breaks > 0);

        std::vector<std::size_t> break_steps;
        std::optional<std::uint64_t> frozen;
        for (const auto& e : log.events) {
            if (e.kind == train::EventKind::break_start) break_steps.push_back(e.step);
            if (e.kind == train::EventKind::freeze) frozen = e.frozen_hash;
        }
        REQUIRE(break_steps.size() == log.breaks);
        for (std::size_t i = 0; i < break_steps.size(); ++i) CHECK(break_steps[i] == 20 * (i + 1));

        REQUIRE(frozen.has_value());
        std::size_t dspn_epochs = 0;
        for (const auto& ep : log.epochs) {
            if (ep.phase != Phase::dspn) continue;
            CHECK(ep.frozen_hash == *frozen);
            CHECK(ep.lr == doctest::Approx(1e-3 * std::pow(0.1, static_cast<double>(ep.epoch / 2))));
            ++dspn_epochs;
        }
        CHECK(dspn_epochs == 5);
        CHECK(hash_of(result.model, train::frozen_ids(result.model)) == *frozen);
    }
}

TEST_CASE("tampered run logs are rejected") {
    const auto prep = small_prepared(2);
    const auto result =
        train::train(prep.training, fixture::small_model(PriorVariant::gmm_constrained), fixture::short_schedule(3, 3), {});
    REQUIRE(train::verify_run_log(result.log).empty());

    auto log = result.log;
    log.events.erase(std::find_if(log.events.begin(), log.events.end(),
                                  [](const auto& e) { return e.kind == train::EventKind::break_start; }));
    CHECK_FALSE(train::verify_run_log(log).empty());

    log = result.log;
    log.epochs.back().frozen_hash ^= 1;
    CHECK_FALSE(train::verify_run_log(log).empty());

    log = result.log;
    log.epochs.back().lr *= 10;
    CHECK_FALSE(train::verify_run_log(log).empty());

    log = result.log;
    log.epochs.pop_back();
    CHECK_FALSE(train::verify_run_log(log).empty());
}

TEST_CASE("run log jsonl has a header, epochs and events") {
    const auto prep = small_prepared();
    const auto result =
        train::train(prep.training, fixture::small_model(PriorVariant::gmm_unconstrained), fixture::short_schedule(2, 2), {});
    std::istringstream in(result.log.to_jsonl());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        CHECK(nlohmann::json::accept(line));
        ++lines;
    }
    CHECK(lines == 1 + result.log.epochs.size() + result.log.events.size());
}

TEST_CASE("training lowers the loss") {
    const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
    const auto prep = train::prepare(syn.dataset, train::SplitSpec{20, 20, 0}, 3, 0);
    auto sched = train::TrainSchedule::desk();
    sched.joint_epochs = 20;
    sched.dspn_epochs = 2;
    const auto result = train::train(prep.training, model::ModelConfig::desk(), sched, {});
    const auto& epochs = result.log.epochs;
    const auto first = epochs.front();
    const auto last_joint = *std::find_if(epochs.rbegin(), epochs.rend(),
                                          [](const auto& e) { return e.phase == Phase::joint; });
    CHECK(last_joint.loss.total < 0.5 * first.loss.total);
    CHECK(std::isfinite(epochs.back().val_ic50_rmse));
}

TEST_CASE("equal seeds give equal runs") {
    const auto prep = small_prepared(3);
    const auto cfg = fixture::small_model(PriorVariant::gmm_unconstrained);
    const auto a = train::train(prep.training, cfg, fixture::short_schedule(3, 2, 8), {});
    const auto b = train::train(prep.training, cfg, fixture::short_schedule(3, 2, 8), {});
    const auto c = train::train(prep.training, cfg, fixture::short_schedule(3, 2, 9), {});
    CHECK(a.log == b.log);
    CHECK(a.model.params() == b.model.params());
    CHECK_FALSE(a.log == c.log);
}

TEST_CASE("only training cells reach a gradient") {
    const auto prep = small_prepared(4);
    const auto& split = prep.training.split;
    const std::set<std::size_t> train_cells(split.train_cells.begin(), split.train_cells.end());
    std::set<std::size_t> seen;
    train::TrainHooks hooks;
    hooks.on_batch_cells = [&](std::span<const std::size_t> cells) { seen.insert(cells.begin(), cells.end()); };
    std::size_t epochs = 0;
    hooks.on_epoch = [&](const train::EpochRecord&) { ++epochs; };
    train::train(prep.training, fixture::small_model(PriorVariant::gmm_constrained), fixture::short_schedule(2, 2), {},
                 hooks);
    CHECK_FALSE(seen.empty());
    for (auto c : seen) CHECK(train_cells.count(c));
    for (auto c : split.val_cells) CHECK_FALSE(seen.count(c));
    for (auto c : split.test_cells) CHECK_FALSE(seen.count(c));
    CHECK(epochs == 4);
}

TEST_CASE("checkpoints round-trip exactly") {
    const auto prep = small_prepared(5);
    for (auto variant : fixture::kVariants) {
        CAPTURE(model::to_string(variant));
        const auto cfg = fixture::small_model(variant);
        const auto trained = train::train(prep.training, cfg, fixture::short_schedule(1, 1, 5), {}).model;
        fixture::TempDir dir("ckpt");
        const auto ckpt = train::make_checkpoint(trained, prep.scaler, {{"seed", 5}});
        train::save_checkpoint(ckpt, dir / "a.bin");
        const auto loaded = train::load_checkpoint(dir / "a.bin");
        train::save_checkpoint(loaded, dir / "b.bin");
        CHECK(read_bytes(dir / "a.bin") == read_bytes(dir / "b.bin"));
        CHECK(loaded.params == trained.params());
        CHECK(loaded.config == cfg);
        REQUIRE(loaded.scaler.has_value());
        CHECK(*loaded.scaler == prep.scaler);
        CHECK(loaded.meta == ckpt.meta);
        CHECK(loaded.params.find("gmm.means").has_value() == cfg.has_gmm());

        const auto& d = prep.training.drugs;
        const auto drug_mu = trained.encode_means(d.smiles);
        const auto cell_lat = trained.cell_latents(nn::gather_rows(prep.training.cells, std::vector<std::size_t>(
                                                                                          d.rows(), 0)));
        const auto before = trained.predict(drug_mu, cell_lat);
        const auto restored = loaded.model();
        const auto after = restored.predict(restored.encode_means(d.smiles), cell_lat);
        CHECK(before == after);
    }
}

TEST_CASE("checkpoint load errors") {
    const auto cfg = fixture::small_model(PriorVariant::gmm_constrained);
    const auto m = model::Vadeers::create(cfg, 0);
    fixture::TempDir dir("ckpt");
    train::save_checkpoint(train::make_checkpoint(m, std::nullopt, {}), dir / "a.bin");

    auto wrong = cfg;
    wrong.smiles_dim = 300;
    try {
        train::load_checkpoint(dir / "a.bin", &wrong);
        FAIL("no error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("smiles_dim") != std::string::npos);
        CHECK(msg.find("300") != std::string::npos);
        CHECK(msg.find('8') != std::string::npos);
    }
    CHECK_NOTHROW(train::load_checkpoint(dir / "a.bin", &cfg));

    std::string bytes = read_bytes(dir / "a.bin");
    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(dir / "magic.bin", std::ios::binary) << bad;
        CHECK_THROWS_AS(train::load_checkpoint(dir / "magic.bin"), DataError);
    }
    {
        std::string bad = bytes;
        bad[8] = 99;
        std::ofstream(dir / "version.bin", std::ios::binary) << bad;
        CHECK_THROWS_AS(train::load_checkpoint(dir / "version.bin"), DataError);
    }
    {
        std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
        CHECK_THROWS_AS(train::load_checkpoint(dir / "short.bin"), DataError);
    }
    CHECK_THROWS_AS(train::load_checkpoint(dir / "missing.bin"), DataError);
}

TEST_CASE("a non-finite loss stops training with the last good weights") {
    const auto prep = small_prepared(6);
    auto m = model::Vadeers::create(fixture::small_model(PriorVariant::gmm_constrained), 0);
    // The output bias alone makes every prediction 1e300, whatever the hidden layers do.
    const auto biases = m.params().with_prefix("dspn.");
    auto& b = m.params().value(biases.back());
    REQUIRE(m.params().name(biases.back()).ends_with(".bias"));
    b.data()[0] = 1e300;
    const auto start = m.params();
    try {
        train::train(m, prep.training, fixture::short_schedule(2, 2), {});
        FAIL("no divergence");
    } catch (const train::DivergenceError& e) {
        CHECK(e.last_good() == start);
        CHECK(e.log().joint_steps == 0);
        CHECK(std::string(e.what()).find("joint") != std::string::npos);
    }
}

TEST_CASE("a step size that overflows the forward pass also counts as divergence") {
    const auto prep = small_prepared(6);
    auto sched = fixture::short_schedule(2, 2);
    sched.lr_joint = 1e300;
    try {
        train::train(prep.training, fixture::small_model(PriorVariant::gmm_constrained), sched, {});
        FAIL("no divergence");
    } catch (const train::DivergenceError& e) {
        CHECK(e.log().joint_steps >= 1);
        for (std::size_t id = 0; id < e.last_good().size(); ++id) CHECK(e.last_good().value(id).all_finite());
    }
}

TEST_CASE("pair rmse on held-out cells") {
    const auto prep = small_prepared(7);
    const auto result =
        train::train(prep.training, fixture::small_model(PriorVariant::gmm_constrained), fixture::short_schedule(4, 4), {});
    const double val = train::pair_rmse(result.model, prep.training, prep.training.split.val_pairs);
    CHECK(std::isfinite(val));
    CHECK(val > 0.0);
    CHECK(result.log.epochs.back().val_ic50_rmse == doctest::Approx(val).epsilon(1e-12));
}

}  // TEST_SUITE
