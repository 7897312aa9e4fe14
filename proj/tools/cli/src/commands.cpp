#include "vadeers/cli/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vadeers/data/csv.hpp"
#include "vadeers/eval/metrics.hpp"
#include "vadeers/train/pipeline.hpp"
#include "vadeers/train/trainer.hpp"

namespace vadeers::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string csv_row(std::vector<std::string> cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

data::Dataset load_data(const RunConfig& c) {
    if (!c.data) throw UsageError("--data is required");
    return data::load_csv(*c.data);
}

train::Checkpoint load_ckpt(const RunConfig& c) {
    if (!c.checkpoint) throw UsageError("--checkpoint is required");
    auto ckpt = train::load_checkpoint(*c.checkpoint);
    if (!ckpt.scaler) throw DataError("checkpoint " + c.checkpoint->string() + " carries no scaler");
    return ckpt;
}

model::ModelConfig model_config_for(const RunConfig& c, const data::Dataset& ds) {
    model::ModelConfig mc = c.model;
    mc.smiles_dim = ds.smiles_dim;
    mc.ip_dim = ds.ip_dim;
    mc.bio_dim = ds.bio_dim;
    mc.guiding_labels = c.guiding_labels;
    mc.prior = c.variant;
    try {
        mc.validate();
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
    return mc;
}

json run_meta(const RunConfig& c, const data::Dataset& ds, const train::Prepared& prep, const char* status) {
    return json{{"variant", std::string(model::to_string(c.variant))},
                {"seed", c.seed},
                {"split", c.split},
                {"guiding_labels", c.guiding_labels},
                {"label_seed", c.seed},
                {"dataset_fingerprint", data::fingerprint(ds)},
                {"train_cells_hash", train::hash_cells(prep.training.split.train_cells)},
                {"schedule", c.schedule},
                {"weights", c.weights},
                {"status", status}};
}

/// Test (or validation) metrics plus the PCA plot data.
void evaluate_into(const fs::path& dir, const model::Vadeers& model, const train::TrainingData& training,
                   const data::Scaler& scaler, const data::Dataset& ds, const RunConfig& c, const char* report_file,
                   bool exports) {
    eval::EvaluateOptions options;
    options.n_per_component = c.n;
    options.seed = c.seed;
    const auto ev = eval::evaluate(model, training, scaler, options);
    write_json(dir / report_file, ev.report);
    if (!exports) return;

    if (ev.latent_means.rows() >= 3 && ev.latent_means.cols() >= 2) {
        std::vector<std::size_t> labeled;
        for (std::size_t i = 0; i < training.drugs.labels.size(); ++i) {
            if (training.drugs.labels[i]) labeled.push_back(i);
        }
        const auto p = eval::pca2(ev.latent_means);
        std::string text = csv_row({"drug_id", "label", "pc1", "pc2"});
        for (std::size_t r = 0; r < labeled.size(); ++r) {
            text += csv_row({ds.drugs[labeled[r]].id, std::to_string(ev.latent_labels[r]),
                             data::format_double(p.projection(r, 0)), data::format_double(p.projection(r, 1))});
        }
        write_text(dir / kLatentPcaFile, text);
    }

    if (ev.generated_ip.rows() > 0) {
        std::vector<std::size_t> labeled;
        for (std::size_t i = 0; i < training.drugs.labels.size(); ++i) {
            if (training.drugs.labels[i] && ds.drugs[i].inhibition_profile) labeled.push_back(i);
        }
        const nn::Matrix truth = scaler.ip.inverse(nn::gather_rows(training.drugs.ip, labeled));
        nn::Matrix stacked(truth.rows() + ev.generated_ip.rows(), truth.cols());
        for (std::size_t r = 0; r < truth.rows(); ++r) {
            std::copy(truth.row(r).begin(), truth.row(r).end(), stacked.row(r).begin());
        }
        for (std::size_t r = 0; r < ev.generated_ip.rows(); ++r) {
            std::copy(ev.generated_ip.row(r).begin(), ev.generated_ip.row(r).end(),
                      stacked.row(truth.rows() + r).begin());
        }
        const auto p = eval::pca2(stacked);
        std::string text = csv_row({"source", "group", "pc1", "pc2"});
        for (std::size_t r = 0; r < stacked.rows(); ++r) {
            const bool real = r < truth.rows();
            const std::size_t group =
                real ? *training.drugs.labels[labeled[r]] : ev.generated_components[r - truth.rows()];
            text += csv_row({real ? "true" : "generated", std::to_string(group),
                             data::format_double(p.projection(r, 0)), data::format_double(p.projection(r, 1))});
        }
        write_text(dir / kGeneratedPcaFile, text);
    }
}

struct Trained {
    train::Prepared prep;
    model::Vadeers model;
};

/// Trains one variant into `dir`: checkpoint, run log, status and the
/// validation report. On divergence the last good parameters and the log so
/// far are written under "partial" names before the error propagates.
Trained train_into(const fs::path& dir, const RunConfig& c, const data::Dataset& ds) {
    fs::create_directories(dir);
    write_json(dir / kResolvedConfigFile, c);

    auto prep = train::prepare(ds, c.split, c.guiding_labels, c.seed);
    const model::ModelConfig mc = model_config_for(c, ds);
    const std::string tag = fmt::format("{} seed {}", model::to_string(c.variant), c.seed);

    train::TrainHooks hooks;
    hooks.on_epoch = [&](const train::EpochRecord& r) {
        const std::size_t total = r.phase == train::Phase::joint ? c.schedule.joint_epochs : c.schedule.dspn_epochs;
        if ((r.epoch + 1) % 10 == 0 || r.epoch + 1 == total) {
            spdlog::info("[{}] {} epoch {}/{} loss {:.4f} val rmse {:.4f}", tag, train::to_string(r.phase),
                         r.epoch + 1, total, r.loss.total, r.val_ic50_rmse);
        }
    };

    try {
        auto result = train::train(prep.training, mc, c.schedule, c.weights, hooks);
        auto ckpt = train::make_checkpoint(result.model, prep.scaler, run_meta(c, ds, prep, "complete"));
        train::save_checkpoint(ckpt, dir / kCheckpointFile);
        write_text(dir / kRunLogFile, result.log.to_jsonl());
        write_json(dir / kStatusFile, json{{"status", "complete"},
                                           {"joint_steps", result.log.joint_steps},
                                           {"breaks", result.log.breaks}});
        if (!prep.training.split.val_pairs.empty()) {
            train::TrainingData val = prep.training;
            val.split.test_pairs = val.split.val_pairs;
            evaluate_into(dir, result.model, val, prep.scaler, ds, c, kValReportFile, false);
        }
        return {std::move(prep), std::move(result.model)};
    } catch (const train::DivergenceError& e) {
        const auto partial = model::Vadeers::bind(mc, e.last_good());
        train::save_checkpoint(train::make_checkpoint(partial, prep.scaler, run_meta(c, ds, prep, "diverged")),
                               dir / kPartialCheckpointFile);
        write_text(dir / kPartialRunLogFile, e.log().to_jsonl());
        write_json(dir / kStatusFile, json{{"status", "diverged"}, {"message", e.what()}});
        throw;
    }
}

std::string seed_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

}  // namespace

fs::path run_dir(const RunConfig& c, std::string_view command) {
    if (c.out) return *c.out;
    const char* env = std::getenv("VADEERS_RUN_ROOT");
    const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    std::string name(command);
    if (command == "train") name += "-" + std::string(model::to_string(c.variant));
    if (command == "generate" && c.component) name += "-k" + std::to_string(*c.component);
    if (command != "predict") name += "-" + seed_name(c.seed);
    return root / name;
}

fs::path cmd_synth(const RunConfig& c) {
    const fs::path dir = run_dir(c, "synth");
    const auto synth = data::generate_synthetic(c.generator);
    const auto manifest = synth.manifest();
    data::save_csv(synth.dataset, dir, &manifest);
    std::string text = csv_row({"drug_id", "cluster"});
    for (std::size_t i = 0; i < synth.dataset.drugs.size(); ++i) {
        text += csv_row({synth.dataset.drugs[i].id, std::to_string(synth.planted_labels[i])});
    }
    write_text(dir / kPlantedFile, text);
    spdlog::info("wrote {} drugs, {} cells, {} pairs to {}", manifest.n_drugs, manifest.n_cells, manifest.n_pairs,
                 dir.string());
    return dir;
}

fs::path cmd_train(const RunConfig& c) {
    const auto ds = load_data(c);
    const fs::path dir = run_dir(c, "train");
    train_into(dir, c, ds);
    return dir;
}

fs::path cmd_generate(const RunConfig& c) {
    const auto ckpt = load_ckpt(c);
    const auto model = ckpt.model();
    const auto& cfg = ckpt.config;
    Rng rng(c.seed);

    nn::Matrix z;
    std::vector<std::string> components(c.n);
    if (c.component && !cfg.has_gmm()) {
        throw UsageError("component-conditioned generation needs a mixture prior; this vanilla checkpoint "
                         "supports only unconditioned sampling");
    }
    if (c.component) {
        if (*c.component >= cfg.components) {
            throw UsageError(fmt::format("component {} out of range: the checkpoint has {} components",
                                         *c.component, cfg.components));
        }
        z = gmm::sample_component(*c.component, model.prior(), c.n, rng);
        std::fill(components.begin(), components.end(), std::to_string(*c.component));
    } else if (cfg.has_gmm()) {
        auto draw = gmm::sample_mixture(model.prior(), c.n, rng);
        z = std::move(draw.samples);
        for (std::size_t i = 0; i < c.n; ++i) components[i] = std::to_string(draw.components[i]);
    } else {
        z = gmm::sample_component(0, model.prior(), c.n, rng);
    }

    const nn::Matrix smiles = ckpt.scaler->smiles.inverse(model.decode_batch_smiles(z));
    const nn::Matrix ip = ckpt.scaler->ip.inverse(model.decode_batch_ip(z));

    std::vector<std::string> header{"component"};
    for (std::size_t j = 0; j < smiles.cols(); ++j) header.push_back("e" + std::to_string(j));
    for (std::size_t j = 0; j < ip.cols(); ++j) header.push_back("k" + std::to_string(j));
    std::string text = csv_row(header);
    for (std::size_t i = 0; i < c.n; ++i) {
        std::vector<std::string> row{components[i]};
        for (double v : smiles.row(i)) row.push_back(data::format_double(v));
        for (double v : ip.row(i)) row.push_back(data::format_double(v));
        text += csv_row(std::move(row));
    }
    const fs::path dir = run_dir(c, "generate");
    fs::create_directories(dir);
    write_text(dir / kGeneratedFile, text);
    return dir;
}

std::vector<double> predict_ic50(const train::Checkpoint& ckpt, const nn::Matrix& drugs, const nn::Matrix& cells) {
    const auto& cfg = ckpt.config;
    if (drugs.cols() != cfg.smiles_dim) {
        throw DataError(fmt::format("drug embedding width is {}, the checkpoint expects smiles_dim {}", drugs.cols(),
                                    cfg.smiles_dim));
    }
    if (cells.cols() != cfg.bio_dim) {
        throw DataError(fmt::format("cell feature width is {}, the checkpoint expects bio_dim {}", cells.cols(),
                                    cfg.bio_dim));
    }
    if (drugs.rows() != cells.rows()) {
        throw DataError(fmt::format("{} drug rows but {} cell rows; predictions pair row i with row i", drugs.rows(),
                                    cells.rows()));
    }
    if (!ckpt.scaler) throw DataError("checkpoint carries no scaler");
    const auto model = ckpt.model();
    const nn::Matrix mu = model.encode_means(ckpt.scaler->smiles.transform(drugs));
    const nn::Matrix cl = model.cell_latents(ckpt.scaler->cells.transform(cells));
    const nn::Matrix pred = model.predict(mu, cl);
    std::vector<double> out(pred.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ckpt.scaler->inverse_ic50(pred(i, 0));
    return out;
}

fs::path cmd_predict(const RunConfig& c) {
    const auto ckpt = load_ckpt(c);
    if (!c.drugs || !c.cells) throw UsageError("predict needs --drugs and --cells");
    const auto drugs = data::read_id_table(*c.drugs);
    const auto cells = data::read_id_table(*c.cells);
    const auto pred = predict_ic50(ckpt, drugs.values, cells.values);

    std::string text = csv_row({"drug_id", "cell_id", "ic50"});
    for (std::size_t i = 0; i < pred.size(); ++i) {
        text += csv_row({drugs.ids[i], cells.ids[i], data::format_double(pred[i])});
    }
    const fs::path dir = run_dir(c, "predict");
    fs::create_directories(dir);
    write_text(dir / kPredictionsFile, text);
    return dir;
}

fs::path cmd_evaluate(const RunConfig& c) {
    const auto ckpt = load_ckpt(c);
    const auto ds = load_data(c);
    const json& meta = ckpt.meta;
    if (!meta.contains("split") || !meta.contains("dataset_fingerprint") || !meta.contains("train_cells_hash")) {
        throw DataError("checkpoint lacks the split metadata needed for evaluation");
    }

    if (data::fingerprint(ds) != meta.at("dataset_fingerprint").get<std::uint64_t>()) {
        throw DataError("dataset does not match the one the checkpoint was trained on (fingerprint differs)");
    }
    auto split = meta.at("split").get<train::SplitSpec>();
    if (c.seed_given) split.seed = c.seed;
    const auto guiding = meta.value("guiding_labels", c.guiding_labels);
    const auto label_seed = meta.value("label_seed", split.seed);
    const auto prep = train::prepare(ds, split, guiding, label_seed);
    if (train::hash_cells(prep.training.split.train_cells) != meta.at("train_cells_hash").get<std::uint64_t>()) {
        throw DataError(fmt::format("split seed {} does not reproduce the training split of this checkpoint",
                                    split.seed));
    }

    RunConfig rc = c.with_seed(split.seed);
    rc.variant = ckpt.config.prior;
    const fs::path dir = run_dir(rc, "evaluate");
    fs::create_directories(dir);
    evaluate_into(dir, ckpt.model(), prep.training, *ckpt.scaler, ds, rc, kReportFile, true);
    return dir;
}

std::map<std::string, MetricSummary> aggregate(const std::vector<eval::MetricReport>& reports) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : reports) {
        const json j = r;
        for (const auto& item : j.items()) {
            if (item.key() == "seed" || item.key() == "n_test_pairs") continue;
            auto& bucket = values[item.key()];
            if (item.value().is_number()) {
                const double v = item.value().get<double>();
                if (std::isfinite(v)) bucket.push_back(v);
            }
        }
    }
    std::map<std::string, MetricSummary> out;
    for (const auto& [name, v] : values) {
        if (v.empty()) continue;
        MetricSummary s;
        s.count = v.size();
        for (double x : v) s.mean += x;
        s.mean /= static_cast<double>(v.size());
        for (double x : v) s.std += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(s.std / static_cast<double>(v.size()));
        out[name] = s;
    }
    return out;
}

std::string format_mean_std(const MetricSummary& s) { return fmt::format("{:.3f} ± {:.3f}", s.mean, s.std); }

fs::path cmd_experiment(const RunConfig& c) {
    const fs::path dir = run_dir(c, "experiment");
    fs::create_directories(dir);
    write_json(dir / kResolvedConfigFile, c);

    data::Dataset ds;
    if (c.data) {
        ds = data::load_csv(*c.data);
    } else {
        RunConfig sc = c;
        sc.out = dir / "data";
        cmd_synth(sc);
        ds = data::load_csv(dir / "data");
    }

    struct Cell {
        model::PriorVariant variant;
        std::uint64_t seed;
        std::optional<eval::MetricReport> report;
        std::exception_ptr error;
        std::string message;
    };
    std::vector<Cell> cells;
    for (auto v : c.variants) {
        for (std::size_t i = 0; i < c.seeds; ++i) cells.push_back({v, c.seed + i, std::nullopt, nullptr, {}});
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            Cell& cell = cells[i];
            RunConfig cc = c.with_seed(cell.seed);
            cc.variant = cell.variant;
            cc.model.prior = cell.variant;
            const fs::path cdir = dir / std::string(model::to_string(cell.variant)) / seed_name(cell.seed);
            try {
                const auto trained = train_into(cdir, cc, ds);
                evaluate_into(cdir, trained.model, trained.prep.training, trained.prep.scaler, ds, cc, kReportFile,
                              true);
                std::ifstream in(cdir / kReportFile);
                cell.report = json::parse(in).get<eval::MetricReport>();
            } catch (const std::exception& e) {
                cell.error = std::current_exception();
                cell.message = e.what();
                spdlog::error("{} seed {} failed: {}", model::to_string(cell.variant), cell.seed, e.what());
            }
        }
    };
    const std::size_t n_threads = std::min(c.jobs, cells.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    json summary{{"seeds", json::array()}, {"variants", json::object()}, {"failures", json::array()}};
    for (std::size_t i = 0; i < c.seeds; ++i) summary["seeds"].push_back(c.seed + i);
    std::ostringstream table;
    table << fmt::format("{:<20} {:<26} {}\n", "variant", "metric", "mean ± std");
    for (auto v : c.variants) {
        const std::string name(model::to_string(v));
        std::vector<eval::MetricReport> reports;
        for (const auto& cell : cells) {
            if (cell.variant == v && cell.report) reports.push_back(*cell.report);
        }
        json metrics = json::object();
        for (const auto& [metric, s] : aggregate(reports)) {
            metrics[metric] = {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
            table << fmt::format("{:<20} {:<26} {}\n", name, metric, format_mean_std(s));
        }
        summary["variants"][name] = {{"runs", reports.size()}, {"metrics", metrics}};
    }
    for (const auto& cell : cells) {
        if (cell.error) {
            summary["failures"].push_back(
                {{"variant", std::string(model::to_string(cell.variant))}, {"seed", cell.seed}, {"error", cell.message}});
        }
    }
    write_json(dir / kSummaryJsonFile, summary);
    write_text(dir / kSummaryTextFile, table.str());

    for (const auto& cell : cells) {
        if (cell.error) std::rethrow_exception(cell.error);
    }
    return dir;
}

}  // namespace vadeers::cli
