#include <algorithm>
#include <filesystem>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "vadeers/cli/commands.hpp"

namespace vadeers::cli {
namespace {

using Command = std::filesystem::path (*)(const RunConfig&);

struct Entry {
    const char* name;
    const char* help;
    Command fn;
};

constexpr Entry kCommands[] = {
    {"synth", "Write a synthetic dataset directory", cmd_synth},
    {"train", "Train one prior variant on a dataset", cmd_train},
    {"generate", "Sample drugs from a trained prior", cmd_generate},
    {"predict", "Predict IC50 for drug/cell row pairs", cmd_predict},
    {"evaluate", "Compute the metric report and plot exports", cmd_evaluate},
    {"experiment", "Train and evaluate every variant over several seeds", cmd_experiment},
};

/// Routes the default logger to `err` until destroyed; the stream may not outlive run().
class LoggerScope {
public:
    LoggerScope(std::ostream& err, bool quiet) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        auto logger = std::make_shared<spdlog::logger>("vadeers", sink);
        logger->set_pattern("%v");
        logger->set_level(quiet ? spdlog::level::warn : spdlog::level::info);
        spdlog::set_default_logger(logger);
    }
    ~LoggerScope() { spdlog::set_default_logger(previous_); }
    LoggerScope(const LoggerScope&) = delete;
    LoggerScope& operator=(const LoggerScope&) = delete;

private:
    std::shared_ptr<spdlog::logger> previous_;
};

int fail(std::ostream& err, int code, const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Drug sensitivity prediction and guided drug generation", "vadeers"};
    app.require_subcommand(1);

    Overrides o;
    bool quiet = false;
    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file");
        sub->add_option("--seed", o.seed, "Run seed");
        sub->add_option("--variant", o.variant, "vanilla, gmm_constrained or gmm_unconstrained");
        sub->add_option("--data", o.data, "Dataset directory");
        sub->add_option("--out", o.out, "Run directory");
        sub->add_option("--component", o.component, "Mixture component to sample from");
        sub->add_option("--n", o.n, "Number of generated samples per component");
        sub->add_option("--scale", o.scale, "Preset: desk or paper");
        sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
        sub->add_option("--drugs", o.drugs, "Drug embedding CSV (predict)");
        sub->add_option("--cells", o.cells, "Cell feature CSV (predict)");
        sub->add_option("--seeds", o.seeds, "Seeds per variant (experiment)");
        sub->add_option("--jobs", o.jobs, "Parallel runs (experiment)");
        sub->add_flag("-q,--quiet", quiet, "Only log warnings and errors");
    };

    Command chosen = nullptr;
    for (const auto& entry : kCommands) {
        CLI::App* sub = app.add_subcommand(entry.name, entry.help);
        add_flags(sub);
        sub->callback([&chosen, fn = entry.fn] { chosen = fn; });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    const LoggerScope logging(err, quiet);
    try {
        const auto file = o.config ? read_config_file(*o.config) : nlohmann::json::object();
        const RunConfig config = resolve(o, file);
        config.validate();
        const auto dir = chosen(config);
        out << dir.string() << "\n";
        return 0;
    } catch (const UsageError& e) {
        return fail(err, 1, e);
    } catch (const ContractError& e) {
        return fail(err, 1, e);
    } catch (const IndexError& e) {
        return fail(err, 1, e);
    } catch (const DataError& e) {
        return fail(err, 2, e);
    } catch (const NumericError& e) {
        return fail(err, 3, e);
    } catch (const nlohmann::json::exception& e) {
        return fail(err, 2, e);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(err, 2, e);
    } catch (const std::exception& e) {
        return fail(err, 1, e);
    }
}

}  // namespace vadeers::cli
