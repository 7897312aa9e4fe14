#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/data/synthetic.hpp"
#include "vadeers/error.hpp"
#include "vadeers/model/config.hpp"
#include "vadeers/train/run_log.hpp"
#include "vadeers/train/split.hpp"

namespace vadeers::cli {

/// Bad command line or an impossible request; exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class Scale { desk, paper };

std::string_view to_string(Scale scale);
Scale parse_scale(std::string_view name);

/// Values given on the command line. Unset fields fall through to the config
/// file and then to the scale preset.
struct Overrides {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::filesystem::path> data;
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> component;
    std::optional<std::size_t> n;
    std::optional<std::string> scale;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> drugs;
    std::optional<std::filesystem::path> cells;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> jobs;
};

/// Everything a command needs, after layering flag > config file > preset.
///
/// The top-level seed drives every random choice of a run: generator, split,
/// guiding-label clustering, weight initialization and evaluation sampling.
struct RunConfig {
    Scale scale = Scale::desk;
    model::PriorVariant variant = model::PriorVariant::gmm_constrained;
    std::uint64_t seed = 0;
    /// Whether the seed came from a flag or the config file.
    bool seed_given = false;

    std::optional<std::filesystem::path> data;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> drugs;
    std::optional<std::filesystem::path> cells;

    std::optional<std::size_t> component;
    std::size_t n = 300;
    std::size_t seeds = 5;
    std::size_t jobs = 1;
    std::vector<model::PriorVariant> variants{model::PriorVariant::vanilla, model::PriorVariant::gmm_constrained,
                                              model::PriorVariant::gmm_unconstrained};

    std::size_t guiding_labels = 3;
    model::ModelConfig model;
    train::TrainSchedule schedule;
    train::SplitSpec split;
    model::LossWeights weights;
    data::SyntheticSpec generator;

    /// Copy with `seed` pushed into every sub-seed.
    RunConfig with_seed(std::uint64_t seed) const;
    /// Checks value ranges and that every referenced input path exists.
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);

/// Scale presets: model, schedule, split and generator.
RunConfig preset(Scale scale);

/// Reads a JSON config file. UsageError when it cannot be parsed.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Layers `flags` over `file` over the preset chosen by the resolved scale.
RunConfig resolve(const Overrides& flags, const nlohmann::json& file = nlohmann::json::object());

}  // namespace vadeers::cli
