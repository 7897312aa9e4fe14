#include "vadeers/cli/config.hpp"

#include <fstream>
#include <set>

namespace vadeers::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::set<std::string> kKnownKeys{"scale",   "variant",  "seed",     "data",   "out",      "checkpoint",
                                       "drugs",   "cells",    "component", "n",     "seeds",    "jobs",
                                       "variants", "guiding_labels", "model", "schedule", "split", "weights",
                                       "generator"};

template <typename T>
T merged(const T& base, const json& file, const char* section) {
    if (!file.contains(section)) return base;
    const json& patch = file.at(section);
    if (!patch.is_object()) throw UsageError(std::string("config: '") + section + "' must be an object");
    json j = base;
    // A partial schedule would otherwise contradict the preset's total.
    if (!patch.contains("total_epochs")) j.erase("total_epochs");
    j.merge_patch(patch);
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: bad '") + section + "' section: " + e.what());
    }
}

template <typename T>
std::optional<T> file_value(const json& file, const char* key) {
    if (!file.contains(key)) return std::nullopt;
    try {
        return file.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
T pick(const std::optional<T>& flag, const std::optional<T>& file, T fallback) {
    if (flag) return *flag;
    if (file) return *file;
    return fallback;
}

template <typename T>
std::optional<T> pick(const std::optional<T>& flag, const std::optional<T>& file) {
    return flag ? flag : file;
}

model::PriorVariant variant_of(const std::string& name) {
    try {
        return model::parse_prior_variant(name);
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
}

void require_exists(const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::exists(*p)) throw UsageError(std::string(what) + " does not exist: " + p->string());
}

}  // namespace

std::string_view to_string(Scale scale) { return scale == Scale::desk ? "desk" : "paper"; }

Scale parse_scale(std::string_view name) {
    if (name == "desk") return Scale::desk;
    if (name == "paper") return Scale::paper;
    throw UsageError("unknown scale '" + std::string(name) + "' (expected desk or paper)");
}

RunConfig RunConfig::with_seed(std::uint64_t s) const {
    RunConfig c = *this;
    c.seed = s;
    c.schedule.seed = s;
    c.split.seed = s;
    c.generator.seed = s;
    return c;
}

void RunConfig::validate() const {
    try {
        model.validate();
        schedule.validate();
        weights.validate();
        generator.validate();
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
    if (guiding_labels == 0) throw UsageError("guiding_labels must be positive");
    if (n == 0) throw UsageError("--n must be positive");
    if (seeds == 0) throw UsageError("--seeds must be positive");
    if (jobs == 0) throw UsageError("--jobs must be positive");
    if (variants.empty()) throw UsageError("variants must not be empty");
    require_exists(data, "data directory");
    require_exists(checkpoint, "checkpoint");
    require_exists(drugs, "drug file");
    require_exists(cells, "cell file");
}

void to_json(json& j, const RunConfig& c) {
    json variants = json::array();
    for (auto v : c.variants) variants.push_back(std::string(model::to_string(v)));
    j = json{{"scale", std::string(to_string(c.scale))},
             {"variant", std::string(model::to_string(c.variant))},
             {"seed", c.seed},
             {"n", c.n},
             {"seeds", c.seeds},
             {"jobs", c.jobs},
             {"variants", variants},
             {"guiding_labels", c.guiding_labels},
             {"model", c.model},
             {"schedule", c.schedule},
             {"split", c.split},
             {"weights", c.weights},
             {"generator", c.generator}};
    if (c.component) j["component"] = *c.component;
    if (c.data) j["data"] = c.data->string();
    if (c.out) j["out"] = c.out->string();
    if (c.checkpoint) j["checkpoint"] = c.checkpoint->string();
    if (c.drugs) j["drugs"] = c.drugs->string();
    if (c.cells) j["cells"] = c.cells->string();
}

RunConfig preset(Scale scale) {
    RunConfig c;
    c.scale = scale;
    if (scale == Scale::desk) {
        c.model = model::ModelConfig::desk();
        c.schedule = train::TrainSchedule::desk();
        c.split.n_val_cells = 25;
        c.split.n_test_cells = 25;
        c.generator = data::SyntheticSpec::desk();
    } else {
        c.generator = data::SyntheticSpec::paper();
    }
    return c;
}

json read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config file " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError("config file " + path.string() + " must hold a JSON object");
    return j;
}

RunConfig resolve(const Overrides& flags, const json& file) {
    for (const auto& item : file.items()) {
        if (!kKnownKeys.count(item.key())) throw UsageError("config: unknown key '" + item.key() + "'");
    }

    const Scale scale = parse_scale(pick(flags.scale, file_value<std::string>(file, "scale"), std::string("desk")));
    RunConfig c = preset(scale);

    c.model = merged(c.model, file, "model");
    c.schedule = merged(c.schedule, file, "schedule");
    c.split = merged(c.split, file, "split");
    c.weights = merged(c.weights, file, "weights");
    c.generator = merged(c.generator, file, "generator");
    c.guiding_labels = pick(std::optional<std::size_t>{}, file_value<std::size_t>(file, "guiding_labels"),
                            c.guiding_labels);

    c.variant = variant_of(pick(flags.variant, file_value<std::string>(file, "variant"),
                                std::string(model::to_string(c.variant))));
    c.model.prior = c.variant;
    if (auto names = file_value<std::vector<std::string>>(file, "variants")) {
        c.variants.clear();
        for (const auto& name : *names) c.variants.push_back(variant_of(name));
    }

    auto path_of = [&](const std::optional<fs::path>& flag, const char* key) -> std::optional<fs::path> {
        if (flag) return flag;
        if (auto s = file_value<std::string>(file, key)) return fs::path(*s);
        return std::nullopt;
    };
    c.data = path_of(flags.data, "data");
    c.out = path_of(flags.out, "out");
    c.checkpoint = path_of(flags.checkpoint, "checkpoint");
    c.drugs = path_of(flags.drugs, "drugs");
    c.cells = path_of(flags.cells, "cells");

    c.component = pick(flags.component, file_value<std::size_t>(file, "component"));
    c.n = pick(flags.n, file_value<std::size_t>(file, "n"), c.n);
    c.seeds = pick(flags.seeds, file_value<std::size_t>(file, "seeds"), c.seeds);
    c.jobs = pick(flags.jobs, file_value<std::size_t>(file, "jobs"), c.jobs);

    const auto file_seed = file_value<std::uint64_t>(file, "seed");
    c.seed_given = flags.seed || file_seed;
    return c.with_seed(pick(flags.seed, file_seed, std::uint64_t{0}));
}

}  // namespace vadeers::cli
