#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "vadeers/cli/config.hpp"
#include "vadeers/eval/report.hpp"
#include "vadeers/train/checkpoint.hpp"

namespace vadeers::cli {

// File names inside a run directory.
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kPartialCheckpointFile = "checkpoint.partial.bin";
inline constexpr const char* kRunLogFile = "run_log.jsonl";
inline constexpr const char* kPartialRunLogFile = "run_log.partial.jsonl";
inline constexpr const char* kStatusFile = "status.json";
inline constexpr const char* kResolvedConfigFile = "config.json";
inline constexpr const char* kValReportFile = "val_report.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kLatentPcaFile = "latent_pca.csv";
inline constexpr const char* kGeneratedPcaFile = "generated_pca.csv";
inline constexpr const char* kGeneratedFile = "generated.csv";
inline constexpr const char* kPredictionsFile = "predictions.csv";
inline constexpr const char* kPlantedFile = "planted_labels.csv";
inline constexpr const char* kSummaryJsonFile = "summary.json";
inline constexpr const char* kSummaryTextFile = "summary.txt";

/// --out when given, else $VADEERS_RUN_ROOT (default "runs") joined with a
/// name derived from the command, variant and seed.
std::filesystem::path run_dir(const RunConfig& config, std::string_view command);

/// Each command returns the run directory it wrote to.
std::filesystem::path cmd_synth(const RunConfig& config);
std::filesystem::path cmd_train(const RunConfig& config);
std::filesystem::path cmd_generate(const RunConfig& config);
std::filesystem::path cmd_predict(const RunConfig& config);
std::filesystem::path cmd_evaluate(const RunConfig& config);
std::filesystem::path cmd_experiment(const RunConfig& config);

/// Natural-scale IC50 for row pairs (drug row i with cell row i), both given
/// on the natural scale. Eval mode, so deterministic.
std::vector<double> predict_ic50(const train::Checkpoint& checkpoint, const nn::Matrix& drugs,
                                 const nn::Matrix& cells);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t count = 0;
};

/// Per numeric report field, mean and STD over the finite values.
std::map<std::string, MetricSummary> aggregate(const std::vector<eval::MetricReport>& reports);

/// "1.33 ± 0.022"-style text.
std::string format_mean_std(const MetricSummary& s);

/// Parses argv-style arguments (without the program name) and runs one
/// command. Returns the process exit code: 0 ok, 1 usage, 2 data, 3 numeric.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vadeers::cli
