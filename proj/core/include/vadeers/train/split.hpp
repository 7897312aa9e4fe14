#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/data/dataset.hpp"
#include "vadeers/model/losses.hpp"

namespace vadeers::train {

struct SplitSpec {
    std::size_t n_val_cells = 100;
    std::size_t n_test_cells = 100;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec&) const = default;
};

void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);

/// A (drug index, cell index, IC50) observation.
struct Pair {
    std::size_t drug = 0;
    std::size_t cell = 0;
    double ic50 = 0.0;

    bool operator==(const Pair&) const = default;
};

/// Cell-line-held-out partition. Cell index lists are sorted.
struct Split {
    std::vector<std::size_t> train_cells;
    std::vector<std::size_t> val_cells;
    std::vector<std::size_t> test_cells;
    std::vector<Pair> train_pairs;
    std::vector<Pair> val_pairs;
    std::vector<Pair> test_pairs;

    bool operator==(const Split&) const = default;
};

/// Draws val and test cell lines without replacement; every pair follows its
/// cell line. DataError unless the dataset has more than n_val + n_test cells.
Split split_by_cell_line(const data::Dataset& dataset, const SplitSpec& spec);

/// Hash of a sorted cell index list, stored in checkpoints to detect a
/// changed split.
std::uint64_t hash_cells(const std::vector<std::size_t>& cells);

/// Model-ready matrices of a standardized dataset.
struct TrainingData {
    /// Every drug: embeddings, profiles (zero rows where absent), labels.
    model::DrugBatch drugs;
    nn::Matrix cells;
    std::vector<std::size_t> profiled_drugs;
    Split split;  // IC50 values on the standardized scale
};

/// `standardized` must already be scaled; `split` comes from the unscaled
/// dataset (same indices). Pair IC50 values are re-read from `standardized`.
TrainingData prepare_training_data(const data::Dataset& standardized, const Split& split);

/// Drug rows + cell rows for a list of pairs, one row of each per pair.
model::PairBatch make_pair_batch(const TrainingData& data, std::span<const Pair* const> pairs);

}  // namespace vadeers::train
