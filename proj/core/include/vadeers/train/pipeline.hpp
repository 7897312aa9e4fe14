#pragma once

#include <cstdint>

#include "vadeers/data/kmeans.hpp"
#include "vadeers/data/scaler.hpp"
#include "vadeers/train/split.hpp"

namespace vadeers::train {

/// A dataset made ready for training: guiding labels derived, split by cell
/// line, scaler fitted on the training cells, matrices assembled.
struct Prepared {
    data::Dataset labeled;  // natural scale, with guiding labels
    data::GuidingLabelReport labels;
    data::Scaler scaler;
    TrainingData training;
};

Prepared prepare(const data::Dataset& dataset, const SplitSpec& split, std::size_t guiding_labels,
                 std::uint64_t label_seed);

}  // namespace vadeers::train
