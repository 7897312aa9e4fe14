#include "vadeers/train/pipeline.hpp"

namespace vadeers::train {

Prepared prepare(const data::Dataset& dataset, const SplitSpec& split_spec, std::size_t guiding_labels,
                 std::uint64_t label_seed) {
    Prepared p;
    p.labeled = dataset;
    p.labels = data::derive_guiding_labels(p.labeled, guiding_labels, label_seed);
    const Split split = split_by_cell_line(p.labeled, split_spec);
    auto standardized = data::standardize(p.labeled, split.train_cells);
    p.scaler = std::move(standardized.scaler);
    p.training = prepare_training_data(standardized.data, split);
    return p;
}

}  // namespace vadeers::train
