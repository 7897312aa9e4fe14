#include "vadeers/train/split.hpp"

#include <algorithm>
#include <numeric>

#include "vadeers/error.hpp"

namespace vadeers::train {

void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = nlohmann::json{{"n_val_cells", s.n_val_cells}, {"n_test_cells", s.n_test_cells}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SplitSpec& s) {
    const SplitSpec d = s;
    s.n_val_cells = j.value("n_val_cells", d.n_val_cells);
    s.n_test_cells = j.value("n_test_cells", d.n_test_cells);
    s.seed = j.value("seed", d.seed);
}

Split split_by_cell_line(const data::Dataset& dataset, const SplitSpec& spec) {
    const std::size_t m = dataset.cells.size();
    if (m <= spec.n_val_cells + spec.n_test_cells) {
        throw DataError("split needs more than " + std::to_string(spec.n_val_cells + spec.n_test_cells) +
                        " cell lines, dataset has " + std::to_string(m));
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    Split s;
    s.val_cells.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.n_val_cells));
    s.test_cells.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.n_val_cells),
                        order.begin() + static_cast<std::ptrdiff_t>(spec.n_val_cells + spec.n_test_cells));
    s.train_cells.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.n_val_cells + spec.n_test_cells),
                         order.end());
    std::sort(s.val_cells.begin(), s.val_cells.end());
    std::sort(s.test_cells.begin(), s.test_cells.end());
    std::sort(s.train_cells.begin(), s.train_cells.end());

    enum class Part : unsigned char { train, val, test };
    std::vector<Part> owner(m, Part::train);
    for (std::size_t c : s.val_cells) owner[c] = Part::val;
    for (std::size_t c : s.test_cells) owner[c] = Part::test;
    for (const auto& [key, v] : dataset.sensitivities.entries()) {
        const Pair p{key.first, key.second, v};
        switch (owner[key.second]) {
            case Part::train: s.train_pairs.push_back(p); break;
            case Part::val: s.val_pairs.push_back(p); break;
            case Part::test: s.test_pairs.push_back(p); break;
        }
    }
    return s;
}

std::uint64_t hash_cells(const std::vector<std::size_t>& cells) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t c : cells) {
        for (int b = 0; b < 8; ++b) {
            h ^= (c >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

TrainingData prepare_training_data(const data::Dataset& standardized, const Split& split) {
    standardized.validate();
    TrainingData d;
    const std::size_t n = standardized.drugs.size();
    d.drugs.smiles = standardized.smiles_matrix();
    d.drugs.ip = nn::Matrix(n, standardized.ip_dim);
    d.drugs.has_ip.assign(n, false);
    d.drugs.labels.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = standardized.drugs[i];
        if (rec.inhibition_profile) {
            std::copy(rec.inhibition_profile->begin(), rec.inhibition_profile->end(), d.drugs.ip.row(i).begin());
            d.drugs.has_ip[i] = true;
            d.profiled_drugs.push_back(i);
        }
        d.drugs.labels[i] = rec.guiding_label;
    }
    d.cells = standardized.cell_matrix();
    d.split = split;
    auto rescale = [&](std::vector<Pair>& pairs) {
        for (auto& p : pairs) {
            auto v = standardized.sensitivities.find(p.drug, p.cell);
            if (!v) throw DataError("split pair missing from the standardized dataset");
            p.ic50 = *v;
        }
    };
    rescale(d.split.train_pairs);
    rescale(d.split.val_pairs);
    rescale(d.split.test_pairs);
    return d;
}

model::PairBatch make_pair_batch(const TrainingData& data, std::span<const Pair* const> pairs) {
    const std::size_t b = pairs.size();
    if (b == 0) throw ContractError("make_pair_batch: no pairs");
    model::PairBatch batch;
    batch.drugs.smiles = nn::Matrix(b, data.drugs.smiles.cols());
    batch.drugs.ip = nn::Matrix(b, data.drugs.ip.cols());
    batch.drugs.has_ip.resize(b);
    batch.drugs.labels.resize(b);
    batch.cells = nn::Matrix(b, data.cells.cols());
    batch.entries.resize(b);
    for (std::size_t r = 0; r < b; ++r) {
        const Pair& p = *pairs[r];
        auto s = data.drugs.smiles.row(p.drug);
        std::copy(s.begin(), s.end(), batch.drugs.smiles.row(r).begin());
        auto ip = data.drugs.ip.row(p.drug);
        std::copy(ip.begin(), ip.end(), batch.drugs.ip.row(r).begin());
        batch.drugs.has_ip[r] = data.drugs.has_ip[p.drug];
        batch.drugs.labels[r] = data.drugs.labels[p.drug];
        auto c = data.cells.row(p.cell);
        std::copy(c.begin(), c.end(), batch.cells.row(r).begin());
        batch.entries[r] = {r, r, p.ic50, true};
    }
    return batch;
}

}  // namespace vadeers::train
