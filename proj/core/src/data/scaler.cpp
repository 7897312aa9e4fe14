#include "vadeers/data/scaler.hpp"

#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "vadeers/error.hpp"

namespace vadeers::data {

ColumnScaler ColumnScaler::identity(std::size_t width) {
    return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

ColumnScaler ColumnScaler::fit(const nn::Matrix& rows, std::size_t continuous, std::vector<std::size_t>* zero_variance) {
    ColumnScaler s = identity(rows.cols());
    const std::size_t n = rows.rows();
    if (n == 0) throw DataError("cannot fit a scaler on zero rows");
    for (std::size_t c = 0; c < std::min(continuous, rows.cols()); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += rows(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (rows(r, c) - mean) * (rows(r, c) - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        s.mean[c] = mean;
        if (sd > 0.0) {
            s.scale[c] = sd;
        } else if (zero_variance) {
            zero_variance->push_back(c);
        }
    }
    return s;
}

nn::Matrix ColumnScaler::transform(const nn::Matrix& rows) const {
    if (rows.cols() != width()) {
        throw ContractError("scaler width " + std::to_string(width()) + ", rows " + rows.shape_string());
    }
    nn::Matrix out = rows;
    for (std::size_t r = 0; r < out.rows(); ++r) transform_in_place(out.row(r));
    return out;
}

void ColumnScaler::transform_in_place(std::span<double> row) const {
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) / scale[c];
}

nn::Matrix ColumnScaler::inverse(const nn::Matrix& rows) const {
    if (rows.cols() != width()) {
        throw ContractError("scaler width " + std::to_string(width()) + ", rows " + rows.shape_string());
    }
    nn::Matrix out = rows;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * scale[c] + mean[c];
    }
    return out;
}

Scaler fit_scaler(const Dataset& dataset, std::span<const std::size_t> train_cells) {
    Scaler s;
    auto note = [&s](const char* block, const std::vector<std::size_t>& cols) {
        for (std::size_t c : cols) {
            s.warnings.push_back(std::string(block) + " column " + std::to_string(c) + " has zero variance");
            spdlog::warn("{}", s.warnings.back());
        }
    };
    std::vector<std::size_t> zero;
    s.smiles = ColumnScaler::fit(dataset.smiles_matrix(), dataset.smiles_dim, &zero);
    note("embedding", zero);

    zero.clear();
    auto profiles = dataset.profile_matrix().first;
    s.ip = profiles.rows() == 0 ? ColumnScaler::identity(dataset.ip_dim)
                                : ColumnScaler::fit(profiles, dataset.ip_dim, &zero);
    note("profile", zero);

    if (train_cells.empty()) throw DataError("fit_scaler: no training cell lines");
    const std::set<std::size_t> train(train_cells.begin(), train_cells.end());
    zero.clear();
    s.cells = ColumnScaler::fit(nn::gather_rows(dataset.cell_matrix(), train_cells), dataset.bio_continuous, &zero);
    note("cell", zero);

    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [key, v] : dataset.sensitivities.entries()) {
        if (!train.count(key.second)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) throw DataError("fit_scaler: no IC50 values on training cell lines");
    s.ic50_mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const auto& [key, v] : dataset.sensitivities.entries()) {
        if (train.count(key.second)) var += (v - s.ic50_mean) * (v - s.ic50_mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0.0) {
        s.ic50_scale = sd;
    } else {
        s.warnings.push_back("IC50 has zero variance");
        spdlog::warn("{}", s.warnings.back());
    }
    return s;
}

Dataset apply_scaler(const Dataset& dataset, const Scaler& scaler) {
    if (scaler.smiles.width() != dataset.smiles_dim || scaler.ip.width() != dataset.ip_dim ||
        scaler.cells.width() != dataset.bio_dim) {
        throw ContractError("scaler widths do not match the dataset");
    }
    Dataset out = dataset;
    for (auto& d : out.drugs) {
        scaler.smiles.transform_in_place(d.smiles_embedding);
        if (d.inhibition_profile) scaler.ip.transform_in_place(*d.inhibition_profile);
    }
    for (auto& c : out.cells) scaler.cells.transform_in_place(c.features);
    SensitivityTable table;
    for (const auto& [key, v] : dataset.sensitivities.entries()) {
        table.add(key.first, key.second, scaler.transform_ic50(v));
    }
    out.sensitivities = std::move(table);
    return out;
}

Standardized standardize(const Dataset& dataset, std::span<const std::size_t> train_cells) {
    Scaler s = fit_scaler(dataset, train_cells);
    Dataset d = apply_scaler(dataset, s);
    return {std::move(d), std::move(s)};
}

}  // namespace vadeers::data
