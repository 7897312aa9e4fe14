#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vadeers/data/dataset.hpp"
#include "vadeers/nn/matrix.hpp"

namespace vadeers::data {

/// Per-column affine standardization. Columns marked passthrough keep
/// mean 0 / scale 1.
struct ColumnScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    std::size_t width() const noexcept { return mean.size(); }

    /// Fits on the rows of `rows`; columns with index >= `continuous` pass
    /// through. Zero-variance columns get scale 1 and are listed in
    /// `zero_variance` (if given).
    static ColumnScaler fit(const nn::Matrix& rows, std::size_t continuous,
                            std::vector<std::size_t>* zero_variance = nullptr);
    static ColumnScaler identity(std::size_t width);

    nn::Matrix transform(const nn::Matrix& rows) const;
    nn::Matrix inverse(const nn::Matrix& rows) const;
    void transform_in_place(std::span<double> row) const;

    bool operator==(const ColumnScaler&) const = default;
};

struct Scaler {
    ColumnScaler smiles;
    ColumnScaler ip;
    ColumnScaler cells;
    double ic50_mean = 0.0;
    double ic50_scale = 1.0;
    std::vector<std::string> warnings;

    double transform_ic50(double y) const noexcept { return (y - ic50_mean) / ic50_scale; }
    double inverse_ic50(double y) const noexcept { return y * ic50_scale + ic50_mean; }

    bool operator==(const Scaler& other) const {
        return smiles == other.smiles && ip == other.ip && cells == other.cells && ic50_mean == other.ic50_mean &&
               ic50_scale == other.ic50_scale;
    }
};

/// Fits on the training split: all drug embeddings and profiles (drugs are
/// shared across splits), the expression columns of `train_cells`, and IC50
/// values of pairs whose cell is in `train_cells`. Zero-variance columns get
/// scale 1 and a logged warning.
Scaler fit_scaler(const Dataset& dataset, std::span<const std::size_t> train_cells);

/// A transformed copy; binary cell columns and guiding labels are untouched.
Dataset apply_scaler(const Dataset& dataset, const Scaler& scaler);

struct Standardized {
    Dataset data;
    Scaler scaler;
};

Standardized standardize(const Dataset& dataset, std::span<const std::size_t> train_cells);

}  // namespace vadeers::data
