#include "vadeers/nn/matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "kernels.hpp"
#include "vadeers/error.hpp"

namespace vadeers::nn {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

ConstView view(const Matrix& m) {
    return ConstView(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols()));
}

View view(Matrix& m) {
    return View(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ContractError("Matrix: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                            " needs " + std::to_string(rows_ * cols_) + " values, got " +
                            std::to_string(data_.size()));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ContractError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column_vector(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                            b.shape_string());
    }
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), source.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= source.rows()) {
            throw IndexError("gather_rows: row " + std::to_string(indices[i]) + " of " +
                             source.shape_string());
        }
        auto src = source.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractError("matmul: cannot multiply " + a.shape_string() + " by " +
                            b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix affine(const Matrix& input, const Matrix& weights, std::span<const double> bias) {
    if (input.cols() != weights.rows() || bias.size() != weights.cols()) {
        throw ContractError("affine: input " + input.shape_string() + ", weights " +
                            weights.shape_string() + ", bias 1x" + std::to_string(bias.size()));
    }
    Matrix out = matmul(input, weights);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
    return out;
}

double mse(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "mse");
    if (a.empty()) throw ContractError("mse: empty operands");
    double sum = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return sum / static_cast<double>(x.size());
}

namespace detail {

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ContractError("matmul_at_b: " + a.shape_string() + "^T by " + b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    if (a.rows() == 0) return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ContractError("matmul_a_bt: " + a.shape_string() + " by " + b.shape_string() + "^T");
    }
    Matrix out(a.rows(), b.rows());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

}  // namespace detail
}  // namespace vadeers::nn
