#pragma once

#include "vadeers/nn/matrix.hpp"

namespace vadeers::nn::detail {

/// a^T * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

}  // namespace vadeers::nn::detail
