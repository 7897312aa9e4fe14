#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "vadeers/nn/tape.hpp"

// Differentiable primitives. Every op checks shapes and throws ContractError
// naming both operands on mismatch. Binary ops require both operands on the
// same tape.
namespace vadeers::nn {

Var matmul(Var a, Var b);
/// x + bias, bias is 1xC and broadcast over the rows of x.
Var add_bias(Var x, Var bias);
Var affine(Var x, Var weights, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// Elementwise product with a fixed matrix (dropout masks, row masks).
Var mul_constant(Var a, const Matrix& factor);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);

Var relu(Var a);
Var exp(Var a);
Var square(Var a);

/// NxC -> Nx1.
Var sum_rows(Var a);
/// -> 1x1.
Var sum(Var a);
/// -> 1x1.
Var mean(Var a);

/// Rows of `a` picked by `rows` (repeats allowed); gradients scatter-add back.
Var gather_rows(Var a, std::span<const std::size_t> rows);

/// [a | b] along columns.
Var concat_cols(Var a, Var b);

/// Per-row mean of (a - b)^2, Nx1.
Var row_mse(Var a, Var b);
/// Mean of (a - b)^2 over all entries, 1x1.
Var mse(Var a, Var b);

/// log-sum-exp of every row with max subtraction, NxK -> Nx1.
Var logsumexp_rows(Var a);
/// Row-wise log-softmax, NxK -> NxK.
Var log_softmax_rows(Var a);

/// Row r is values(r, choice[r]) when choice[r] is set, else fallback(r, 0).
/// NxK, Nx1 -> Nx1.
Var select_or(Var values, Var fallback, std::span<const std::optional<std::size_t>> choice);

}  // namespace vadeers::nn
