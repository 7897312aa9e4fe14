#include "vadeers/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.hpp"
#include "vadeers/error.hpp"

namespace vadeers::nn {
namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw ContractError(std::string(op) + ": operands live on different tapes");
    }
    return *a.tape;
}

Tape& tape_of(Var a, const char* op) {
    if (a.tape == nullptr) throw ContractError(std::string(op) + ": detached variable");
    return *a.tape;
}

template <class F>
Matrix map(const Matrix& m, F f) {
    Matrix out(m.rows(), m.cols());
    auto src = m.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <class F>
Matrix zip(const Matrix& a, const Matrix& b, F f) {
    Matrix out(a.rows(), a.cols());
    auto x = a.data();
    auto y = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
    return out;
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    Matrix out = nn::matmul(a.value(), b.value());
    return t.record(std::move(out), {a, b}, [a, b](const Matrix& g, GradientSink& sink) {
        if (sink.needs(a)) sink.add(a, detail::matmul_a_bt(g, b.value()));
        if (sink.needs(b)) sink.add(b, detail::matmul_at_b(a.value(), g));
    });
}

Var add_bias(Var x, Var bias) {
    Tape& t = same_tape(x, bias, "add_bias");
    const Matrix& xv = x.value();
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw ContractError("add_bias: input " + xv.shape_string() + ", bias " + bv.shape_string());
    }
    Matrix out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
    }
    return t.record(std::move(out), {x, bias}, [x, bias](const Matrix& g, GradientSink& sink) {
        sink.add(x, g);
        if (sink.needs(bias)) {
            Matrix gb(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
            sink.add(bias, std::move(gb));
        }
    });
}

Var affine(Var x, Var weights, Var bias) {
    if (x.value().cols() != weights.value().rows()) {
        throw ContractError("affine: input " + x.value().shape_string() + " does not conform to weights " +
                            weights.value().shape_string());
    }
    return add_bias(matmul(x, weights), bias);
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b, "add");
    require_same_shape(a.value(), b.value(), "add");
    Matrix out = zip(a.value(), b.value(), [](double x, double y) { return x + y; });
    return t.record(std::move(out), {a, b}, [a, b](const Matrix& g, GradientSink& sink) {
        sink.add(a, g);
        sink.add(b, g);
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b, "sub");
    require_same_shape(a.value(), b.value(), "sub");
    Matrix out = zip(a.value(), b.value(), [](double x, double y) { return x - y; });
    return t.record(std::move(out), {a, b}, [a, b](const Matrix& g, GradientSink& sink) {
        sink.add(a, g);
        if (sink.needs(b)) sink.add(b, map(g, [](double v) { return -v; }));
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b, "mul");
    require_same_shape(a.value(), b.value(), "mul");
    Matrix out = zip(a.value(), b.value(), [](double x, double y) { return x * y; });
    return t.record(std::move(out), {a, b}, [a, b](const Matrix& g, GradientSink& sink) {
        if (sink.needs(a)) sink.add(a, zip(g, b.value(), [](double x, double y) { return x * y; }));
        if (sink.needs(b)) sink.add(b, zip(g, a.value(), [](double x, double y) { return x * y; }));
    });
}

Var mul_constant(Var a, const Matrix& factor) {
    Tape& t = tape_of(a, "mul_constant");
    require_same_shape(a.value(), factor, "mul_constant");
    Matrix out = zip(a.value(), factor, [](double x, double y) { return x * y; });
    return t.record(std::move(out), {a}, [a, factor](const Matrix& g, GradientSink& sink) {
        sink.add(a, zip(g, factor, [](double x, double y) { return x * y; }));
    });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a, "scale");
    Matrix out = map(a.value(), [factor](double x) { return x * factor; });
    return t.record(std::move(out), {a}, [a, factor](const Matrix& g, GradientSink& sink) {
        sink.add(a, map(g, [factor](double v) { return v * factor; }));
    });
}

Var add_scalar(Var a, double value) {
    Tape& t = tape_of(a, "add_scalar");
    Matrix out = map(a.value(), [value](double x) { return x + value; });
    return t.record(std::move(out), {a}, [a](const Matrix& g, GradientSink& sink) { sink.add(a, g); });
}

Var relu(Var a) {
    Tape& t = tape_of(a, "relu");
    Matrix out = map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
    return t.record(std::move(out), {a}, [a](const Matrix& g, GradientSink& sink) {
        sink.add(a, zip(g, a.value(), [](double gv, double x) { return x > 0.0 ? gv : 0.0; }));
    });
}

Var exp(Var a) {
    Tape& t = tape_of(a, "exp");
    Matrix out = map(a.value(), [](double x) { return std::exp(x); });
    const Var result{&t, t.size()};
    return t.record(std::move(out), {a}, [a, result](const Matrix& g, GradientSink& sink) {
        sink.add(a, zip(g, result.value(), [](double gv, double y) { return gv * y; }));
    });
}

Var square(Var a) {
    Tape& t = tape_of(a, "square");
    Matrix out = map(a.value(), [](double x) { return x * x; });
    return t.record(std::move(out), {a}, [a](const Matrix& g, GradientSink& sink) {
        sink.add(a, zip(g, a.value(), [](double gv, double x) { return 2.0 * x * gv; }));
    });
}

Var sum_rows(Var a) {
    Tape& t = tape_of(a, "sum_rows");
    const Matrix& av = a.value();
    Matrix out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (double v : av.row(r)) s += v;
        out(r, 0) = s;
    }
    return t.record(std::move(out), {a}, [a](const Matrix& g, GradientSink& sink) {
        const Matrix& av = a.value();
        Matrix ga(av.rows(), av.cols());
        for (std::size_t r = 0; r < av.rows(); ++r)
            for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) = g(r, 0);
        sink.add(a, std::move(ga));
    });
}

Var sum(Var a) {
    Tape& t = tape_of(a, "sum");
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.record(Matrix(1, 1, s), {a}, [a](const Matrix& g, GradientSink& sink) {
        sink.add(a, Matrix(a.value().rows(), a.value().cols(), g(0, 0)));
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw ContractError("mean: empty operand");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
    Tape& t = tape_of(a, "gather_rows");
    Matrix out = nn::gather_rows(a.value(), rows);
    std::vector<std::size_t> picks(rows.begin(), rows.end());
    return t.record(std::move(out), {a}, [a, picks = std::move(picks)](const Matrix& g, GradientSink& sink) {
        const Matrix& av = a.value();
        Matrix ga(av.rows(), av.cols());
        for (std::size_t i = 0; i < picks.size(); ++i) {
            auto dst = ga.row(picks[i]);
            auto src = g.row(i);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
        sink.add(a, std::move(ga));
    });
}

Var concat_cols(Var a, Var b) {
    Tape& t = same_tape(a, b, "concat_cols");
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw ContractError("concat_cols: row mismatch " + av.shape_string() + " vs " + bv.shape_string());
    }
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
        std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(av.cols()));
    }
    const std::size_t split = av.cols();
    return t.record(std::move(out), {a, b}, [a, b, split](const Matrix& g, GradientSink& sink) {
        if (sink.needs(a)) {
            Matrix ga(g.rows(), split);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < split; ++c) ga(r, c) = g(r, c);
            sink.add(a, std::move(ga));
        }
        if (sink.needs(b)) {
            Matrix gb(g.rows(), g.cols() - split);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = split; c < g.cols(); ++c) gb(r, c - split) = g(r, c);
            sink.add(b, std::move(gb));
        }
    });
}

Var row_mse(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "row_mse");
    if (a.value().cols() == 0) throw ContractError("row_mse: zero-width operands");
    return scale(sum_rows(square(sub(a, b))), 1.0 / static_cast<double>(a.value().cols()));
}

Var mse(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "mse");
    return mean(square(sub(a, b)));
}

Var logsumexp_rows(Var a) {
    Tape& t = tape_of(a, "logsumexp_rows");
    const Matrix& av = a.value();
    if (av.cols() == 0) throw ContractError("logsumexp_rows: zero-width operand");
    Matrix out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        auto row = av.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        if (!std::isfinite(m)) {
            out(r, 0) = m;
            continue;
        }
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        out(r, 0) = m + std::log(s);
    }
    const Var result{&t, t.size()};
    return t.record(std::move(out), {a}, [a, result](const Matrix& g, GradientSink& sink) {
        const Matrix& av = a.value();
        const Matrix& lse = result.value();
        Matrix ga(av.rows(), av.cols());
        for (std::size_t r = 0; r < av.rows(); ++r)
            for (std::size_t c = 0; c < av.cols(); ++c)
                ga(r, c) = g(r, 0) * std::exp(av(r, c) - lse(r, 0));
        sink.add(a, std::move(ga));
    });
}

Var log_softmax_rows(Var a) {
    Tape& t = tape_of(a, "log_softmax_rows");
    const Matrix& av = a.value();
    if (av.cols() == 0) throw ContractError("log_softmax_rows: zero-width operand");
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        auto row = av.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        const double lse = m + std::log(s);
        for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = row[c] - lse;
    }
    const Var result{&t, t.size()};
    return t.record(std::move(out), {a}, [a, result](const Matrix& g, GradientSink& sink) {
        const Matrix& ls = result.value();
        Matrix ga(ls.rows(), ls.cols());
        for (std::size_t r = 0; r < ls.rows(); ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < ls.cols(); ++c) gsum += g(r, c);
            for (std::size_t c = 0; c < ls.cols(); ++c) ga(r, c) = g(r, c) - std::exp(ls(r, c)) * gsum;
        }
        sink.add(a, std::move(ga));
    });
}

Var select_or(Var values, Var fallback, std::span<const std::optional<std::size_t>> choice) {
    Tape& t = same_tape(values, fallback, "select_or");
    const Matrix& vv = values.value();
    const Matrix& fv = fallback.value();
    if (fv.cols() != 1 || fv.rows() != vv.rows() || choice.size() != vv.rows()) {
        throw ContractError("select_or: values " + vv.shape_string() + ", fallback " + fv.shape_string() +
                            ", " + std::to_string(choice.size()) + " choices");
    }
    std::vector<std::optional<std::size_t>> picks(choice.begin(), choice.end());
    Matrix out(vv.rows(), 1);
    for (std::size_t r = 0; r < vv.rows(); ++r) {
        if (picks[r]) {
            if (*picks[r] >= vv.cols()) {
                throw IndexError("select_or: column " + std::to_string(*picks[r]) + " of " + vv.shape_string());
            }
            out(r, 0) = vv(r, *picks[r]);
        } else {
            out(r, 0) = fv(r, 0);
        }
    }
    return t.record(std::move(out), {values, fallback},
                    [values, fallback, picks = std::move(picks)](const Matrix& g, GradientSink& sink) {
                        const Matrix& vv = values.value();
                        if (sink.needs(values)) {
                            Matrix gv(vv.rows(), vv.cols());
                            for (std::size_t r = 0; r < vv.rows(); ++r)
                                if (picks[r]) gv(r, *picks[r]) = g(r, 0);
                            sink.add(values, std::move(gv));
                        }
                        if (sink.needs(fallback)) {
                            Matrix gf(vv.rows(), 1);
                            for (std::size_t r = 0; r < vv.rows(); ++r)
                                if (!picks[r]) gf(r, 0) = g(r, 0);
                            sink.add(fallback, std::move(gf));
                        }
                    });
}

}  // namespace vadeers::nn
