#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vadeers/nn/matrix.hpp"

namespace vadeers::nn {

using ParamId = std::size_t;

/// Named, ordered collection of trainable matrices. Ids are dense indices in
/// insertion order, which is also the serialization order.
class ParamStore {
public:
    ParamId add(std::string name, Matrix initial);

    std::size_t size() const noexcept { return values_.size(); }
    Matrix& value(ParamId id);
    const Matrix& value(ParamId id) const;
    const std::string& name(ParamId id) const;
    std::optional<ParamId> find(std::string_view name) const;
    std::vector<ParamId> with_prefix(std::string_view prefix) const;

    friend bool operator==(const ParamStore&, const ParamStore&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
};

/// d(loss)/d(param) for every parameter registered on a tape.
using Gradients = std::map<ParamId, Matrix>;

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t index = 0;

    const Matrix& value() const;
};

class GradientSink;

/// Reverse-mode tape. Each recorded node keeps its forward value and a
/// closure that distributes the node's output gradient onto its inputs.
/// A tape is single-threaded and must outlive every Var it hands out.
class Tape {
public:
    enum class Recording { on, off };
    using Backward = std::function<void(const Matrix& grad_out, GradientSink& sink)>;

    explicit Tape(Recording mode = Recording::on);
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var parameter(const ParamStore& store, ParamId id);

    /// Records an op. `backward` is dropped when no input needs a gradient or
    /// recording is off.
    Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

    const Matrix& value(Var v) const;
    bool recording() const noexcept { return mode_ == Recording::on; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool owns(Var v) const noexcept { return v.tape == this && v.index < nodes_.size(); }

    /// Gradient of a 1x1 `loss` with respect to every registered parameter
    /// (zero matrices for parameters the loss does not depend on).
    Gradients gradients(Var loss) const;

private:
    friend class GradientSink;

    struct Node {
        Matrix value;
        Backward backward;
        std::optional<ParamId> param;
        bool needs_grad = false;
    };

    Recording mode_;
    std::vector<Node> nodes_;
};

/// Accumulator handed to backward closures.
class GradientSink {
public:
    void add(Var v, const Matrix& grad);
    void add(Var v, Matrix&& grad);
    bool needs(Var v) const;

private:
    friend class Tape;
    GradientSink(const Tape& tape, std::vector<Matrix>& grads) : tape_(tape), grads_(grads) {}

    const Tape& tape_;
    std::vector<Matrix>& grads_;
};

/// FNV-1a over the raw bytes of the listed parameters; used to prove that
/// frozen parameters stay bit-identical.
std::uint64_t hash_params(const ParamStore& store, const std::vector<ParamId>& ids);

}  // namespace vadeers::nn
