#include "vadeers/nn/tape.hpp"

#include <cmath>
#include <cstring>

#include "vadeers/error.hpp"

namespace vadeers::nn {

ParamId ParamStore::add(std::string name, Matrix initial) {
    if (find(name)) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
    names_.push_back(std::move(name));
    values_.push_back(std::move(initial));
    return values_.size() - 1;
}

Matrix& ParamStore::value(ParamId id) {
    if (id >= values_.size()) throw IndexError("ParamStore: no parameter " + std::to_string(id));
    return values_[id];
}

const Matrix& ParamStore::value(ParamId id) const {
    if (id >= values_.size()) throw IndexError("ParamStore: no parameter " + std::to_string(id));
    return values_[id];
}

const std::string& ParamStore::name(ParamId id) const {
    if (id >= names_.size()) throw IndexError("ParamStore: no parameter " + std::to_string(id));
    return names_[id];
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

std::vector<ParamId> ParamStore::with_prefix(std::string_view prefix) const {
    std::vector<ParamId> out;
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (std::string_view(names_[i]).starts_with(prefix)) out.push_back(i);
    return out;
}

const Matrix& Var::value() const {
    if (tape == nullptr) throw ContractError("Var: not attached to a tape");
    return tape->value(*this);
}

Tape::Tape(Recording mode) : mode_(mode) {}

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, std::nullopt, false});
    return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const ParamStore& store, ParamId id) {
    nodes_.push_back(Node{store.value(id), {}, id, true});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) {
        if (!owns(in)) throw ContractError("Tape::record: input belongs to another tape");
        needs = needs || nodes_[in.index].needs_grad;
    }
    Node node{std::move(value), {}, std::nullopt, needs && recording()};
    if (node.needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
    if (!owns(v)) throw ContractError("Tape: variable is not recorded on this tape");
    return nodes_[v.index].value;
}

Gradients Tape::gradients(Var loss) const {
    if (!owns(loss)) throw ContractError("gradients: loss is not connected to this tape");
    const Matrix& lv = nodes_[loss.index].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("gradients: loss must be 1x1, got " + lv.shape_string());
    }
    if (!std::isfinite(lv(0, 0))) throw NumericError("gradients: loss is not finite");

    Gradients out;
    for (const Node& n : nodes_)
        if (n.param && !out.contains(*n.param))
            out.emplace(*n.param, Matrix(n.value.rows(), n.value.cols()));
    if (!recording() || !nodes_[loss.index].needs_grad) return out;

    std::vector<Matrix> grads(nodes_.size());
    grads[loss.index] = Matrix(1, 1, 1.0);
    GradientSink sink(*this, grads);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        if (grads[i].empty()) continue;
        const Node& n = nodes_[i];
        if (n.backward) n.backward(grads[i], sink);
        if (n.param) {
            auto dst = out.at(*n.param).data();
            auto src = grads[i].data();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
    }
    return out;
}

bool GradientSink::needs(Var v) const { return tape_.nodes_[v.index].needs_grad; }

void GradientSink::add(Var v, const Matrix& grad) {
    if (!needs(v)) return;
    Matrix& g = grads_[v.index];
    if (g.empty()) {
        g = grad;
        return;
    }
    require_same_shape(g, grad, "GradientSink::add");
    auto dst = g.data();
    auto src = grad.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

void GradientSink::add(Var v, Matrix&& grad) {
    if (!needs(v)) return;
    Matrix& g = grads_[v.index];
    if (g.empty()) {
        g = std::move(grad);
        return;
    }
    add(v, static_cast<const Matrix&>(grad));
}

std::uint64_t hash_params(const ParamStore& store, const std::vector<ParamId>& ids) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (ParamId id : ids) {
        const Matrix& m = store.value(id);
        mix(m.data().data(), m.size() * sizeof(double));
    }
    return h;
}

}  // namespace vadeers::nn
