#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csm/ad/tensor.hpp"

namespace csm::ad {

using ParamId = std::size_t;

struct Parameter {
    std::string name;
    Tensor value;
};

/// Owns the learnable tensors of a model. Ids are stable indices.
class ParameterStore {
public:
    ParamId add(std::string name, Tensor value);

    Tensor& value(ParamId id) { return params_.at(id).value; }
    const Tensor& value(ParamId id) const { return params_.at(id).value; }
    const std::string& name(ParamId id) const { return params_.at(id).name; }
    std::optional<ParamId> find(std::string_view name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalarCount() const noexcept;
    const std::vector<Parameter>& all() const noexcept { return params_; }

    friend bool operator==(const ParameterStore& a, const ParameterStore& b);

private:
    std::vector<Parameter> params_;
};

using GradientMap = std::map<ParamId, Tensor>;

enum class Op : std::uint8_t {
    Constant,
    Param,
    Add,
    Sub,
    Mul,
    Affine,  // scale * x + shift
    MatMul,
    ConcatCols,
    SliceCols,
    GatherCols,
    Reshape,
    Relu,
    Sigmoid,
    SoftmaxGroups,
    Log,
    Exp,
    Abs,
    Clamp,
    Sum,
    Mean,
    MeanRows,
    SumGroups,
    ProdGroups,
    StopGradient,
};

const char* opName(Op op) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape() const noexcept { return tape_; }
    std::uint32_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Record of primitive operations in topological order. Each node keeps its
/// forward value; backward() walks the record in reverse.
class Tape {
public:
    struct Node {
        Op op = Op::Constant;
        std::vector<std::uint32_t> inputs;
        Tensor value;
        bool requiresGrad = false;
        // Op attributes.
        const Tensor* source = nullptr;  // Param
        ParamId param = 0;               // Param
        double s0 = 0.0, s1 = 0.0;       // Affine, Clamp
        std::size_t i0 = 0, i1 = 0;      // SliceCols, Reshape, *Groups
        std::vector<std::size_t> indices;  // GatherCols
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf reading the parameter's current value. The store must outlive the tape.
    Var param(const ParameterStore& store, ParamId id);

    Var push(Node node);

    const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
    const Node& node(std::uint32_t id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse-mode gradients of a 1x1 loss with respect to every parameter
    /// leaf on the tape. Parameters with no path to the loss get exact zeros.
    GradientMap backward(Var loss) const;

    /// Recomputes every node up to `v` from the recorded operations and the
    /// current leaf values, returning v's recomputed value. With
    /// `freezeStopGradients`, stop-gradient nodes return their recorded value
    /// instead, so the replayed function is exactly the one backward()
    /// differentiates (used by finite-difference checks).
    Tensor replay(Var v, bool freezeStopGradients = false) const;

private:
    std::vector<Node> nodes_;
};

// Elementwise arithmetic with row/column broadcasting (a dimension of 1 broadcasts).
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var affine(Var x, double scale, double shift);
inline Var operator*(double s, Var x) { return affine(x, s, 0.0); }
inline Var operator+(Var x, double s) { return affine(x, 1.0, s); }
inline Var operator-(double s, Var x) { return affine(x, -1.0, s); }
inline Var operator-(Var x) { return affine(x, -1.0, 0.0); }

Var matmul(Var a, Var b);
Var concatCols(std::span<const Var> parts);
Var sliceCols(Var x, std::size_t begin, std::size_t count);
/// out[:, j] = x[:, indices[j]]; indices may repeat.
Var gatherCols(Var x, std::vector<std::size_t> indices);
Var reshape(Var x, std::size_t rows, std::size_t cols);

Var relu(Var x);
Var sigmoid(Var x);
/// Softmax over consecutive column groups of width `group`, computed with max-subtraction.
Var softmaxGroups(Var x, std::size_t group);
inline Var softmax(Var x) { return softmaxGroups(x, x.cols()); }
Var log(Var x);
Var exp(Var x);
Var abs(Var x);
/// Gradient passes where lo <= x <= hi, zero elsewhere.
Var clamp(Var x, double lo, double hi);

Var sum(Var x);
Var mean(Var x);
/// 1 x cols: mean over rows.
Var meanRows(Var x);
/// rows x (cols/group): sum over consecutive column groups.
Var sumGroups(Var x, std::size_t group);
/// rows x (cols/group): product over consecutive column groups.
Var prodGroups(Var x, std::size_t group);

/// Identity forward, zero gradient backward.
Var stopGradient(Var x);

}  // namespace csm::ad
