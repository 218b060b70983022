#include "csm/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csm/error.hpp"

namespace csm::ad {

// ---------------------------------------------------------------------------
// ParameterStore

ParamId ParameterStore::add(std::string name, Tensor value) {
    if (find(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
    value.setRequiresGrad(true);
    params_.push_back({std::move(name), std::move(value)});
    return params_.size() - 1;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    return std::nullopt;
}

std::size_t ParameterStore::scalarCount() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
        if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
    return true;
}

// ---------------------------------------------------------------------------

const char* opName(Op op) noexcept {
    switch (op) {
        case Op::Constant: return "constant";
        case Op::Param: return "param";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Affine: return "affine";
        case Op::MatMul: return "matmul";
        case Op::ConcatCols: return "concat";
        case Op::SliceCols: return "slice";
        case Op::GatherCols: return "gather";
        case Op::Reshape: return "reshape";
        case Op::Relu: return "relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::SoftmaxGroups: return "softmax";
        case Op::Log: return "log";
        case Op::Exp: return "exp";
        case Op::Abs: return "abs";
        case Op::Clamp: return "clamp";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::MeanRows: return "mean_rows";
        case Op::SumGroups: return "sum_groups";
        case Op::ProdGroups: return "prod_groups";
        case Op::StopGradient: return "stop_gradient";
    }
    return "?";
}

const Tensor& Var::value() const { return tape_->value(*this); }

namespace {

[[noreturn]] void shapeFail(Op op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(opName(op)) + ": incompatible shapes " + a.shapeString() + " and " + b.shapeString());
}

[[noreturn]] void shapeFail(Op op, const Tensor& a, const std::string& detail) {
    throw ShapeError(std::string(opName(op)) + ": operand " + a.shapeString() + " " + detail);
}

std::pair<std::size_t, std::size_t> broadcastShape(Op op, const Tensor& a, const Tensor& b) {
    auto dim = [&](std::size_t x, std::size_t y) {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        shapeFail(op, a, b);
    };
    return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

double sigmoidScalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

template <class F>
Tensor elementwise(const Tensor& x, F f) {
    Tensor out = x;
    for (auto& v : out.storage()) v = f(v);
    return out;
}

void checkGroup(Op op, const Tensor& x, std::size_t group) {
    if (group == 0 || x.cols() % group != 0)
        shapeFail(op, x, "has column count not divisible by group " + std::to_string(group));
}

/// Forward value of `node` given accessor to input values.
template <class Get>
Tensor evaluate(const Tape::Node& node, Get in) {
    switch (node.op) {
        case Op::Constant: return node.value;
        case Op::Param: return *node.source;
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            auto [r, c] = broadcastShape(node.op, a, b);
            Tensor out(r, c);
            const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const double x = a(ar ? 0 : i, ac ? 0 : j);
                    const double y = b(br ? 0 : i, bc ? 0 : j);
                    out(i, j) = node.op == Op::Add ? x + y : node.op == Op::Sub ? x - y : x * y;
                }
            return out;
        }
        case Op::Affine: {
            const double s = node.s0, t = node.s1;
            return elementwise(in(0), [s, t](double v) { return s * v + t; });
        }
        case Op::MatMul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.cols() != b.rows()) shapeFail(Op::MatMul, a, b);
            const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
            Tensor out(m, n);
            for (std::size_t i = 0; i < m; ++i) {
                double* o = &out(i, 0);
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = a(i, p);
                    if (av == 0.0) continue;
                    const double* brow = &b(p, 0);
                    for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
                }
            }
            return out;
        }
        case Op::ConcatCols: {
            const std::size_t r = in(0).rows();
            std::size_t c = 0;
            for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                if (in(k).rows() != r) shapeFail(Op::ConcatCols, in(0), in(k));
                c += in(k).cols();
            }
            Tensor out(r, c);
            for (std::size_t i = 0; i < r; ++i) {
                double* o = &out(i, 0);
                for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                    auto row = in(k).rowSpan(i);
                    o = std::copy(row.begin(), row.end(), o);
                }
            }
            return out;
        }
        case Op::SliceCols: {
            const Tensor& x = in(0);
            if (node.i1 == 0 || node.i0 + node.i1 > x.cols())
                shapeFail(Op::SliceCols, x, "cannot slice columns [" + std::to_string(node.i0) + ", " + std::to_string(node.i0 + node.i1) + ")");
            Tensor out(x.rows(), node.i1);
            for (std::size_t i = 0; i < x.rows(); ++i)
                std::copy_n(&x(i, node.i0), node.i1, &out(i, 0));
            return out;
        }
        case Op::GatherCols: {
            const Tensor& x = in(0);
            for (auto j : node.indices)
                if (j >= x.cols()) shapeFail(Op::GatherCols, x, "has no column " + std::to_string(j));
            if (node.indices.empty()) shapeFail(Op::GatherCols, x, "gathered with no indices");
            Tensor out(x.rows(), node.indices.size());
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < node.indices.size(); ++j) out(i, j) = x(i, node.indices[j]);
            return out;
        }
        case Op::Reshape: return in(0).reshaped(node.i0, node.i1);
        case Op::Relu: return elementwise(in(0), [](double v) { return v > 0.0 ? v : 0.0; });
        case Op::Sigmoid: return elementwise(in(0), sigmoidScalar);
        case Op::SoftmaxGroups: {
            const Tensor& x = in(0);
            checkGroup(Op::SoftmaxGroups, x, node.i0);
            Tensor out = x;
            const std::size_t g = node.i0;
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t s = 0; s < x.cols(); s += g) {
                    double* v = &out(i, s);
                    const double mx = *std::max_element(v, v + g);
                    double z = 0.0;
                    for (std::size_t j = 0; j < g; ++j) z += (v[j] = std::exp(v[j] - mx));
                    for (std::size_t j = 0; j < g; ++j) v[j] /= z;
                }
            return out;
        }
        case Op::Log: return elementwise(in(0), [](double v) { return std::log(v); });
        case Op::Exp: return elementwise(in(0), [](double v) { return std::exp(v); });
        case Op::Abs: return elementwise(in(0), [](double v) { return std::fabs(v); });
        case Op::Clamp: {
            const double lo = node.s0, hi = node.s1;
            return elementwise(in(0), [lo, hi](double v) { return std::clamp(v, lo, hi); });
        }
        case Op::Sum:
        case Op::Mean: {
            const Tensor& x = in(0);
            double s = 0.0;
            for (double v : x.data()) s += v;
            if (node.op == Op::Mean) s /= static_cast<double>(x.size());
            return Tensor::scalar(s);
        }
        case Op::MeanRows: {
            const Tensor& x = in(0);
            Tensor out(1, x.cols());
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
            for (auto& v : out.storage()) v /= static_cast<double>(x.rows());
            return out;
        }
        case Op::SumGroups:
        case Op::ProdGroups: {
            const Tensor& x = in(0);
            checkGroup(node.op, x, node.i0);
            const std::size_t g = node.i0, k = x.cols() / g;
            Tensor out(x.rows(), k);
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double acc = node.op == Op::SumGroups ? 0.0 : 1.0;
                    for (std::size_t j = 0; j < g; ++j) {
                        const double v = x(i, t * g + j);
                        acc = node.op == Op::SumGroups ? acc + v : acc * v;
                    }
                    out(i, t) = acc;
                }
            return out;
        }
        case Op::StopGradient: return in(0);
    }
    throw Error("unknown op");
}

void accumulate(Tensor& dst, const Tensor& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

/// Sums a broadcast gradient back down to `shape`.
Tensor reduceTo(const Tensor& grad, const Tensor& shape) {
    if (grad.sameShape(shape)) return grad;
    Tensor out(shape.rows(), shape.cols());
    const bool rr = shape.rows() == 1, rc = shape.cols() == 1;
    for (std::size_t i = 0; i < grad.rows(); ++i)
        for (std::size_t j = 0; j < grad.cols(); ++j) out(rr ? 0 : i, rc ? 0 : j) += grad(i, j);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    n.value.setRequiresGrad(false);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(const ParameterStore& store, ParamId id) {
    Node n;
    n.op = Op::Param;
    n.source = &store.value(id);
    n.param = id;
    n.value = *n.source;
    n.requiresGrad = n.source->requiresGrad();
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push(Node node) {
    for (auto id : node.inputs) {
        if (id >= nodes_.size()) throw Error(std::string(opName(node.op)) + ": operand not on this tape");
        node.requiresGrad = node.requiresGrad || nodes_[id].requiresGrad;
    }
    if (node.op == Op::StopGradient) node.requiresGrad = false;
    node.value = evaluate(node, [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; });
    nodes_.push_back(std::move(node));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::replay(Var v, bool freezeStopGradients) const {
    std::vector<Tensor> values(v.id() + 1);
    for (std::uint32_t id = 0; id <= v.id(); ++id) {
        const Node& n = nodes_[id];
        if (freezeStopGradients && n.op == Op::StopGradient) {
            values[id] = n.value;
            continue;
        }
        values[id] = evaluate(n, [&](std::size_t k) -> const Tensor& { return values[n.inputs[k]]; });
    }
    return values[v.id()];
}

GradientMap Tape::backward(Var loss) const {
    const Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1) throw ShapeError("backward: loss must be 1x1, got " + root.value.shapeString());

    GradientMap out;
    for (const auto& n : nodes_)
        if (n.op == Op::Param && out.find(n.param) == out.end()) out.emplace(n.param, Tensor(n.value.rows(), n.value.cols()));

    std::vector<Tensor> grads(loss.id() + 1);
    grads[loss.id()] = Tensor::scalar(1.0);

    for (std::int64_t id = loss.id(); id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.empty() || !n.requiresGrad) continue;

        auto input = [&](std::size_t k) -> const Node& { return nodes_[n.inputs[k]]; };
        auto send = [&](std::size_t k, const Tensor& contribution) {
            const auto target = n.inputs[k];
            if (!nodes_[target].requiresGrad) return;
            accumulate(grads[target], contribution);
        };

        switch (n.op) {
            case Op::Constant:
            case Op::StopGradient: break;
            case Op::Param: accumulate(out.at(n.param), g); break;
            case Op::Add:
                send(0, reduceTo(g, input(0).value));
                send(1, reduceTo(g, input(1).value));
                break;
            case Op::Sub: {
                send(0, reduceTo(g, input(0).value));
                Tensor neg = g;
                for (auto& v : neg.storage()) v = -v;
                send(1, reduceTo(neg, input(1).value));
                break;
            }
            case Op::Mul: {
                const Tensor& a = input(0).value;
                const Tensor& b = input(1).value;
                const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
                Tensor ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) {
                        ga(i, j) = g(i, j) * b(br ? 0 : i, bc ? 0 : j);
                        gb(i, j) = g(i, j) * a(ar ? 0 : i, ac ? 0 : j);
                    }
                send(0, reduceTo(ga, a));
                send(1, reduceTo(gb, b));
                break;
            }
            case Op::Affine: {
                Tensor gx = g;
                for (auto& v : gx.storage()) v *= n.s0;
                send(0, gx);
                break;
            }
            case Op::MatMul: {
                const Tensor& a = input(0).value;
                const Tensor& b = input(1).value;
                const std::size_t m = a.rows(), k = a.cols(), cols = b.cols();
                if (input(0).requiresGrad) {
                    Tensor ga(m, k);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = &g(i, 0);
                        for (std::size_t p = 0; p < k; ++p) {
                            const double* brow = &b(p, 0);
                            double s = 0.0;
                            for (std::size_t j = 0; j < cols; ++j) s += grow[j] * brow[j];
                            ga(i, p) = s;
                        }
                    }
                    send(0, ga);
                }
                if (input(1).requiresGrad) {
                    Tensor gb(k, cols);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = &g(i, 0);
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = a(i, p);
                            if (av == 0.0) continue;
                            double* out_row = &gb(p, 0);
                            for (std::size_t j = 0; j < cols; ++j) out_row[j] += av * grow[j];
                        }
                    }
                    send(1, gb);
                }
                break;
            }
            case Op::ConcatCols: {
                std::size_t offset = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const std::size_t w = input(k).value.cols();
                    if (input(k).requiresGrad) {
                        Tensor part(g.rows(), w);
                        for (std::size_t i = 0; i < g.rows(); ++i) std::copy_n(&g(i, offset), w, &part(i, 0));
                        send(k, part);
                    }
                    offset += w;
                }
                break;
            }
            case Op::SliceCols: {
                const Tensor& x = input(0).value;
                Tensor gx(x.rows(), x.cols());
                for (std::size_t i = 0; i < x.rows(); ++i) std::copy_n(&g(i, 0), n.i1, &gx(i, n.i0));
                send(0, gx);
                break;
            }
            case Op::GatherCols: {
                const Tensor& x = input(0).value;
                Tensor gx(x.rows(), x.cols());
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < n.indices.size(); ++j) gx(i, n.indices[j]) += g(i, j);
                send(0, gx);
                break;
            }
            case Op::Reshape: {
                const Tensor& x = input(0).value;
                send(0, g.reshaped(x.rows(), x.cols()));
                break;
            }
            case Op::Relu: {
                Tensor gx = g;
                const auto x = input(0).value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i)
                    if (!(x[i] > 0.0)) d[i] = 0.0;
                send(0, gx);
                break;
            }
            case Op::Sigmoid: {
                Tensor gx = g;
                const auto s = n.value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i] * (1.0 - s[i]);
                send(0, gx);
                break;
            }
            case Op::SoftmaxGroups: {
                const Tensor& s = n.value;
                const std::size_t grp = n.i0;
                Tensor gx(s.rows(), s.cols());
                for (std::size_t i = 0; i < s.rows(); ++i)
                    for (std::size_t st = 0; st < s.cols(); st += grp) {
                        double dot = 0.0;
                        for (std::size_t j = st; j < st + grp; ++j) dot += s(i, j) * g(i, j);
                        for (std::size_t j = st; j < st + grp; ++j) gx(i, j) = s(i, j) * (g(i, j) - dot);
                    }
                send(0, gx);
                break;
            }
            case Op::Log: {
                Tensor gx = g;
                const auto x = input(0).value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] /= x[i];
                send(0, gx);
                break;
            }
            case Op::Exp: {
                Tensor gx = g;
                const auto y = n.value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i];
                send(0, gx);
                break;
            }
            case Op::Abs: {
                Tensor gx = g;
                const auto x = input(0).value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
                send(0, gx);
                break;
            }
            case Op::Clamp: {
                Tensor gx = g;
                const auto x = input(0).value.data();
                auto d = gx.data();
                for (std::size_t i = 0; i < d.size(); ++i)
                    if (x[i] < n.s0 || x[i] > n.s1) d[i] = 0.0;
                send(0, gx);
                break;
            }
            case Op::Sum:
            case Op::Mean: {
                const Tensor& x = input(0).value;
                const double scale = n.op == Op::Mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
                send(0, Tensor(x.rows(), x.cols(), g[0] * scale));
                break;
            }
            case Op::MeanRows: {
                const Tensor& x = input(0).value;
                Tensor gx(x.rows(), x.cols());
                const double scale = 1.0 / static_cast<double>(x.rows());
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < x.cols(); ++j) gx(i, j) = g(0, j) * scale;
                send(0, gx);
                break;
            }
            case Op::SumGroups: {
                const Tensor& x = input(0).value;
                const std::size_t grp = n.i0;
                Tensor gx(x.rows(), x.cols());
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < x.cols(); ++j) gx(i, j) = g(i, j / grp);
                send(0, gx);
                break;
            }
            case Op::ProdGroups: {
                // Prefix/suffix products give exact gradients even with zero factors.
                const Tensor& x = input(0).value;
                const std::size_t grp = n.i0;
                Tensor gx(x.rows(), x.cols());
                std::vector<double> prefix(grp + 1), suffix(grp + 1);
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t t = 0; t < x.cols() / grp; ++t) {
                        const double* v = &x(i, t * grp);
                        prefix[0] = 1.0;
                        for (std::size_t j = 0; j < grp; ++j) prefix[j + 1] = prefix[j] * v[j];
                        suffix[grp] = 1.0;
                        for (std::size_t j = grp; j-- > 0;) suffix[j] = suffix[j + 1] * v[j];
                        for (std::size_t j = 0; j < grp; ++j) gx(i, t * grp + j) = g(i, t) * prefix[j] * suffix[j + 1];
                    }
                send(0, gx);
                break;
            }
        }
        if (n.op != Op::Param) g = Tensor();  // free early
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

Tape* sameTape(std::initializer_list<Var> vars) {
    Tape* t = vars.begin()->tape();
    for (const auto& v : vars)
        if (!v.valid() || v.tape() != t) throw Error("operands live on different tapes");
    return t;
}

Var unary(Op op, Var x) {
    Tape::Node n;
    n.op = op;
    n.inputs = {x.id()};
    return sameTape({x})->push(std::move(n));
}

Var binary(Op op, Var a, Var b) {
    Tape::Node n;
    n.op = op;
    n.inputs = {a.id(), b.id()};
    return sameTape({a, b})->push(std::move(n));
}

}  // namespace

Var operator+(Var a, Var b) { return binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return binary(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return binary(Op::Mul, a, b); }
Var matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }

Var affine(Var x, double scale, double shift) {
    Tape::Node n;
    n.op = Op::Affine;
    n.inputs = {x.id()};
    n.s0 = scale;
    n.s1 = shift;
    return sameTape({x})->push(std::move(n));
}

Var concatCols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    if (parts.size() == 1) return parts[0];
    Tape::Node n;
    n.op = Op::ConcatCols;
    Tape* t = parts[0].tape();
    for (const auto& p : parts) {
        if (p.tape() != t) throw Error("operands live on different tapes");
        n.inputs.push_back(p.id());
    }
    return t->push(std::move(n));
}

Var sliceCols(Var x, std::size_t begin, std::size_t count) {
    Tape::Node n;
    n.op = Op::SliceCols;
    n.inputs = {x.id()};
    n.i0 = begin;
    n.i1 = count;
    return sameTape({x})->push(std::move(n));
}

Var gatherCols(Var x, std::vector<std::size_t> indices) {
    Tape::Node n;
    n.op = Op::GatherCols;
    n.inputs = {x.id()};
    n.indices = std::move(indices);
    return sameTape({x})->push(std::move(n));
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
    Tape::Node n;
    n.op = Op::Reshape;
    n.inputs = {x.id()};
    n.i0 = rows;
    n.i1 = cols;
    return sameTape({x})->push(std::move(n));
}

Var relu(Var x) { return unary(Op::Relu, x); }
Var sigmoid(Var x) { return unary(Op::Sigmoid, x); }
Var log(Var x) { return unary(Op::Log, x); }
Var exp(Var x) { return unary(Op::Exp, x); }
Var abs(Var x) { return unary(Op::Abs, x); }
Var sum(Var x) { return unary(Op::Sum, x); }
Var mean(Var x) { return unary(Op::Mean, x); }
Var meanRows(Var x) { return unary(Op::MeanRows, x); }
Var stopGradient(Var x) { return unary(Op::StopGradient, x); }

Var softmaxGroups(Var x, std::size_t group) {
    Tape::Node n;
    n.op = Op::SoftmaxGroups;
    n.inputs = {x.id()};
    n.i0 = group;
    return sameTape({x})->push(std::move(n));
}

Var clamp(Var x, double lo, double hi) {
    Tape::Node n;
    n.op = Op::Clamp;
    n.inputs = {x.id()};
    n.s0 = lo;
    n.s1 = hi;
    return sameTape({x})->push(std::move(n));
}

Var sumGroups(Var x, std::size_t group) {
    Tape::Node n;
    n.op = Op::SumGroups;
    n.inputs = {x.id()};
    n.i0 = group;
    return sameTape({x})->push(std::move(n));
}

Var prodGroups(Var x, std::size_t group) {
    Tape::Node n;
    n.op = Op::ProdGroups;
    n.inputs = {x.id()};
    n.i0 = group;
    return sameTape({x})->push(std::move(n));
}

}  // namespace csm::ad
