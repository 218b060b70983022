#include "csm/ad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "csm/error.hpp"

namespace csm::ad {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw ShapeError("tensor dimensions must be positive, got " + ad::shapeString(rows, cols));
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty() || shape_.size() > 2) throw ShapeError("tensor rank must be 1 or 2");
    for (auto d : shape_)
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
    const auto expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    if (expected != data_.size())
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " + shapeString());
}

Tensor Tensor::row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::fromRows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer for tensor");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const noexcept { return shape_.size() == 1 ? 1 : shape_[0]; }

std::size_t Tensor::cols() const noexcept { return shape_.size() == 1 ? shape_[0] : shape_[1]; }

bool Tensor::allFinite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::sliceRows(std::size_t begin, std::size_t count) const {
    if (begin + count > rows() || count == 0)
        throw ShapeError("row slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") out of range for " + shapeString());
    const auto c = cols();
    std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                            data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
    return Tensor({count, c}, std::move(out));
}

Tensor Tensor::gatherRows(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw ShapeError("gatherRows with no indices");
    const auto c = cols();
    std::vector<double> out;
    out.reserve(indices.size() * c);
    for (auto i : indices) {
        if (i >= rows()) throw ShapeError("row index " + std::to_string(i) + " out of range for " + shapeString());
        auto src = rowSpan(i);
        out.insert(out.end(), src.begin(), src.end());
    }
    return Tensor({indices.size(), c}, std::move(out));
}

Tensor Tensor::reshaped(std::size_t r, std::size_t c) const {
    if (r * c != size()) throw ShapeError("cannot reshape " + shapeString() + " to " + ad::shapeString(r, c));
    return Tensor({r, c}, data_);
}

std::string Tensor::shapeString() const { return ad::shapeString(rows(), cols()); }

std::string shapeString(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

}  // namespace csm::ad
