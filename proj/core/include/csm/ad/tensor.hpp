#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace csm::ad {

/// Dense row-major tensor of doubles. Everything in the library is at most
/// two-dimensional, so rows()/cols() are the primary accessors; a rank-1
/// tensor of length n is treated as 1 x n.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor row(std::vector<double> values);
    static Tensor fromRows(std::initializer_list<std::initializer_list<double>> rows);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    const double& operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    std::span<const double> rowSpan(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
    std::span<double> rowSpan(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

    bool requiresGrad() const noexcept { return requiresGrad_; }
    void setRequiresGrad(bool v) noexcept { requiresGrad_ = v; }

    bool sameShape(const Tensor& other) const noexcept { return rows() == other.rows() && cols() == other.cols(); }
    bool allFinite() const noexcept;
    void fill(double v);

    /// Rows [begin, begin+count) as a new tensor.
    Tensor sliceRows(std::size_t begin, std::size_t count) const;
    /// Rows picked by index, in the given order.
    Tensor gatherRows(std::span<const std::size_t> indices) const;
    /// Same data, new shape. Throws ShapeError if the element count differs.
    Tensor reshaped(std::size_t rows, std::size_t cols) const;

    std::string shapeString() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::vector<std::size_t> shape_{0, 0};
    std::vector<double> data_;
    bool requiresGrad_ = false;
};

std::string shapeString(std::size_t rows, std::size_t cols);

}  // namespace csm::ad
