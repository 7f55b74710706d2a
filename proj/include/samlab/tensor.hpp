#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace samlab {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. Every op in the library works on rank-2
// tensors; a row vector is 1 x n and a scalar is 1 x 1.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled.
    explicit Tensor(Shape shape);
    Tensor(std::size_t rows, std::size_t cols);

    // Validating constructor for external input: checks size and finiteness.
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static Tensor scalar(double value);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool all_finite() const noexcept;
    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

} // namespace samlab
