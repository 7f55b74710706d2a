#include "samlab/tensor.hpp"

#include "samlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace samlab {

std::string to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    if (shape_.empty()) throw ShapeError("tensor: empty shape");
    for (auto d : shape_)
        if (d == 0) throw ShapeError("tensor: zero extent in shape " + to_string(shape_));
    data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(std::size_t rows, std::size_t cols) : Tensor(Shape{rows, cols}) {}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    Tensor t(std::move(shape));
    if (data.size() != t.data_.size())
        throw ShapeError("tensor: shape " + to_string(t.shape_) + " needs " +
                         std::to_string(t.data_.size()) + " values, got " +
                         std::to_string(data.size()));
    t.data_ = std::move(data);
    if (!t.all_finite()) throw NumericError("tensor: non-finite value in input");
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return from(Shape{rows, cols}, std::move(data));
}

Tensor Tensor::scalar(double value) { return from(Shape{1, 1}, {value}); }

std::size_t Tensor::rows() const {
    if (shape_.size() != 2) throw ShapeError("tensor: expected rank 2, got " + to_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() != 2) throw ShapeError("tensor: expected rank 2, got " + to_string(shape_));
    return shape_[1];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

} // namespace samlab
