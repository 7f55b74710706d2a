#pragma once

#include "samlab/tensor.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace samlab {

struct Segment {
    std::string name;
    std::size_t offset = 0;
    Shape shape;

    std::size_t size() const { return shape_size(shape); }
    bool operator==(const Segment&) const = default;
};

// Named, disjoint, contiguous segments covering one flat array.
class Layout {
public:
    class Builder {
    public:
        Builder& add(std::string name, Shape shape);
        std::shared_ptr<const Layout> build();

    private:
        std::vector<Segment> segments_;
        std::size_t total_ = 0;
    };

    const std::vector<Segment>& segments() const noexcept { return segments_; }
    std::size_t total_size() const noexcept { return total_; }
    const Segment& segment(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const;

    bool operator==(const Layout& other) const { return segments_ == other.segments_; }

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const Layout>;

// Flat parameter (or gradient) array plus its segment map. Model weights,
// perturbation gradients and updating gradients all share this type so they
// can be combined element-wise once the layouts are checked.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(LayoutPtr layout);
    ParamVector(LayoutPtr layout, std::vector<double> values);

    // Single-segment convenience, handy for toy objectives.
    static ParamVector flat(std::vector<double> values, std::string name = "theta");

    const LayoutPtr& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> segment(std::string_view name);
    std::span<const double> segment(std::string_view name) const;
    Tensor segment_tensor(std::string_view name) const;

    bool compatible(const ParamVector& other) const noexcept;
    ParamVector zeros_like() const { return ParamVector(layout_); }
    bool all_finite() const noexcept;

    bool operator==(const ParamVector& other) const;

private:
    LayoutPtr layout_;
    std::vector<double> data_;
};

using GradVector = ParamVector;

// Throws SegmentMismatch naming `op` when layouts differ.
void require_compatible(const ParamVector& a, const ParamVector& b, std::string_view op);

// Sequential left-to-right accumulation.
double dot(const ParamVector& a, const ParamVector& b);
double norm2(const ParamVector& a);
// y + alpha * x
ParamVector axpy(const ParamVector& y, double alpha, const ParamVector& x);
ParamVector scaled(const ParamVector& x, double alpha);
ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
double distance(const ParamVector& a, const ParamVector& b);
double max_abs_diff(const ParamVector& a, const ParamVector& b);

} // namespace samlab
