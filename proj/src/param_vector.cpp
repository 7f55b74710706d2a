#include "samlab/param_vector.hpp"

#include "samlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

Layout::Builder& Layout::Builder::add(std::string name, Shape shape) {
    for (const auto& s : segments_)
        if (s.name == name) throw ConfigError("layout: duplicate segment '" + name + "'");
    Segment seg{std::move(name), total_, std::move(shape)};
    if (seg.shape.empty() || seg.size() == 0)
        throw ShapeError("layout: segment '" + seg.name + "' has empty shape");
    total_ += seg.size();
    segments_.push_back(std::move(seg));
    return *this;
}

LayoutPtr Layout::Builder::build() {
    auto layout = std::make_shared<Layout>();
    layout->segments_ = std::move(segments_);
    layout->total_ = total_;
    segments_.clear();
    total_ = 0;
    return layout;
}

std::size_t Layout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < segments_.size(); ++i)
        if (segments_[i].name == name) return i;
    throw SegmentMismatch("layout: no segment named '" + std::string(name) + "'");
}

const Segment& Layout::segment(std::string_view name) const { return segments_[index_of(name)]; }

bool Layout::contains(std::string_view name) const {
    return std::any_of(segments_.begin(), segments_.end(),
                       [&](const Segment& s) { return s.name == name; });
}

ParamVector::ParamVector(LayoutPtr layout) : layout_(std::move(layout)) {
    if (!layout_) throw UsageError("ParamVector: null layout");
    data_.assign(layout_->total_size(), 0.0);
}

ParamVector::ParamVector(LayoutPtr layout, std::vector<double> values) : layout_(std::move(layout)) {
    if (!layout_) throw UsageError("ParamVector: null layout");
    if (values.size() != layout_->total_size())
        throw ShapeError("ParamVector: layout needs " + std::to_string(layout_->total_size()) +
                         " values, got " + std::to_string(values.size()));
    data_ = std::move(values);
}

ParamVector ParamVector::flat(std::vector<double> values, std::string name) {
    auto layout = Layout::Builder{}.add(std::move(name), {1, values.size()}).build();
    return ParamVector(std::move(layout), std::move(values));
}

std::span<double> ParamVector::segment(std::string_view name) {
    const auto& s = layout_->segment(name);
    return std::span<double>(data_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::segment(std::string_view name) const {
    const auto& s = layout_->segment(name);
    return std::span<const double>(data_).subspan(s.offset, s.size());
}

Tensor ParamVector::segment_tensor(std::string_view name) const {
    const auto& s = layout_->segment(name);
    auto view = segment(name);
    Tensor t(s.shape);
    std::copy(view.begin(), view.end(), t.values().begin());
    return t;
}

bool ParamVector::compatible(const ParamVector& other) const noexcept {
    if (layout_ == other.layout_) return true;
    if (!layout_ || !other.layout_) return false;
    return *layout_ == *other.layout_;
}

bool ParamVector::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool ParamVector::operator==(const ParamVector& other) const {
    return compatible(other) && data_ == other.data_;
}

void require_compatible(const ParamVector& a, const ParamVector& b, std::string_view op) {
    if (!a.compatible(b))
        throw SegmentMismatch(std::string(op) + ": segment maps differ (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                              " values)");
}

double dot(const ParamVector& a, const ParamVector& b) {
    require_compatible(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const ParamVector& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * a[i];
    return std::sqrt(acc);
}

ParamVector axpy(const ParamVector& y, double alpha, const ParamVector& x) {
    require_compatible(y, x, "axpy");
    ParamVector out = y;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * x[i];
    return out;
}

ParamVector scaled(const ParamVector& x, double alpha) {
    ParamVector out = x;
    for (auto& v : out.values()) v *= alpha;
    return out;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
    require_compatible(a, b, "add");
    ParamVector out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    require_compatible(a, b, "subtract");
    ParamVector out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

double distance(const ParamVector& a, const ParamVector& b) { return norm2(a - b); }

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
    require_compatible(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace samlab
