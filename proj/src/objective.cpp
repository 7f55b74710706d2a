#include "samlab/objective.hpp"

#include "samlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

Evaluation ModelObjective::evaluate(const ParamVector& params) const {
    auto lt = model_loss(params, batch_, config_);
    return {lt.loss, lt.tape.backward()};
}

double ModelObjective::loss(const ParamVector& params) const {
    return model_loss(params, batch_, config_).loss;
}

QuadraticObjective::QuadraticObjective(std::vector<double> curvature, std::vector<double> center)
    : curvature_(std::move(curvature)), center_(std::move(center)) {
    const std::size_t n = curvature_.size();
    if (n == 0 || center_.size() != n)
        throw ShapeError("quadratic: curvature and center must be non-empty and of equal length");
    for (double h : curvature_)
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("quadratic: curvature must be positive");
    scale_ = Tensor(n, n);
    target_ = Tensor(1, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::sqrt(curvature_[i]);
        scale_.at(i, i) = s;
        target_[i] = s * center_[i];
    }
    max_curvature_ = *std::max_element(curvature_.begin(), curvature_.end());
}

QuadraticObjective QuadraticObjective::unit(std::size_t dim) {
    return QuadraticObjective(std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0));
}

Tape QuadraticObjective::build(const ParamVector& params) const {
    if (params.size() != dim())
        throw ShapeError("quadratic: expected " + std::to_string(dim()) + " parameters, got " +
                         std::to_string(params.size()));
    const auto& seg = params.layout()->segments().front();
    if (params.layout()->segments().size() != 1)
        throw ShapeError("quadratic: expected a single-segment ParamVector");
    Tape tape(params.layout());
    Var theta = tape.parameter(params, seg.name);
    if (tape.value(theta).rows() != 1)
        throw ShapeError("quadratic: parameter segment must be a 1 x n row");
    // mean of n squared residuals, times n/2
    Var residual = tape.squared_error(tape.matmul(theta, tape.constant(scale_)), target_);
    tape.set_loss(tape.scale(residual, 0.5 * static_cast<double>(dim())));
    return tape;
}

Evaluation QuadraticObjective::evaluate(const ParamVector& params) const {
    Tape tape = build(params);
    return {tape.loss(), tape.backward()};
}

double QuadraticObjective::loss(const ParamVector& params) const { return build(params).loss(); }

Evaluation CountingObjective::evaluate(const ParamVector& params) const {
    ++forwards_;
    ++backwards_;
    return inner_.evaluate(params);
}

double CountingObjective::loss(const ParamVector& params) const {
    ++forwards_;
    return inner_.loss(params);
}

} // namespace samlab
