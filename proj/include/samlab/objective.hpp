#pragma once

#include "samlab/graph.hpp"
#include "samlab/model.hpp"
#include "samlab/param_vector.hpp"

#include <vector>

namespace samlab {

struct Evaluation {
    double loss = 0.0;
    GradVector grad;
};

// A loss over fixed data (one mini-batch). evaluate() costs one forward and
// one backward pass; loss() costs one forward pass.
class Objective {
public:
    virtual ~Objective() = default;
    virtual Evaluation evaluate(const ParamVector& params) const = 0;
    virtual double loss(const ParamVector& params) const = 0;
    // Samples this objective covers, for throughput accounting.
    virtual std::size_t samples() const { return 1; }
};

class ModelObjective final : public Objective {
public:
    ModelObjective(const ModelConfig& config, Batch batch)
        : config_(config), batch_(std::move(batch)) {}

    Evaluation evaluate(const ParamVector& params) const override;
    double loss(const ParamVector& params) const override;
    std::size_t samples() const override { return batch_.size(); }

private:
    ModelConfig config_;
    Batch batch_;
};

// L(theta) = 1/2 * sum_i h_i (theta_i - c_i)^2, evaluated through the tape.
// Hessian is diag(h), so max(h) is the curvature constant of the remainder
// bounds used by the Taylor checks.
class QuadraticObjective final : public Objective {
public:
    QuadraticObjective(std::vector<double> curvature, std::vector<double> center);
    // Unit curvature, minimum at the origin: L = 1/2 ||theta||^2.
    static QuadraticObjective unit(std::size_t dim);

    Evaluation evaluate(const ParamVector& params) const override;
    double loss(const ParamVector& params) const override;

    double max_curvature() const noexcept { return max_curvature_; }
    std::size_t dim() const noexcept { return curvature_.size(); }
    const std::vector<double>& curvature() const noexcept { return curvature_; }
    const std::vector<double>& center() const noexcept { return center_; }

private:
    Tape build(const ParamVector& params) const;

    std::vector<double> curvature_;
    std::vector<double> center_;
    Tensor scale_;   // diag(sqrt(h))
    Tensor target_;  // sqrt(h) * c
    double max_curvature_ = 0.0;
};

// Forwards to another objective and counts passes. Used both to keep
// diagnostic gradient evaluations on a separate tally and by tests that
// audit the optimizers' own accounting.
class CountingObjective final : public Objective {
public:
    explicit CountingObjective(const Objective& inner) : inner_(inner) {}

    Evaluation evaluate(const ParamVector& params) const override;
    double loss(const ParamVector& params) const override;
    std::size_t samples() const override { return inner_.samples(); }

    std::size_t forwards() const noexcept { return forwards_; }
    std::size_t backwards() const noexcept { return backwards_; }
    void reset() noexcept { forwards_ = backwards_ = 0; }

private:
    const Objective& inner_;
    mutable std::size_t forwards_ = 0;
    mutable std::size_t backwards_ = 0;
};

} // namespace samlab
