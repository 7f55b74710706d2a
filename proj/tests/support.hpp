#pragma once

#include "samlab/graph.hpp"
#include "samlab/model.hpp"
#include "samlab/objective.hpp"
#include "samlab/optim.hpp"
#include "samlab/param_vector.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace samlab::test {

// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-4);

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

// Central differences over every coordinate against objective.evaluate().
GradientCheck finite_difference_check(const Objective& objective, const ParamVector& params,
                                      double h = 1e-5);

ParamVector random_params(const LayoutPtr& layout, std::uint64_t seed, double scale = 1.0);

// Random connected-ish undirected graphs with few nodes, for cheap checks.
std::vector<GraphSample> small_graphs(std::size_t count, std::uint64_t seed, std::size_t min_nodes = 3,
                                      std::size_t max_nodes = 5, std::size_t node_dim = 4);

ModelConfig small_model(ModelKind kind, TaskKind task, std::uint64_t init_seed, std::size_t hidden = 5);

// A fixed mini-batch stream: step t uses batches[t % batches.size()].
struct BatchStream {
    std::vector<GraphSample> data;
    ModelConfig model;
    std::vector<std::vector<std::size_t>> batches;

    std::unique_ptr<Objective> objective(std::size_t step) const;
    std::size_t steps_per_epoch() const { return batches.size(); }
};

BatchStream motif_stream(std::uint64_t seed, std::size_t samples = 48, std::size_t batch_size = 8,
                         std::size_t hidden = 6);

// Random positive-curvature quadratic with an offset minimum.
QuadraticObjective random_quadratic(std::size_t dim, std::uint64_t seed);

// Runs `steps` optimizer steps with begin_epoch at every epoch boundary and
// returns theta after every step.
std::vector<ParamVector> trajectory(SamOptimizer& optimizer, ParamVector params,
                                    const std::function<const Objective&(std::size_t)>& objective_at,
                                    std::size_t steps, std::size_t steps_per_epoch,
                                    std::vector<StepOutcome>* outcomes = nullptr);

} // namespace samlab::test

namespace samlab::test {

// Loss defined by a tape-building callback, for checking single primitives.
class TapeObjective final : public Objective {
public:
    using Builder = std::function<Var(Tape&, const ParamVector&)>;
    explicit TapeObjective(Builder build) : build_(std::move(build)) {}

    Evaluation evaluate(const ParamVector& params) const override;
    double loss(const ParamVector& params) const override;

private:
    Builder build_;
};

} // namespace samlab::test
