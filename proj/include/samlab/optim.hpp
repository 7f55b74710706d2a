#pragma once

#include "samlab/objective.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace samlab {

// ---------------------------------------------------------------------------
// Base optimizers
// ---------------------------------------------------------------------------

struct AdamState {
    GradVector m;
    GradVector v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double eta = 1e-3;

    static AdamState like(const ParamVector& params, double eta = 1e-3);
};

// Bias-corrected Adam. Updates m, v, t in place and returns the new params.
ParamVector adam_step(AdamState& state, const GradVector& grad, const ParamVector& params);

enum class BaseKind { adam, sgd };

// The update every SAM-family rule finally applies with its chosen gradient.
class BaseOptimizer {
public:
    BaseOptimizer(BaseKind kind, const ParamVector& like, double eta);

    void apply(ParamVector& params, const GradVector& grad);
    BaseKind kind() const noexcept { return kind_; }
    const AdamState& adam() const noexcept { return adam_; }
    double eta() const noexcept { return eta_; }

private:
    BaseKind kind_;
    double eta_;
    AdamState adam_;
};

// ---------------------------------------------------------------------------
// Perturbation primitives
// ---------------------------------------------------------------------------

// rho * epsilon / ||epsilon||_2; zero when rho == 0 or epsilon == 0.
// (The sign(e)|e| form of the same expression is identical and not separate.)
GradVector project_perturbation(const GradVector& epsilon, double rho);

// rho_initial * gamma^(epoch div lambda): a step schedule, one change every
// `lambda` epochs.
double rho_schedule(double rho_initial, double gamma, std::size_t lambda, std::size_t epoch);

// beta^t eps0 + sum_i beta^(t-1-i) (1-beta) omega_i / ||omega_i||, the
// unrolled moving average. Throws UsageError on a zero omega.
GradVector closed_form_epsilon(const GradVector& epsilon0, std::span<const GradVector> omegas,
                               double beta);

// One moving-average update: beta * eps + (1 - beta) * omega / ||omega||,
// or beta * eps when omega is zero.
GradVector moving_average_epsilon(const GradVector& epsilon, const GradVector& omega, double beta);

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

enum class Variant { adam, sam, graphsam, sam_one, sam_k, looksam, aesam, rst };

std::string to_string(Variant v);
std::string to_string(BaseKind k);
Variant parse_variant(const std::string& text);
BaseKind parse_base_kind(const std::string& text);

struct VariantConfig {
    Variant variant = Variant::graphsam;
    std::size_t k = 8;              // SAM-k / LookSAM period, in steps
    double alpha_look = 0.2;        // LookSAM gradient-reuse scale
    double p_rst = 0.5;             // RST Bernoulli probability
    double aesam_quantile = 0.9;    // AE-SAM threshold quantile
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct PerturbConfig {
    double rho_initial = 0.05;
    double gamma = 0.5;
    std::size_t lambda = 1;         // epochs per rho change
    bool schedule = true;
    double beta = 0.99;             // GraphSAM moving-average decay
    std::size_t reanchor_period = 1; // GraphSAM-K: epochs between re-anchors, 0 = never
    bool reanchor_every_step = false;

    void validate() const;
};

struct OptimizerConfig {
    BaseKind base = BaseKind::adam;
    double eta = 1e-3;
    VariantConfig variant;
    PerturbConfig perturb;

    void validate() const;
};

struct PerturbState {
    GradVector epsilon;             // eps_t for the next step, empty until first computed
    double rho_current = 0.0;
    std::size_t epoch = 0;
    std::size_t step_in_epoch = 0;
    std::size_t global_step = 0;

    bool has_epsilon() const noexcept { return epsilon.size() > 0; }
};

// Exponential-moving mean/variance (decay 0.9) of squared gradient norms.
// Fires when sq_norm >= mean + z * stddev, z the standard normal quantile of
// `quantile`; the first observation always fires.
class AeSamGate {
public:
    explicit AeSamGate(double quantile);

    bool observe(double sq_norm);
    double z() const noexcept { return z_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }

    static constexpr double decay = 0.9;

private:
    double z_;
    double mean_ = 0.0;
    double variance_ = 0.0;
    bool warm_ = false;
};

struct StepOutcome {
    // Loss at theta when the step evaluated it, otherwise at theta + eps_hat.
    double loss = 0.0;
    GradVector omega;        // gradient handed to the base optimizer
    GradVector epsilon;      // eps_t (for non-perturbing steps: plain gradient)
    GradVector epsilon_hat;  // weight offset actually applied, zero if none
    std::size_t forwards = 0;
    std::size_t backwards = 0;
    bool perturbed = false;  // a gradient was taken at perturbed weights
    bool recomputed = false; // eps_t came from a fresh gradient at theta
    double rho = 0.0;
};

// All eight step rules behind one interface. The caller owns the epoch loop:
// begin_epoch(e) before the first step of epoch e, then step() per batch.
// Parameters are updated in place; perturbed weights live in a temporary copy,
// so theta is never modified except by the final base update.
class SamOptimizer {
public:
    SamOptimizer(OptimizerConfig config, const ParamVector& like);

    void begin_epoch(std::size_t epoch);
    StepOutcome step(ParamVector& params, const Objective& objective);

    StepOutcome base_step(ParamVector& params, const Objective& objective);
    StepOutcome sam_step(ParamVector& params, const Objective& objective);
    StepOutcome graphsam_step(ParamVector& params, const Objective& objective);
    StepOutcome sam_one_step(ParamVector& params, const Objective& objective);
    StepOutcome sam_k_step(ParamVector& params, const Objective& objective);
    StepOutcome looksam_step(ParamVector& params, const Objective& objective);
    StepOutcome aesam_step(ParamVector& params, const Objective& objective);
    StepOutcome rst_step(ParamVector& params, const Objective& objective);

    const OptimizerConfig& config() const noexcept { return config_; }
    const PerturbState& perturb_state() const noexcept { return state_; }
    const BaseOptimizer& base() const noexcept { return base_; }
    const AeSamGate& aesam_gate() const noexcept { return gate_; }
    const GradVector& looksam_direction() const noexcept { return sharp_direction_; }

private:
    // Gradient at theta + project(eps, rho) and the base update with it.
    StepOutcome perturbed_update(ParamVector& params, const Objective& objective,
                                 const GradVector& epsilon);
    StepOutcome sam_like(ParamVector& params, const Objective& objective);
    void finish_step();

    OptimizerConfig config_;
    BaseOptimizer base_;
    PerturbState state_;
    AeSamGate gate_;
    Rng rng_;
    GradVector sharp_direction_;    // LookSAM g_v
};

} // namespace samlab
