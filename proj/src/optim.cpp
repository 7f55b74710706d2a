#include "samlab/optim.hpp"

#include "samlab/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

namespace samlab {

AdamState AdamState::like(const ParamVector& params, double eta) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    s.eta = eta;
    return s;
}

ParamVector adam_step(AdamState& state, const GradVector& grad, const ParamVector& params) {
    require_compatible(state.m, grad, "adam_step");
    require_compatible(params, grad, "adam_step");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    ParamVector out = params;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        out[i] -= state.eta * m_hat / (std::sqrt(v_hat) + state.eps_adam);
    }
    return out;
}

BaseOptimizer::BaseOptimizer(BaseKind kind, const ParamVector& like, double eta)
    : kind_(kind), eta_(eta), adam_(AdamState::like(like, eta)) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("optimizer.eta must be positive");
}

void BaseOptimizer::apply(ParamVector& params, const GradVector& grad) {
    if (kind_ == BaseKind::adam) {
        params = adam_step(adam_, grad, params);
        return;
    }
    require_compatible(params, grad, "sgd_step");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta_ * grad[i];
}

GradVector project_perturbation(const GradVector& epsilon, double rho) {
    if (rho < 0.0) throw ConfigError("project_perturbation: rho must be >= 0");
    const double n = norm2(epsilon);
    if (rho == 0.0 || n == 0.0) return epsilon.zeros_like();
    return scaled(epsilon, rho / n);
}

double rho_schedule(double rho_initial, double gamma, std::size_t lambda, std::size_t epoch) {
    if (!(rho_initial > 0.0)) throw ConfigError("rho_schedule: rho_initial must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("rho_schedule: gamma must be in (0, 1]");
    if (lambda < 1) throw ConfigError("rho_schedule: lambda must be >= 1");
    const double rho = rho_initial * std::pow(gamma, static_cast<double>(epoch / lambda));
    return std::max(rho, std::numeric_limits<double>::denorm_min());
}

GradVector moving_average_epsilon(const GradVector& epsilon, const GradVector& omega, double beta) {
    require_compatible(epsilon, omega, "moving_average_epsilon");
    const double n = norm2(omega);
    GradVector out = scaled(epsilon, beta);
    if (n == 0.0) return out;
    const double w = (1.0 - beta) / n;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * omega[i];
    return out;
}

GradVector closed_form_epsilon(const GradVector& epsilon0, std::span<const GradVector> omegas,
                               double beta) {
    const std::size_t t = omegas.size();
    GradVector out = scaled(epsilon0, std::pow(beta, static_cast<double>(t)));
    for (std::size_t i = 0; i < t; ++i) {
        const double n = norm2(omegas[i]);
        if (n == 0.0)
            throw UsageError("closed_form_epsilon: omega " + std::to_string(i) + " is zero");
        const double w = std::pow(beta, static_cast<double>(t - 1 - i)) * (1.0 - beta) / n;
        out = axpy(out, w, omegas[i]);
    }
    return out;
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::adam: return "adam";
    case Variant::sam: return "sam";
    case Variant::graphsam: return "graphsam";
    case Variant::sam_one: return "sam-one";
    case Variant::sam_k: return "sam-k";
    case Variant::looksam: return "looksam";
    case Variant::aesam: return "aesam";
    case Variant::rst: return "rst";
    }
    return "unknown";
}

std::string to_string(BaseKind k) { return k == BaseKind::adam ? "adam" : "sgd"; }

Variant parse_variant(const std::string& text) {
    for (auto v : {Variant::adam, Variant::sam, Variant::graphsam, Variant::sam_one, Variant::sam_k,
                   Variant::looksam, Variant::aesam, Variant::rst})
        if (to_string(v) == text) return v;
    throw ConfigError("optimizer.variant: unknown variant '" + text +
                      "' (adam, sam, graphsam, sam-one, sam-k, looksam, aesam, rst)");
}

BaseKind parse_base_kind(const std::string& text) {
    if (text == "adam") return BaseKind::adam;
    if (text == "sgd") return BaseKind::sgd;
    throw ConfigError("optimizer.base: unknown base optimizer '" + text + "' (adam, sgd)");
}

void VariantConfig::validate() const {
    if ((variant == Variant::sam_k || variant == Variant::looksam) && k < 1)
        throw ConfigError("optimizer.k must be >= 1");
    if (variant == Variant::looksam && !(alpha_look >= 0.0))
        throw ConfigError("optimizer.alpha_look must be >= 0");
    if (variant == Variant::rst && !(p_rst >= 0.0 && p_rst <= 1.0))
        throw ConfigError("optimizer.p_rst must be in [0, 1]");
    if (variant == Variant::aesam && !(aesam_quantile > 0.0 && aesam_quantile <= 1.0))
        throw ConfigError("optimizer.aesam_quantile must be in (0, 1]");
}

void PerturbConfig::validate() const {
    if (!(rho_initial >= 0.0) || !std::isfinite(rho_initial))
        throw ConfigError("optimizer.rho must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("optimizer.gamma must be in (0, 1]");
    if (lambda < 1) throw ConfigError("optimizer.lambda must be >= 1");
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("optimizer.beta must be in [0, 1)");
}

void OptimizerConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("optimizer.eta must be positive");
    variant.validate();
    perturb.validate();
}

AeSamGate::AeSamGate(double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0))
        throw ConfigError("aesam quantile must be in (0, 1]");
    if (quantile == 1.0)
        z_ = std::numeric_limits<double>::infinity();
    else
        z_ = boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), quantile);
}

bool AeSamGate::observe(double sq_norm) {
    bool fire;
    if (!warm_) {
        fire = true;
        warm_ = true;
        mean_ = sq_norm;
        variance_ = 0.0;
        return fire;
    }
    const double threshold =
        std::isinf(z_) ? std::numeric_limits<double>::infinity() : mean_ + z_ * std::sqrt(variance_);
    fire = sq_norm >= threshold;
    const double delta = sq_norm - mean_;
    variance_ = decay * variance_ + (1.0 - decay) * delta * delta;
    mean_ += (1.0 - decay) * delta;
    return fire;
}

SamOptimizer::SamOptimizer(OptimizerConfig config, const ParamVector& like)
    : config_(std::move(config)),
      base_(config_.base, like, config_.eta),
      gate_(config_.variant.variant == Variant::aesam ? config_.variant.aesam_quantile : 0.5),
      rng_(config_.variant.rng_seed) {
    config_.validate();
    state_.rho_current = config_.perturb.rho_initial;
}

void SamOptimizer::begin_epoch(std::size_t epoch) {
    state_.epoch = epoch;
    state_.step_in_epoch = 0;
    const auto& p = config_.perturb;
    if (p.schedule && p.rho_initial > 0.0)
        state_.rho_current = rho_schedule(p.rho_initial, p.gamma, p.lambda, epoch);
    else
        state_.rho_current = p.rho_initial;
}

void SamOptimizer::finish_step() {
    ++state_.step_in_epoch;
    ++state_.global_step;
}

StepOutcome SamOptimizer::step(ParamVector& params, const Objective& objective) {
    switch (config_.variant.variant) {
    case Variant::adam: return base_step(params, objective);
    case Variant::sam: return sam_step(params, objective);
    case Variant::graphsam: return graphsam_step(params, objective);
    case Variant::sam_one: return sam_one_step(params, objective);
    case Variant::sam_k: return sam_k_step(params, objective);
    case Variant::looksam: return looksam_step(params, objective);
    case Variant::aesam: return aesam_step(params, objective);
    case Variant::rst: return rst_step(params, objective);
    }
    throw UsageError("step: unknown variant");
}

StepOutcome SamOptimizer::perturbed_update(ParamVector& params, const Objective& objective,
                                           const GradVector& epsilon) {
    StepOutcome out;
    out.rho = state_.rho_current;
    out.epsilon = epsilon;
    out.epsilon_hat = project_perturbation(epsilon, state_.rho_current);
    const ParamVector adversarial = params + out.epsilon_hat;
    Evaluation at_adv = objective.evaluate(adversarial);
    out.loss = at_adv.loss;
    out.omega = std::move(at_adv.grad);
    out.forwards = out.backwards = 1;
    out.perturbed = true;
    base_.apply(params, out.omega);
    return out;
}

StepOutcome SamOptimizer::sam_like(ParamVector& params, const Objective& objective) {
    Evaluation at_theta = objective.evaluate(params);
    StepOutcome out = perturbed_update(params, objective, at_theta.grad);
    out.loss = at_theta.loss;
    out.forwards += 1;
    out.backwards += 1;
    out.recomputed = true;
    return out;
}

StepOutcome SamOptimizer::base_step(ParamVector& params, const Objective& objective) {
    Evaluation e = objective.evaluate(params);
    StepOutcome out;
    out.loss = e.loss;
    out.rho = state_.rho_current;
    out.epsilon = e.grad;
    out.epsilon_hat = e.grad.zeros_like();
    out.omega = std::move(e.grad);
    out.forwards = out.backwards = 1;
    out.recomputed = true;
    base_.apply(params, out.omega);
    finish_step();
    return out;
}

StepOutcome SamOptimizer::sam_step(ParamVector& params, const Objective& objective) {
    StepOutcome out = sam_like(params, objective);
    state_.epsilon = out.epsilon;
    finish_step();
    return out;
}

StepOutcome SamOptimizer::graphsam_step(ParamVector& params, const Objective& objective) {
    const auto& p = config_.perturb;
    const bool anchor = !state_.has_epsilon() || p.reanchor_every_step ||
                        (state_.step_in_epoch == 0 && p.reanchor_period > 0 &&
                         state_.epoch % p.reanchor_period == 0);
    StepOutcome out = anchor ? sam_like(params, objective)
                             : perturbed_update(params, objective, state_.epsilon);
    // theta is already updated; eps_{t+1} is prepared from omega_t.
    state_.epsilon = moving_average_epsilon(out.epsilon, out.omega, p.beta);
    finish_step();
    return out;
}

StepOutcome SamOptimizer::sam_one_step(ParamVector& params, const Objective& objective) {
    StepOutcome out = state_.has_epsilon() ? perturbed_update(params, objective, state_.epsilon)
                                           : sam_like(params, objective);
    state_.epsilon = out.epsilon;
    finish_step();
    return out;
}

StepOutcome SamOptimizer::sam_k_step(ParamVector& params, const Objective& objective) {
    const bool recompute = !state_.has_epsilon() || state_.global_step % config_.variant.k == 0;
    StepOutcome out = recompute ? sam_like(params, objective)
                                : perturbed_update(params, objective, state_.epsilon);
    state_.epsilon = out.epsilon;
    finish_step();
    return out;
}

StepOutcome SamOptimizer::looksam_step(ParamVector& params, const Objective& objective) {
    const bool full = state_.global_step % config_.variant.k == 0 || sharp_direction_.size() == 0;
    if (full) {
        StepOutcome out = sam_like(params, objective);
        const GradVector& g = out.epsilon;
        const double gg = dot(g, g);
        sharp_direction_ = gg == 0.0 ? out.omega : axpy(out.omega, -dot(out.omega, g) / gg, g);
        state_.epsilon = out.epsilon;
        finish_step();
        return out;
    }

    Evaluation e = objective.evaluate(params);
    StepOutcome out;
    out.loss = e.loss;
    out.rho = state_.rho_current;
    out.epsilon_hat = e.grad.zeros_like();
    out.forwards = out.backwards = 1;
    out.recomputed = true;
    const double sharp_norm = norm2(sharp_direction_);
    if (sharp_norm == 0.0 || config_.variant.alpha_look == 0.0) {
        out.omega = e.grad;
    } else {
        const double w = config_.variant.alpha_look * norm2(e.grad) / sharp_norm;
        out.omega = axpy(e.grad, w, sharp_direction_);
    }
    out.epsilon = std::move(e.grad);
    base_.apply(params, out.omega);
    finish_step();
    return out;
}

StepOutcome SamOptimizer::aesam_step(ParamVector& params, const Objective& objective) {
    Evaluation at_theta = objective.evaluate(params);
    const double sq = dot(at_theta.grad, at_theta.grad);
    StepOutcome out;
    if (gate_.observe(sq)) {
        out = perturbed_update(params, objective, at_theta.grad);
        out.forwards += 1;
        out.backwards += 1;
        state_.epsilon = out.epsilon;
    } else {
        out.rho = state_.rho_current;
        out.epsilon = at_theta.grad;
        out.epsilon_hat = at_theta.grad.zeros_like();
        out.omega = std::move(at_theta.grad);
        out.forwards = out.backwards = 1;
        base_.apply(params, out.omega);
    }
    out.loss = at_theta.loss;
    out.recomputed = true;
    finish_step();
    return out;
}

StepOutcome SamOptimizer::rst_step(ParamVector& params, const Objective& objective) {
    if (rng_.bernoulli(config_.variant.p_rst)) return sam_step(params, objective);
    return base_step(params, objective);
}

} // namespace samlab
