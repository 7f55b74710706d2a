#include "support.hpp"

#include "samlab/error.hpp"
#include "samlab/optim.hpp"
#include "samlab/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace samlab;

namespace {

OptimizerConfig make_config(Variant v, double rho = 0.05, BaseKind base = BaseKind::adam, double eta = 1e-2) {
    OptimizerConfig c;
    c.base = base;
    c.eta = eta;
    c.variant.variant = v;
    c.perturb.rho_initial = rho;
    c.perturb.schedule = false;
    return c;
}

ParamVector vec(std::vector<double> v) { return ParamVector::flat(std::move(v)); }

ParamVector random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return vec(std::move(v));
}

struct Run {
    std::vector<ParamVector> thetas;
    std::vector<StepOutcome> outcomes;
};

Run run_quadratic(const OptimizerConfig& config, std::size_t steps, std::uint64_t seed = 3,
                  std::size_t steps_per_epoch = 5) {
    const auto q = test::random_quadratic(6, seed);
    Rng rng(seed + 100);
    const ParamVector start = random_vec(6, rng);
    SamOptimizer opt(config, start);
    Run r;
    r.thetas = test::trajectory(opt, start, [&](std::size_t) -> const Objective& { return q; }, steps,
                                steps_per_epoch, &r.outcomes);
    return r;
}

Run run_stream(const OptimizerConfig& config, std::size_t steps, const test::BatchStream& stream) {
    const ParamVector start = init_model(stream.model);
    SamOptimizer opt(config, start);
    std::vector<std::unique_ptr<Objective>> objectives;
    for (std::size_t i = 0; i < stream.steps_per_epoch(); ++i) objectives.push_back(stream.objective(i));
    Run r;
    r.thetas = test::trajectory(
        opt, start, [&](std::size_t t) -> const Objective& { return *objectives[t % objectives.size()]; },
        steps, stream.steps_per_epoch(), &r.outcomes);
    return r;
}

double max_trajectory_diff(const Run& a, const Run& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.thetas.size(); ++i) worst = std::max(worst, max_abs_diff(a.thetas[i], b.thetas[i]));
    return worst;
}

} // namespace

TEST_SUITE("optim") {

TEST_CASE("project_perturbation scales to radius rho") {
    const auto e = project_perturbation(vec({3.0, 4.0}), 0.5);
    CHECK(e[0] == doctest::Approx(0.3));
    CHECK(e[1] == doctest::Approx(0.4));
    CHECK(norm2(project_perturbation(vec({0.0, 0.0}), 0.5)) == 0.0);
    CHECK(norm2(project_perturbation(vec({1.0, 2.0}), 0.0)) == 0.0);
    CHECK_THROWS_AS(project_perturbation(vec({1.0}), -0.1), ConfigError);
}

TEST_CASE("projected perturbation never exceeds rho") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double rho = rng.uniform(0.0, 1.0);
        const double scale = std::pow(10.0, rng.uniform(-8.0, 8.0));
        const auto e = project_perturbation(random_vec(7, rng, scale), rho);
        REQUIRE(norm2(e) <= rho * (1.0 + 1e-15));
    }
}

TEST_CASE("adam with a zero gradient leaves theta unchanged") {
    const auto theta = vec({1.0, -2.0});
    auto state = AdamState::like(theta, 0.1);
    const auto next = adam_step(state, theta.zeros_like(), theta);
    CHECK(next == theta);
    CHECK(state.t == 1);
}

TEST_CASE("adam first step moves each coordinate by about eta") {
    const auto theta = vec({1.0, -2.0, 0.5});
    auto state = AdamState::like(theta, 0.01);
    const auto next = adam_step(state, vec({3.0, -0.2, 1e-3}), theta);
    CHECK(next[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(next[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(next[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam matches a scalar re-derivation over 10 steps") {
    const double eta = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto theta = vec({0.7});
    auto state = AdamState::like(theta, eta);
    double x = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 10; ++t) {
        const double g = 2.0 * x - std::sin(x);
        theta = adam_step(state, vec({2.0 * theta[0] - std::sin(theta[0])}), theta);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        x -= eta * mh / (std::sqrt(vh) + eps);
        CHECK(std::abs(theta[0] - x) < 1e-12);
    }
}

TEST_CASE("SAM step on the unit bowl") {
    const auto obj = QuadraticObjective::unit(2);
    auto theta = vec({1.0, 0.0});
    SamOptimizer opt(make_config(Variant::sam, 0.1, BaseKind::sgd, 0.1), theta);
    opt.begin_epoch(0);
    const auto out = opt.step(theta, obj);
    CHECK(theta[0] == doctest::Approx(0.89).epsilon(1e-15));
    CHECK(theta[1] == 0.0);
    CHECK(out.epsilon_hat[0] == doctest::Approx(0.1));
    CHECK(out.omega[0] == doctest::Approx(1.1));
    CHECK(out.forwards == 2);
    CHECK(out.backwards == 2);
}

TEST_CASE("moving average keeps a unit epsilon aligned with omega") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto w = random_vec(5, rng);
        const auto u = scaled(w, 1.0 / norm2(w));
        CHECK(max_abs_diff(moving_average_epsilon(u, scaled(w, 3.7), 0.9), u) < 1e-15);
    }
    const auto e = vec({0.2, 0.4});
    CHECK(max_abs_diff(moving_average_epsilon(e, e.zeros_like(), 0.5), vec({0.1, 0.2})) == 0.0);
}

TEST_CASE("closed-form epsilon matches the three-step unrolled form") {
    const double beta = 0.7;
    const auto e0 = vec({1.0, 0.0});
    const std::vector<GradVector> w{vec({0.0, 2.0}), vec({3.0, 4.0}), vec({-1.0, 0.0})};
    const auto u = [&](std::size_t i) { return scaled(w[i], 1.0 / norm2(w[i])); };
    auto expected = scaled(e0, beta * beta * beta);
    expected = axpy(expected, beta * beta * (1 - beta), u(0));
    expected = axpy(expected, beta * (1 - beta), u(1));
    expected = axpy(expected, (1 - beta), u(2));
    CHECK(max_abs_diff(closed_form_epsilon(e0, w, beta), expected) < 1e-15);
    CHECK(max_abs_diff(closed_form_epsilon(e0, {}, beta), e0) == 0.0);
    const std::vector<GradVector> zero{vec({0.0, 0.0})};
    CHECK_THROWS_AS(closed_form_epsilon(e0, zero, beta), UsageError);
}

TEST_CASE("GraphSAM non-anchor epsilons follow the closed form") {
    auto cfg = make_config(Variant::graphsam);
    cfg.perturb.reanchor_period = 0;
    cfg.perturb.beta = 0.9;
    const auto r = run_quadratic(cfg, 101);
    CHECK(r.outcomes[0].recomputed);
    const GradVector e1 = moving_average_epsilon(r.outcomes[0].epsilon, r.outcomes[0].omega, 0.9);
    std::vector<GradVector> omegas;
    for (std::size_t t = 1; t < r.outcomes.size(); ++t) {
        REQUIRE_FALSE(r.outcomes[t].recomputed);
        const auto closed = closed_form_epsilon(e1, omegas, 0.9);
        REQUIRE(max_abs_diff(closed, r.outcomes[t].epsilon) < 1e-12);
        omegas.push_back(r.outcomes[t].omega);
    }
}

TEST_CASE("GraphSAM re-anchors on the first step of every K-th epoch") {
    for (std::size_t k : {1u, 2u, 4u}) {
        auto cfg = make_config(Variant::graphsam);
        cfg.perturb.reanchor_period = k;
        const auto r = run_quadratic(cfg, 40, 3, 5);
        for (std::size_t t = 0; t < r.outcomes.size(); ++t) {
            const bool anchor = t % 5 == 0 && (t / 5) % k == 0;
            CHECK(r.outcomes[t].recomputed == anchor);
            CHECK(r.outcomes[t].forwards == (anchor ? 2u : 1u));
        }
    }
    auto every = make_config(Variant::graphsam);
    every.perturb.reanchor_every_step = true;
    for (const auto& o : run_quadratic(every, 12).outcomes) CHECK(o.recomputed);
}

TEST_CASE("SAM-k recomputes at steps 0, k, 2k and k = 1 equals SAM") {
    auto cfg = make_config(Variant::sam_k);
    cfg.variant.k = 8;
    const auto r = run_quadratic(cfg, 40);
    for (std::size_t t = 0; t < r.outcomes.size(); ++t) CHECK(r.outcomes[t].recomputed == (t % 8 == 0));

    cfg.variant.k = 1;
    CHECK(max_trajectory_diff(run_quadratic(cfg, 50), run_quadratic(make_config(Variant::sam), 50)) == 0.0);
}

TEST_CASE("SAM-One reuses its first epsilon forever") {
    const auto r = run_quadratic(make_config(Variant::sam_one), 30);
    CHECK(r.outcomes[0].recomputed);
    for (std::size_t t = 1; t < r.outcomes.size(); ++t) {
        CHECK_FALSE(r.outcomes[t].recomputed);
        CHECK(r.outcomes[t].epsilon == r.outcomes[0].epsilon);
    }
}

TEST_CASE("LookSAM stored direction is orthogonal to the clean gradient") {
    const auto stream = test::motif_stream(2);
    auto cfg = make_config(Variant::looksam);
    cfg.variant.k = 3;
    const ParamVector start = init_model(stream.model);
    SamOptimizer opt(cfg, start);
    ParamVector theta = start;
    opt.begin_epoch(0);
    for (std::size_t t = 0; t < 12; ++t) {
        const auto obj = stream.objective(t % stream.steps_per_epoch());
        const auto out = opt.step(theta, *obj);
        if (t % 3 == 0) {
            const auto& gv = opt.looksam_direction();
            CHECK(std::abs(dot(gv, out.epsilon)) / (norm2(gv) * norm2(out.epsilon)) < 1e-10);
        }
    }
}

TEST_CASE("LookSAM reductions") {
    auto look = make_config(Variant::looksam);
    look.variant.k = 4;
    look.variant.alpha_look = 0.0;
    const auto r = run_quadratic(look, 40);
    // Off-period steps with alpha = 0 are plain gradient steps.
    for (std::size_t t = 0; t < r.outcomes.size(); ++t)
        if (t % 4 != 0) CHECK(r.outcomes[t].omega == r.outcomes[t].epsilon);

    look.variant.k = 1;
    look.variant.alpha_look = 0.7;
    CHECK(max_trajectory_diff(run_quadratic(look, 50), run_quadratic(make_config(Variant::sam), 50)) == 0.0);
}

TEST_CASE("AE-SAM gate") {
    SUBCASE("median quantile fires on a constant stream") {
        AeSamGate gate(0.5);
        CHECK(gate.z() == doctest::Approx(0.0).epsilon(1e-12));
        for (int i = 0; i < 20; ++i) CHECK(gate.observe(2.0));
    }
    SUBCASE("quantile one only fires on the first observation") {
        AeSamGate gate(1.0);
        CHECK(gate.observe(1.0));
        for (int i = 0; i < 50; ++i) CHECK_FALSE(gate.observe(1e6 * (i + 1)));
    }
    SUBCASE("a spike fires after a quiet stretch") {
        AeSamGate gate(0.9);
        Rng rng(4);
        gate.observe(1.0);
        for (int i = 0; i < 100; ++i) gate.observe(1.0 + 0.01 * rng.normal());
        CHECK(gate.observe(5.0));
        CHECK_FALSE(gate.observe(0.5));
    }
    SUBCASE("bad quantiles are rejected") {
        CHECK_THROWS_AS(AeSamGate(0.0), ConfigError);
        CHECK_THROWS_AS(AeSamGate(1.5), ConfigError);
    }
}

TEST_CASE("RST probability extremes and mean rate") {
    auto cfg = make_config(Variant::rst);
    cfg.variant.p_rst = 1.0;
    CHECK(max_trajectory_diff(run_quadratic(cfg, 30), run_quadratic(make_config(Variant::sam), 30)) == 0.0);
    cfg.variant.p_rst = 0.0;
    CHECK(max_trajectory_diff(run_quadratic(cfg, 30), run_quadratic(make_config(Variant::adam), 30)) == 0.0);

    cfg.variant.p_rst = 0.5;
    cfg.variant.rng_seed = 12;
    const auto q = QuadraticObjective::unit(2);
    ParamVector theta = vec({1.0, 1.0});
    SamOptimizer opt(cfg, theta);
    opt.begin_epoch(0);
    std::size_t perturbed = 0;
    for (int i = 0; i < 10000; ++i)
        if (opt.step(theta, q).perturbed) ++perturbed;
    CHECK(perturbed >= 4800);
    CHECK(perturbed <= 5200);
}

TEST_CASE("rho schedule examples") {
    CHECK(rho_schedule(0.05, 0.5, 1, 0) == 0.05);
    CHECK(rho_schedule(0.05, 0.5, 1, 1) == 0.025);
    CHECK(rho_schedule(0.05, 0.5, 1, 3) == 0.05 * 0.125);
    CHECK(rho_schedule(0.05, 0.5, 3, 2) == 0.05);
    CHECK(rho_schedule(0.05, 0.5, 3, 3) == 0.025);
    CHECK(rho_schedule(0.1, 1.0, 1, 50) == 0.1);
    CHECK_THROWS_AS(rho_schedule(0.05, 0.0, 1, 0), ConfigError);
    CHECK_THROWS_AS(rho_schedule(0.05, 0.5, 0, 0), ConfigError);
}

TEST_CASE("rho schedule is non-increasing and piecewise constant") {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const double rho = rng.uniform(1e-3, 1.0);
        const double gamma = rng.uniform(0.05, 1.0);
        const std::size_t lambda = rng.range(1, 5);
        for (std::size_t e = 0; e < 30; ++e) {
            const double now = rho_schedule(rho, gamma, lambda, e);
            const double next = rho_schedule(rho, gamma, lambda, e + 1);
            REQUIRE(next <= now);
            if ((e + 1) % lambda != 0) REQUIRE(next == now);
        }
    }
}

TEST_CASE("begin_epoch applies the schedule only when enabled") {
    auto cfg = make_config(Variant::sam, 0.08);
    cfg.perturb.schedule = true;
    cfg.perturb.gamma = 0.5;
    SamOptimizer opt(cfg, vec({0.0}));
    opt.begin_epoch(2);
    CHECK(opt.perturb_state().rho_current == 0.02);
    cfg.perturb.schedule = false;
    SamOptimizer flat(cfg, vec({0.0}));
    flat.begin_epoch(2);
    CHECK(flat.perturb_state().rho_current == 0.08);
}

TEST_CASE("reported pass counts match what the objective saw") {
    const auto q = test::random_quadratic(4, 2);
    for (auto v : {Variant::adam, Variant::sam, Variant::graphsam, Variant::sam_one, Variant::sam_k,
                   Variant::looksam, Variant::aesam, Variant::rst}) {
        auto cfg = make_config(v);
        cfg.variant.k = 3;
        CountingObjective counter(q);
        ParamVector theta = vec({0.3, -0.2, 0.9, 1.4});
        SamOptimizer opt(cfg, theta);
        std::size_t f = 0, b = 0;
        for (std::size_t t = 0; t < 25; ++t) {
            if (t % 5 == 0) opt.begin_epoch(t / 5);
            const auto out = opt.step(theta, counter);
            f += out.forwards;
            b += out.backwards;
            CHECK(norm2(out.epsilon_hat) <= out.rho * (1.0 + 1e-15));
        }
        INFO(to_string(v));
        CHECK(counter.forwards() == f);
        CHECK(counter.backwards() == b);
    }
}

TEST_CASE("every variant reduces to the base optimizer at rho = 0") {
    const auto stream = test::motif_stream(9);
    const auto base = run_stream(make_config(Variant::adam, 0.0), 30, stream);
    for (auto v : {Variant::sam, Variant::graphsam, Variant::sam_one, Variant::sam_k, Variant::aesam, Variant::rst}) {
        INFO(to_string(v));
        CHECK(max_trajectory_diff(run_stream(make_config(v, 0.0), 30, stream), base) == 0.0);
    }
}

TEST_CASE("variant names round trip and bad configs are rejected") {
    for (auto v : {Variant::adam, Variant::sam, Variant::graphsam, Variant::sam_one, Variant::sam_k,
                   Variant::looksam, Variant::aesam, Variant::rst})
        CHECK(parse_variant(to_string(v)) == v);
    CHECK_THROWS_AS(parse_variant("sgdm"), ConfigError);
    auto cfg = make_config(Variant::graphsam);
    cfg.perturb.beta = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = make_config(Variant::sam_k);
    cfg.variant.k = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = make_config(Variant::sam, -0.1);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

} // TEST_SUITE
