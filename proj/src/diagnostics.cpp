#include "samlab/diagnostics.hpp"

#include "samlab/error.hpp"
#include "samlab/rng.hpp"

#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace samlab {

const std::vector<std::string>& step_record_columns() {
    static const std::vector<std::string> cols = {
        "epoch",          "step",         "train_loss",    "eval_metric",
        "eps_norm",       "omega_norm",   "eps_change",    "omega_change",
        "cos_eps_omega",  "cos_eps_vs_ground_truth",       "consistent",
        "forwards",       "backwards",    "wall_time_ns"};
    return cols;
}

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

using csv::cell;
using csv::fail;
using csv::parse_double;
using csv::parse_int;
using csv::parse_opt;

void write_step_records_csv(std::ostream& out, std::span<const StepRecord> records) {
    const auto& cols = step_record_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
        out << r.epoch << ',' << r.step << ',' << format_real(r.train_loss) << ',' << cell(r.eval_metric)
            << ',' << format_real(r.eps_norm) << ',' << format_real(r.omega_norm) << ','
            << format_real(r.eps_change) << ',' << format_real(r.omega_change) << ','
            << cell(r.cos_eps_omega) << ',' << cell(r.cos_eps_vs_ground_truth) << ','
            << (r.consistent ? 1 : 0) << ',' << r.forwards << ',' << r.backwards << ','
            << r.wall_time_ns << '\n';
    }
}

std::vector<StepRecord> read_step_records_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) fail(source, lineno, "missing header");
    const auto header = csv::split(line);
    if (header != step_record_columns()) fail(source, lineno, "unexpected step-record header");
    std::vector<StepRecord> records;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != header.size())
            fail(source, lineno, "expected " + std::to_string(header.size()) + " columns, got " +
                                     std::to_string(f.size()));
        StepRecord r;
        r.epoch = parse_int<std::size_t>(f[0], source, lineno);
        r.step = parse_int<std::size_t>(f[1], source, lineno);
        r.train_loss = parse_double(f[2], source, lineno);
        r.eval_metric = parse_opt(f[3], source, lineno);
        r.eps_norm = parse_double(f[4], source, lineno);
        r.omega_norm = parse_double(f[5], source, lineno);
        r.eps_change = parse_double(f[6], source, lineno);
        r.omega_change = parse_double(f[7], source, lineno);
        r.cos_eps_omega = parse_opt(f[8], source, lineno);
        r.cos_eps_vs_ground_truth = parse_opt(f[9], source, lineno);
        r.consistent = parse_int<int>(f[10], source, lineno) != 0;
        r.forwards = parse_int<std::size_t>(f[11], source, lineno);
        r.backwards = parse_int<std::size_t>(f[12], source, lineno);
        r.wall_time_ns = parse_int<std::int64_t>(f[13], source, lineno);
        records.push_back(r);
    }
    return records;
}

double cosine_similarity(const GradVector& a, const GradVector& b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) throw UndefinedSimilarity("cosine_similarity: zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::optional<double> try_cosine(const GradVector& a, const GradVector& b) {
    if (a.size() == 0 || b.size() == 0 || norm2(a) == 0.0 || norm2(b) == 0.0) return std::nullopt;
    return cosine_similarity(a, b);
}

Consistency classify_consistency(double cos) {
    return cos >= 0.0 ? Consistency::consistent : Consistency::inconsistent;
}

double angle_degrees(double cos) { return std::acos(std::clamp(cos, -1.0, 1.0)) * 180.0 / std::numbers::pi; }

StepRecord StepRecorder::record(std::size_t epoch, std::size_t step, const StepOutcome& outcome,
                                const GradVector* ground_truth, std::int64_t wall_time_ns) {
    StepRecord r;
    r.epoch = epoch;
    r.step = step;
    r.train_loss = outcome.loss;
    r.eps_norm = norm2(outcome.epsilon);
    r.omega_norm = norm2(outcome.omega);
    const bool first = prev_omega_.size() == 0;
    r.eps_change = first ? 0.0 : distance(outcome.epsilon, prev_eps_);
    r.omega_change = first ? 0.0 : distance(outcome.omega, prev_omega_);
    r.cos_eps_omega = try_cosine(outcome.epsilon, first ? outcome.omega : prev_omega_);
    r.consistent = r.cos_eps_omega && classify_consistency(*r.cos_eps_omega) == Consistency::consistent;
    if (ground_truth) r.cos_eps_vs_ground_truth = try_cosine(outcome.epsilon, *ground_truth);
    r.forwards = outcome.forwards;
    r.backwards = outcome.backwards;
    r.wall_time_ns = wall_time_ns;
    prev_eps_ = outcome.epsilon;
    prev_omega_ = outcome.omega;
    return r;
}

GradVector ground_truth_epsilon(const ParamVector& params, const Objective& objective,
                                DiagnosticCounter& counter) {
    ++counter.forwards;
    ++counter.backwards;
    return objective.evaluate(params).grad;
}

double consistency_rate(std::span<const StepRecord> records, CosineField field) {
    std::size_t measured = 0, consistent = 0;
    for (const auto& r : records) {
        const auto& c = field == CosineField::eps_omega ? r.cos_eps_omega : r.cos_eps_vs_ground_truth;
        if (!c) continue;
        ++measured;
        if (classify_consistency(*c) == Consistency::consistent) ++consistent;
    }
    if (measured == 0) throw UsageError("consistency_rate: no records carry the requested cosine");
    return static_cast<double>(consistent) / static_cast<double>(measured);
}

GradVector sample_direction(const ParamVector& params, std::uint64_t seed, DirectionNorm norm) {
    Rng rng(seed);
    GradVector d = params.zeros_like();
    for (auto& v : d.values()) v = rng.normal();
    if (norm == DirectionNorm::unit_global) return scaled(d, 1.0 / norm2(d));
    for (const auto& seg : params.layout()->segments()) {
        auto dv = d.segment(seg.name);
        double dn = 0.0;
        for (double v : dv) dn += v * v;
        dn = std::sqrt(dn);
        double target = 1.0;
        if (norm == DirectionNorm::filter) {
            target = 0.0;
            for (double v : params.segment(seg.name)) target += v * v;
            target = std::sqrt(target);
        }
        for (auto& v : dv) v = dn == 0.0 ? 0.0 : v * target / dn;
    }
    return d;
}

LandscapeSlice landscape_slice(const ParamVector& params, const Objective& objective,
                               std::span<const double> phis, std::uint64_t direction_seed,
                               DirectionNorm norm) {
    if (std::find(phis.begin(), phis.end(), 0.0) == phis.end())
        throw UsageError("landscape_slice: phi grid must contain 0");
    const GradVector dir = sample_direction(params, direction_seed, norm);
    LandscapeSlice slice;
    slice.direction_seed = direction_seed;
    slice.phis.assign(phis.begin(), phis.end());
    for (double phi : phis)
        slice.losses.push_back(phi == 0.0 ? objective.loss(params) : objective.loss(axpy(params, phi, dir)));
    return slice;
}

void write_landscape_csv(std::ostream& out, const LandscapeSlice& slice) {
    out << "phi,loss\n";
    for (std::size_t i = 0; i < slice.phis.size(); ++i)
        out << format_real(slice.phis[i]) << ',' << format_real(slice.losses[i]) << '\n';
}

double sharpness_estimate(const ParamVector& params, const Objective& objective, double rho,
                          std::size_t num_directions, std::uint64_t seed) {
    if (num_directions < 1) throw UsageError("sharpness_estimate: num_directions must be >= 1");
    const double base = objective.loss(params);
    if (rho == 0.0) return 0.0;
    std::uint64_t state = seed;
    double best = -INFINITY;
    for (std::size_t i = 0; i < num_directions; ++i) {
        const GradVector d = sample_direction(params, splitmix64(state), DirectionNorm::unit_global);
        best = std::max(best, objective.loss(axpy(params, rho, d)) - base);
    }
    return best;
}

TaylorGap taylor_gap(const ParamVector& params, const GradVector& eps_g, const GradVector& eps_s,
                     const Objective& objective) {
    TaylorGap gap;
    gap.measured = objective.loss(params + eps_g) - objective.loss(params + eps_s);
    const GradVector grad = objective.evaluate(params).grad;
    gap.predicted = dot(eps_g - eps_s, grad);
    return gap;
}

ArcBound arc_bound(const GradVector& eps_g, const GradVector& eps_s, double rho) {
    ArcBound b;
    b.angle = std::acos(cosine_similarity(eps_g, eps_s));
    b.chord = distance(eps_g, eps_s);
    b.arc = b.angle * rho;
    return b;
}

std::vector<ThroughputRow> throughput_report(std::span<const RunThroughput> runs,
                                             const std::string& reference) {
    if (runs.empty()) throw UsageError("throughput_report: no runs");
    const std::size_t steps = runs.front().records.size();
    std::vector<ThroughputRow> rows;
    for (const auto& run : runs) {
        if (run.records.size() != steps)
            throw UsageError("throughput_report: run '" + run.variant + "' has " +
                             std::to_string(run.records.size()) + " steps, expected " +
                             std::to_string(steps));
        std::int64_t ns = 0;
        ThroughputRow row;
        row.variant = run.variant;
        for (const auto& r : run.records) {
            ns += r.wall_time_ns;
            row.forwards += r.forwards;
            row.backwards += r.backwards;
        }
        if (ns <= 0) throw UsageError("throughput_report: run '" + run.variant + "' has no timing");
        row.samples_per_second = static_cast<double>(run.samples) / (static_cast<double>(ns) * 1e-9);
        rows.push_back(row);
    }
    auto ref = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.variant == reference; });
    if (ref == rows.end()) throw UsageError("throughput_report: no '" + reference + "' reference run");
    const double ref_rate = ref->samples_per_second;
    for (auto& r : rows) r.percent_of_reference = 100.0 * r.samples_per_second / ref_rate;
    return rows;
}

std::string format_throughput_table(std::span<const ThroughputRow> rows) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %14s %9s %10s %10s\n", "variant", "samples/s", "ratio",
                  "forwards", "backwards");
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-12s %14.1f %8.1f%% %10zu %10zu\n", r.variant.c_str(),
                      r.samples_per_second, r.percent_of_reference, r.forwards, r.backwards);
        out << buf;
    }
    return out.str();
}

} // namespace samlab
