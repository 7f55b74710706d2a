#pragma once

#include "samlab/objective.hpp"
#include "samlab/optim.hpp"
#include "samlab/param_vector.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace samlab {

// One row per optimizer step. Change norms and the pair cosine look one step
// back: eps_change = ||eps_t - eps_{t-1}||, omega_change = ||omega_t - omega_{t-1}||
// (both 0 on a run's first step) and cos_eps_omega = cos(eps_t, omega_{t-1})
// (cos(eps_0, omega_0) on the first step). Absent optionals are written as
// empty CSV cells.
struct StepRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double train_loss = 0.0;
    std::optional<double> eval_metric;
    double eps_norm = 0.0;
    double omega_norm = 0.0;
    double eps_change = 0.0;
    double omega_change = 0.0;
    std::optional<double> cos_eps_omega;
    std::optional<double> cos_eps_vs_ground_truth;
    bool consistent = false; // cos_eps_omega >= 0
    std::size_t forwards = 0;
    std::size_t backwards = 0;
    std::int64_t wall_time_ns = 0;

    bool operator==(const StepRecord&) const = default;
};

const std::vector<std::string>& step_record_columns();
void write_step_records_csv(std::ostream& out, std::span<const StepRecord> records);
std::vector<StepRecord> read_step_records_csv(std::istream& in, const std::string& source = "<csv>");

// Shortest round-trip decimal form of a double.
std::string format_real(double v);

// dot(a,b) / (||a|| ||b||), clamped to [-1, 1]. Throws UndefinedSimilarity on a zero vector.
double cosine_similarity(const GradVector& a, const GradVector& b);
std::optional<double> try_cosine(const GradVector& a, const GradVector& b);

enum class Consistency { consistent, inconsistent };
// Consistent iff cos >= 0 (angle in [0, 90] degrees).
Consistency classify_consistency(double cos);
double angle_degrees(double cos);

// Builds StepRecords from optimizer outcomes, keeping the previous eps/omega.
class StepRecorder {
public:
    StepRecord record(std::size_t epoch, std::size_t step, const StepOutcome& outcome,
                      const GradVector* ground_truth, std::int64_t wall_time_ns);

private:
    GradVector prev_eps_;
    GradVector prev_omega_;
};

// Diagnostic-only passes, kept apart from optimizer throughput.
struct DiagnosticCounter {
    std::size_t forwards = 0;
    std::size_t backwards = 0;
};

// Exact gradient at params, purely for measurement.
GradVector ground_truth_epsilon(const ParamVector& params, const Objective& objective,
                                DiagnosticCounter& counter);

enum class CosineField { eps_omega, eps_vs_ground_truth };
// Fraction of records whose chosen cosine is >= 0, over records where it was measured.
double consistency_rate(std::span<const StepRecord> records, CosineField field);

// ---------------------------------------------------------------------------
// Loss landscape and sharpness
// ---------------------------------------------------------------------------

// filter: each segment of a Gaussian direction is rescaled to the norm of the
//         matching parameter segment (zero for all-zero segments);
// unit_segment: each segment rescaled to unit norm;
// unit_global: whole direction rescaled to unit norm.
enum class DirectionNorm { filter, unit_segment, unit_global };

GradVector sample_direction(const ParamVector& params, std::uint64_t seed, DirectionNorm norm);

struct LandscapeSlice {
    std::vector<double> phis;
    std::vector<double> losses;
    std::uint64_t direction_seed = 0;
};

// losses[i] = L(theta + phis[i] * D). phis must contain 0.
LandscapeSlice landscape_slice(const ParamVector& params, const Objective& objective,
                               std::span<const double> phis, std::uint64_t direction_seed,
                               DirectionNorm norm = DirectionNorm::filter);
void write_landscape_csv(std::ostream& out, const LandscapeSlice& slice);

// max over `num_directions` unit Gaussian directions d of L(theta + rho d) - L(theta).
double sharpness_estimate(const ParamVector& params, const Objective& objective, double rho,
                          std::size_t num_directions, std::uint64_t seed);

struct TaylorGap {
    double measured = 0.0;  // L(theta + eps_g) - L(theta + eps_s)
    double predicted = 0.0; // (eps_g - eps_s) . grad L(theta)
};
TaylorGap taylor_gap(const ParamVector& params, const GradVector& eps_g, const GradVector& eps_s,
                     const Objective& objective);

struct ArcBound {
    double angle = 0.0; // radians between the two perturbations
    double chord = 0.0; // ||eps_g - eps_s||
    double arc = 0.0;   // angle * rho
};
ArcBound arc_bound(const GradVector& eps_g, const GradVector& eps_s, double rho);

// ---------------------------------------------------------------------------
// Throughput
// ---------------------------------------------------------------------------

struct RunThroughput {
    std::string variant;
    std::vector<StepRecord> records;
    std::size_t samples = 0; // training samples processed across all records
};

struct ThroughputRow {
    std::string variant;
    double samples_per_second = 0.0;
    double percent_of_reference = 0.0;
    std::size_t forwards = 0;
    std::size_t backwards = 0;
};

// Samples per second from the per-step wall times (diagnostic passes are not
// part of them) and the ratio to the `reference` row. All runs must have the
// same number of steps.
std::vector<ThroughputRow> throughput_report(std::span<const RunThroughput> runs,
                                             const std::string& reference = "sam");
std::string format_throughput_table(std::span<const ThroughputRow> rows);

} // namespace samlab
