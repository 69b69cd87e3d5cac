#pragma once
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "volfn/grid.hpp"
#include "volfn/spot.hpp"
#include "volfn/testfn.hpp"

namespace volfn {

enum class EstimatorKind {
    Raw,                     // mesh * sum_i g(c_i)
    RawBorderCorrected,      // raw + ((k-1) mesh / 2)(g(c_first) + g(c_last))
    CorrectedOverlapping,    // mesh * sum_i [g(c_i) - Q_g(c_i)/(2k)], all windows
    CorrectedNonoverlapping, // k mesh * sum over disjoint windows 0, k, 2k, ...
    BaselineMoment,          // d=1 classical moment estimator of integral of c^p
    BaselineQuarticity,      // BaselineMoment with p = 2
};

std::string to_string(EstimatorKind k);
EstimatorKind estimator_kind_from_string(const std::string& s);
const std::vector<EstimatorKind>& all_estimator_kinds();

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool defined = false;
};

struct ThetaBias {
    double theta = 0.0;
    double a1 = 0.0; // border bias: -(theta/2)(g(c_first) + g(c_last))
    double a2 = 0.0; // curvature bias: (1/(2 theta)) mesh sum_i Q_g(c_i)
    std::string a3_a4 = "not estimated";
};

struct EstimateReport {
    EstimatorKind kind = EstimatorKind::CorrectedOverlapping;
    std::string function;
    int n = 0;
    double mesh = 0.0;
    double horizon = 0.0;
    int window = 0;
    double truncation = 0.0;
    double truncated_fraction = 0.0;
    double value = 0.0;
    double avar = 0.0;
    double ci_level = 0.0;
    ConfidenceInterval ci;
    std::vector<std::string> flags;
    std::optional<ThetaBias> theta_bias;

    bool has_flag(const std::string& f) const;
};

// ---- kernels ----
// All sums run over fixed-size index blocks in ascending order (block_sum),
// so results are bit-identical across worker counts.

double estimate_raw(const TestFunction& g, const SpotSeries& s);
double border_term(const TestFunction& g, const SpotSeries& s);
double estimate_corrected_overlapping(const TestFunction& g, const SpotSeries& s);
double estimate_corrected_nonoverlapping(const TestFunction& g, const SpotSeries& s);

// Plug-in estimate of the asymptotic variance: raw estimator applied to the
// variance functional of g.
double estimate_avar(const TestFunction& g, const SpotSeries& s);

// Raw estimator applied to the correction kernel Q_g (used by the theta-mode
// curvature bias).
double estimate_correction_integral(const TestFunction& g, const SpotSeries& s);

ThetaBias theta_mode_bias(const TestFunction& g, const SpotSeries& s, double theta);

// Half width z_{(1+level)/2} sqrt(mesh * avar); undefined unless avar > 0
// and finite.
ConfidenceInterval confidence_interval(double value, double avar, double mesh, double level);

// Inverse standard normal CDF (rational approximation, |error| < 1e-9).
double normal_quantile(double p);

// Classical moment estimator (d = 1):
//   mesh * sum_i |dX_i / sqrt(mesh)|^{2p} / m_{2p},
// a consistent estimator of the integral of c^p on continuous paths.
double baseline_moment(double p, const ObservationGrid& grid);

namespace serial {
// Single-threaded reference implementations (same block structure).
double estimate_raw(const TestFunction& g, const SpotSeries& s);
double estimate_corrected_overlapping(const TestFunction& g, const SpotSeries& s);
double estimate_avar(const TestFunction& g, const SpotSeries& s);
} // namespace serial

// ---- orchestration ----

struct EstimateOptions {
    EstimatorKind kind = EstimatorKind::CorrectedOverlapping;
    double ci_level = 0.95;
    bool border = false; // also add the border term to Raw/Corrected* values
};

// Precomputed per-path state shared by several estimates (the Monte Carlo
// runner computes spots once per replication and reuses them).
struct SpotContext {
    const SpotSeries* spots = nullptr; // may stay null for baseline kinds
    bool window_clamped = false;
    std::optional<double> theta; // theta-mode diagnostics when set
};

EstimateReport estimate_with_context(const TestFunction& g, const ObservationGrid& grid,
                                     const SpotContext& ctx, const EstimateOptions& opt);

// Full pipeline: window + truncation selection, spot series, estimate, avar,
// CI, flags; theta diagnostics when plan.theta is set. Never clips: negative
// values for nonnegative g are reported as-is and flagged.
EstimateReport estimate(const TestFunction& g, const ObservationGrid& grid,
                        const TuningPlan& plan, const EstimateOptions& opt = {});

// Flat key=value serialization (one field per line) and a one-row CSV form.
// Numbers carry 17 significant digits so round-trips are exact.
void write_report_kv(const EstimateReport& r, std::ostream& out);
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(const EstimateReport& r, std::ostream& out);

extern const char* const kFlagNegativeValue;
extern const char* const kFlagHighTruncation;
extern const char* const kFlagAvarZero;
extern const char* const kFlagWindowClamped;
extern const char* const kFlagNearSingular;

} // namespace volfn
