#pragma once
#include <limits>
#include <optional>
#include <vector>

#include "volfn/grid.hpp"
#include "volfn/symmat.hpp"

namespace volfn {

// Tuning knobs for the spot covariance estimator.
//
// Window: k = ceil(window_const * n^gamma) with gamma in (1/3, 1/2), clamped
// to [2, n-1]. When theta is set, k = ceil(theta / sqrt(mesh)) instead (the
// regime where the window biases stay visible and can be reported).
//
// Truncation: u = trunc_const * scale * mesh^trunc_exponent with
// trunc_exponent in (0, 1/2); scale is either a fixed number or estimated
// from the data by the bipower rule. Disabled (u = +inf) when
// trunc_exponent is unset, for use on paths known to be continuous.
struct TuningPlan {
    double gamma = 0.4;
    double window_const = 1.0;
    std::optional<double> theta;

    std::optional<double> trunc_exponent = 0.49;
    double trunc_const = 4.0;
    bool bipower_scale = true;
    double fixed_scale = 1.0;

    void validate() const; // ConfigError on out-of-range values
};

struct WindowChoice {
    int k = 0;
    bool clamped = false;
};
WindowChoice select_window(int n, double mesh, const TuningPlan& plan);

struct TruncationChoice {
    double u = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    bool degenerate_scale = false; // bipower scale was 0: truncation disabled
};
TruncationChoice select_truncation(const ObservationGrid& grid, const TuningPlan& plan);

// Average of |dX^l_i| |dX^l_{i+1}| pairs, scaled to estimate an overall
// volatility level: sqrt of sum_l (pi/2) (n/(n-1)) sum_i |dX^l_i||dX^l_{i+1}|
// / ((n-1) mesh). Equals ~1 for a standard Brownian path on [0,1].
double bipower_scale_estimate(const ObservationGrid& grid);

// Spot covariance series: window averages of truncated increment outer
// products,
//   c_i = (1/(k mesh)) sum_{j=0..k-1} dX_{i+j} dX_{i+j}^T 1{ |dX_{i+j}| <= u }
// for i = 0..n-k (0-based; window i covers increments i+1..i+k in 1-based
// increment labels). Every window is PSD by construction.
class SpotSeries {
public:
    SpotSeries() = default;
    SpotSeries(int d, int k, double mesh, double u, std::vector<double> flat,
               double truncated_fraction);

    int dim() const { return dim_; }
    int window() const { return k_; }
    double mesh() const { return mesh_; }
    double truncation() const { return u_; }
    int count() const { return static_cast<int>(flat_.size() / (static_cast<std::size_t>(dim_) * dim_)); }
    double truncated_fraction() const { return truncated_fraction_; }

    // Fraction of increments removed by truncation above which estimates get
    // flagged as suspect.
    static constexpr double kHighTruncationFraction = 0.25;

    const double* at(int i) const {
        return flat_.data() + static_cast<std::size_t>(i) * dim_ * dim_;
    }
    void load(int i, SymMatrix& out) const { out.load_from(at(i)); }
    SymMatrix get(int i) const;

private:
    int dim_ = 0;
    int k_ = 0;
    double mesh_ = 0.0;
    double u_ = std::numeric_limits<double>::infinity();
    double truncated_fraction_ = 0.0;
    std::vector<double> flat_;
};

// Rolling computation: one window slides across the path, with a fresh direct
// recompute every k steps (and whenever cancellation pushes a diagonal of the
// running sum negative) so rounding drift cannot accumulate.
SpotSeries spot_estimates(const ObservationGrid& grid, int k, double u);

namespace serial {
// Direct reference: every window summed from scratch, ascending order.
SpotSeries spot_estimates(const ObservationGrid& grid, int k, double u);
} // namespace serial

// Direct computation parallelized over windows; identical output to the
// serial reference (each window is an independent ascending sum).
SpotSeries spot_estimates_direct(const ObservationGrid& grid, int k, double u);

} // namespace volfn
