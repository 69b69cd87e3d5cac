#include "volfn/spot.hpp"

#include <cmath>
#include <stdexcept>

#include "volfn/errors.hpp"
#include "volfn/parallel.hpp"

namespace volfn {

void TuningPlan::validate() const {
    if (theta) {
        if (!(*theta > 0.0)) throw ConfigError("tuning: theta must be positive");
    } else {
        if (!(gamma > 1.0 / 3.0 && gamma < 0.5))
            throw ConfigError("tuning: gamma must lie strictly between 1/3 and 1/2");
    }
    if (!(window_const > 0.0)) throw ConfigError("tuning: window constant must be positive");
    if (trunc_exponent && !(*trunc_exponent > 0.0 && *trunc_exponent < 0.5))
        throw ConfigError("tuning: truncation exponent must lie strictly between 0 and 1/2");
    if (!(trunc_const > 0.0)) throw ConfigError("tuning: truncation constant must be positive");
    if (!bipower_scale && !(fixed_scale > 0.0))
        throw ConfigError("tuning: fixed truncation scale must be positive");
}

WindowChoice select_window(int n, double mesh, const TuningPlan& plan) {
    plan.validate();
    if (n < 3)
        throw DataError("need at least 3 increments to form a spot window, got " +
                        std::to_string(n));
    if (!(mesh > 0.0)) throw DataError("mesh must be positive");
    double raw = plan.theta ? *plan.theta / std::sqrt(mesh)
                            : plan.window_const * std::pow(static_cast<double>(n), plan.gamma);
    WindowChoice w;
    double k = std::ceil(raw);
    if (k < 2.0) {
        w.k = 2;
        w.clamped = true;
    } else if (k > static_cast<double>(n - 1)) {
        w.k = n - 1;
        w.clamped = true;
    } else {
        w.k = static_cast<int>(k);
    }
    return w;
}

double bipower_scale_estimate(const ObservationGrid& grid) {
    const int n = grid.n();
    if (n < 2) return 0.0;
    const double pi_half = 1.57079632679489661923132169163975144;
    double s = 0.0;
    for (int l = 0; l < grid.dim(); ++l) {
        double acc = 0.0;
        for (int i = 1; i < n; ++i)
            acc += std::fabs(grid.increment(i, l)) * std::fabs(grid.increment(i + 1, l));
        s += acc;
    }
    double n_d = static_cast<double>(n);
    double s2 = pi_half * (n_d / (n_d - 1.0)) * s / ((n_d - 1.0) * grid.mesh());
    return std::sqrt(s2);
}

TruncationChoice select_truncation(const ObservationGrid& grid, const TuningPlan& plan) {
    plan.validate();
    TruncationChoice t;
    if (!plan.trunc_exponent) return t;
    t.scale = plan.bipower_scale ? bipower_scale_estimate(grid) : plan.fixed_scale;
    if (!(t.scale > 0.0)) {
        t.degenerate_scale = true;
        return t;
    }
    t.u = plan.trunc_const * t.scale * std::pow(grid.mesh(), *plan.trunc_exponent);
    return t;
}

// ---- spot series ----

SpotSeries::SpotSeries(int d, int k, double mesh, double u, std::vector<double> flat,
                       double truncated_fraction)
    : dim_(d), k_(k), mesh_(mesh), u_(u), truncated_fraction_(truncated_fraction),
      flat_(std::move(flat)) {}

SymMatrix SpotSeries::get(int i) const {
    SymMatrix m(dim_);
    m.load_from(at(i));
    return m;
}

namespace {

struct SpotArgs {
    int n = 0, d = 0, k = 0, m = 0;
    double u2 = 0.0;
    double inv_kmesh = 0.0;
};

SpotArgs spot_args(const ObservationGrid& grid, int k, double u) {
    SpotArgs a;
    a.n = grid.n();
    a.d = grid.dim();
    if (k < 1 || k > a.n)
        throw std::invalid_argument("spot window k=" + std::to_string(k) +
                                    " must lie in [1, n]; n=" + std::to_string(a.n));
    if (!(u > 0.0)) throw std::invalid_argument("truncation level must be positive (or +inf)");
    a.k = k;
    a.m = a.n - k + 1;
    a.u2 = u * u;
    a.inv_kmesh = 1.0 / (k * grid.mesh());
    return a;
}

double truncated_fraction_of(const ObservationGrid& grid, double u2) {
    int cnt = 0;
    for (int i = 1; i <= grid.n(); ++i)
        if (!(grid.increment_norm2(i) <= u2)) ++cnt;
    return static_cast<double>(cnt) / grid.n();
}

// Adds sign * dX_i dX_i^T to s (full d x d buffer), if the increment is kept.
inline void add_outer(const ObservationGrid& grid, int i, double u2, double sign, double* s) {
    if (!(grid.increment_norm2(i) <= u2)) return;
    const int d = grid.dim();
    for (int a = 0; a < d; ++a) {
        double va = sign * grid.increment(i, a);
        for (int b = a; b < d; ++b) {
            double v = va * grid.increment(i, b);
            s[a * d + b] += v;
            if (b != a) s[b * d + a] += v;
        }
    }
}

void window_sum(const ObservationGrid& grid, int start, int k, double u2, double* s) {
    const int d = grid.dim();
    for (int i = 0; i < d * d; ++i) s[i] = 0.0;
    for (int j = 0; j < k; ++j) add_outer(grid, start + j, u2, 1.0, s);
}

} // namespace

SpotSeries spot_estimates(const ObservationGrid& grid, int k, double u) {
    SpotArgs a = spot_args(grid, k, u);
    std::vector<double> flat(static_cast<std::size_t>(a.m) * a.d * a.d);
    std::vector<double> s(static_cast<std::size_t>(a.d) * a.d, 0.0);

    for (int w = 0; w < a.m; ++w) {
        if (w % a.k == 0) {
            window_sum(grid, w + 1, a.k, a.u2, s.data());
        } else {
            add_outer(grid, w + a.k, a.u2, 1.0, s.data());
            add_outer(grid, w, a.u2, -1.0, s.data());
            bool neg_diag = false;
            for (int j = 0; j < a.d; ++j)
                if (s[static_cast<std::size_t>(j) * a.d + j] < 0.0) neg_diag = true;
            if (neg_diag) window_sum(grid, w + 1, a.k, a.u2, s.data());
        }
        double* out = flat.data() + static_cast<std::size_t>(w) * a.d * a.d;
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * a.inv_kmesh;
    }
    return SpotSeries(a.d, a.k, grid.mesh(), u, std::move(flat), truncated_fraction_of(grid, a.u2));
}

namespace serial {
SpotSeries spot_estimates(const ObservationGrid& grid, int k, double u) {
    SpotArgs a = spot_args(grid, k, u);
    std::vector<double> flat(static_cast<std::size_t>(a.m) * a.d * a.d);
    std::vector<double> s(static_cast<std::size_t>(a.d) * a.d, 0.0);
    for (int w = 0; w < a.m; ++w) {
        window_sum(grid, w + 1, a.k, a.u2, s.data());
        double* out = flat.data() + static_cast<std::size_t>(w) * a.d * a.d;
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * a.inv_kmesh;
    }
    return SpotSeries(a.d, a.k, grid.mesh(), u, std::move(flat), truncated_fraction_of(grid, a.u2));
}
} // namespace serial

SpotSeries spot_estimates_direct(const ObservationGrid& grid, int k, double u) {
    SpotArgs a = spot_args(grid, k, u);
    std::vector<double> flat(static_cast<std::size_t>(a.m) * a.d * a.d);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int w = 0; w < a.m; ++w) {
        std::vector<double> s(static_cast<std::size_t>(a.d) * a.d, 0.0);
        window_sum(grid, w + 1, a.k, a.u2, s.data());
        double* out = flat.data() + static_cast<std::size_t>(w) * a.d * a.d;
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * a.inv_kmesh;
    }
    return SpotSeries(a.d, a.k, grid.mesh(), u, std::move(flat), truncated_fraction_of(grid, a.u2));
}

} // namespace volfn
