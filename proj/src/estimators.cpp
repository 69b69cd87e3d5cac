#include "volfn/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "volfn/errors.hpp"
#include "volfn/parallel.hpp"

namespace volfn {

const char* const kFlagNegativeValue = "negative_value_for_nonnegative_g";
const char* const kFlagHighTruncation = "high_truncation_fraction";
const char* const kFlagAvarZero = "avar_zero";
const char* const kFlagWindowClamped = "window_clamped";
const char* const kFlagNearSingular = "spot_near_singular_for_nonsmooth_g";

std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Raw: return "raw";
        case EstimatorKind::RawBorderCorrected: return "raw_border_corrected";
        case EstimatorKind::CorrectedOverlapping: return "corrected_overlapping";
        case EstimatorKind::CorrectedNonoverlapping: return "corrected_nonoverlapping";
        case EstimatorKind::BaselineMoment: return "baseline_moment";
        case EstimatorKind::BaselineQuarticity: return "baseline_quarticity";
    }
    return "?";
}

const std::vector<EstimatorKind>& all_estimator_kinds() {
    static const std::vector<EstimatorKind> kinds = {
        EstimatorKind::Raw,
        EstimatorKind::RawBorderCorrected,
        EstimatorKind::CorrectedOverlapping,
        EstimatorKind::CorrectedNonoverlapping,
        EstimatorKind::BaselineMoment,
        EstimatorKind::BaselineQuarticity,
    };
    return kinds;
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
    for (EstimatorKind k : all_estimator_kinds())
        if (to_string(k) == s) return k;
    throw ConfigError("unknown estimator '" + s + "'");
}

bool EstimateReport::has_flag(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

namespace {

void require_dims(const TestFunction& g, const SpotSeries& s) {
    if (g.dim() != s.dim())
        throw std::invalid_argument("estimator: function dimension " + std::to_string(g.dim()) +
                                    " does not match spot dimension " + std::to_string(s.dim()));
    if (s.count() < 1) throw std::invalid_argument("estimator: empty spot series");
}

void check_window_domain(const TestFunction& g, const SpotSeries& s, int i, SymMatrix& x) {
    s.load(i, x);
    double lo = s.dim() == 1 ? x(0, 0) : min_eigenvalue(x);
    if (lo <= 0.0)
        throw NumericError(g.name() + ": spot estimate at window index " + std::to_string(i) +
                           " is singular, but the function is only smooth on positive definite "
                           "matrices");
}

// Functions that are only smooth inside the cone need every window checked;
// the scan runs serially up front so the summation loop itself never throws
// (it may execute inside an OpenMP region).
void check_domain(const TestFunction& g, const SpotSeries& s) {
    if (g.smooth_on_boundary()) return;
    SymMatrix x(s.dim());
    for (int i = 0; i < s.count(); ++i) check_window_domain(g, s, i, x);
}

template <class Term>
double spot_sum(const SpotSeries& s, bool parallel, Term&& term) {
    const int m = s.count();
    auto body = [&](std::int64_t i) {
        static thread_local SymMatrix x;
        if (x.dim() != s.dim()) x = SymMatrix(s.dim());
        s.load(static_cast<int>(i), x);
        return term(x);
    };
    return parallel ? block_sum(m, body) : serial::block_sum(m, body);
}

} // namespace

double estimate_raw(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    check_domain(g, s);
    return s.mesh() * spot_sum(s, true, [&](const SymMatrix& x) { return g.eval(x); });
}

double border_term(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    static thread_local SymMatrix x;
    if (x.dim() != s.dim()) x = SymMatrix(s.dim());
    if (!g.smooth_on_boundary()) {
        check_window_domain(g, s, 0, x);
        check_window_domain(g, s, s.count() - 1, x);
    }
    s.load(0, x);
    double ends = g.eval(x);
    s.load(s.count() - 1, x);
    ends += g.eval(x);
    return 0.5 * (s.window() - 1) * s.mesh() * ends;
}

double estimate_corrected_overlapping(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    check_domain(g, s);
    const double inv2k = 1.0 / (2.0 * s.window());
    return s.mesh() * spot_sum(s, true, [&](const SymMatrix& x) {
               return g.eval(x) - inv2k * g.correction_kernel(x);
           });
}

double estimate_corrected_nonoverlapping(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    check_domain(g, s);
    const int k = s.window();
    const int n = s.count() + k - 1; // number of increments
    const std::int64_t blocks = n / k;
    const double inv2k = 1.0 / (2.0 * k);
    double sum = block_sum(blocks, [&](std::int64_t b) {
        static thread_local SymMatrix x;
        if (x.dim() != s.dim()) x = SymMatrix(s.dim());
        s.load(static_cast<int>(b) * k, x);
        return g.eval(x) - inv2k * g.correction_kernel(x);
    });
    return k * s.mesh() * sum;
}

double estimate_avar(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    auto h = make_avar_function(g);
    check_domain(*h, s);
    return s.mesh() * spot_sum(s, true, [&](const SymMatrix& x) { return h->eval(x); });
}

double estimate_correction_integral(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    check_domain(g, s);
    return s.mesh() * spot_sum(s, true, [&](const SymMatrix& x) { return g.correction_kernel(x); });
}

ThetaBias theta_mode_bias(const TestFunction& g, const SpotSeries& s, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    require_dims(g, s);
    ThetaBias b;
    b.theta = theta;
    static thread_local SymMatrix x;
    if (x.dim() != s.dim()) x = SymMatrix(s.dim());
    if (!g.smooth_on_boundary()) {
        check_window_domain(g, s, 0, x);
        check_window_domain(g, s, s.count() - 1, x);
    }
    s.load(0, x);
    double ends = g.eval(x);
    s.load(s.count() - 1, x);
    ends += g.eval(x);
    b.a1 = -0.5 * theta * ends;
    b.a2 = estimate_correction_integral(g, s) / (2.0 * theta);
    return b;
}

namespace serial {

double estimate_raw(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    return s.mesh() * spot_sum(s, false, [&](const SymMatrix& x) { return g.eval(x); });
}

double estimate_corrected_overlapping(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    const double inv2k = 1.0 / (2.0 * s.window());
    return s.mesh() * spot_sum(s, false, [&](const SymMatrix& x) {
               return g.eval(x) - inv2k * g.correction_kernel(x);
           });
}

double estimate_avar(const TestFunction& g, const SpotSeries& s) {
    require_dims(g, s);
    auto h = make_avar_function(g);
    return s.mesh() * spot_sum(s, false, [&](const SymMatrix& x) { return h->eval(x); });
}

} // namespace serial

// ---- normal quantile (rational approximation, max error ~ 1e-16 claimed;
// we rely on < 1e-9) ----

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must lie strictly in (0, 1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = p < 0.5 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return p < 0.5 ? -val : val;
}

ConfidenceInterval confidence_interval(double value, double avar, double mesh, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must lie strictly in (0, 1)");
    ConfidenceInterval ci;
    if (!(avar > 0.0) || !std::isfinite(avar)) return ci;
    double hw = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(mesh * avar);
    ci.lo = value - hw;
    ci.hi = value + hw;
    ci.defined = true;
    return ci;
}

double baseline_moment(double p, const ObservationGrid& grid) {
    if (grid.dim() != 1)
        throw ConfigError("baseline moment estimator is only defined for dimension 1");
    if (!(p > 0.0)) throw std::invalid_argument("baseline moment: p must be positive");
    const double inv_sqrt_mesh = 1.0 / std::sqrt(grid.mesh());
    const double inv_moment = 1.0 / gaussian_abs_moment(2.0 * p);
    const double two_p = 2.0 * p;
    double sum = block_sum(grid.n(), [&](std::int64_t i) {
        double z = std::fabs(grid.increment(static_cast<int>(i) + 1, 0)) * inv_sqrt_mesh;
        return std::pow(z, two_p);
    });
    return grid.mesh() * inv_moment * sum;
}

// ---- orchestration ----

namespace {

bool is_baseline(EstimatorKind k) {
    return k == EstimatorKind::BaselineMoment || k == EstimatorKind::BaselineQuarticity;
}

} // namespace

EstimateReport estimate_with_context(const TestFunction& g, const ObservationGrid& grid,
                                     const SpotContext& ctx, const EstimateOptions& opt) {
    if (g.dim() != grid.dim())
        throw ConfigError("function '" + g.name() + "' has dimension " + std::to_string(g.dim()) +
                          " but the data has dimension " + std::to_string(grid.dim()));

    EstimateReport r;
    r.kind = opt.kind;
    r.function = g.name();
    r.n = grid.n();
    r.mesh = grid.mesh();
    r.horizon = grid.horizon();
    r.ci_level = opt.ci_level;

    if (is_baseline(opt.kind)) {
        double p = opt.kind == EstimatorKind::BaselineQuarticity ? 2.0 : g.growth_order();
        r.value = baseline_moment(p, grid);
        // Classical plug-in variance: (m_{4p} - m_{2p}^2)/m_{2p}^2 * integral of c^{2p}.
        double m2p = gaussian_abs_moment(2.0 * p);
        double m4p = gaussian_abs_moment(4.0 * p);
        double ratio = (m4p - m2p * m2p) / (m2p * m2p);
        r.avar = ratio * baseline_moment(2.0 * p, grid);
        r.truncation = std::numeric_limits<double>::infinity();
    } else {
        if (!ctx.spots)
            throw std::invalid_argument("estimate: spot series required for estimator '" +
                                        to_string(opt.kind) + "'");
        const SpotSeries& spots = *ctx.spots;
        r.window = spots.window();
        r.truncation = spots.truncation();
        r.truncated_fraction = spots.truncated_fraction();
        if (ctx.window_clamped) r.flags.push_back(kFlagWindowClamped);

        switch (opt.kind) {
            case EstimatorKind::Raw:
                r.value = estimate_raw(g, spots);
                break;
            case EstimatorKind::RawBorderCorrected:
                r.value = estimate_raw(g, spots) + border_term(g, spots);
                break;
            case EstimatorKind::CorrectedOverlapping:
                r.value = estimate_corrected_overlapping(g, spots);
                if (opt.border) r.value += border_term(g, spots);
                break;
            case EstimatorKind::CorrectedNonoverlapping:
                r.value = estimate_corrected_nonoverlapping(g, spots);
                if (opt.border) r.value += border_term(g, spots);
                break;
            default:
                break;
        }
        r.avar = estimate_avar(g, spots);
        if (spots.truncated_fraction() > SpotSeries::kHighTruncationFraction)
            r.flags.push_back(kFlagHighTruncation);
        if (!g.smooth_on_boundary()) {
            // Functions like power(p) with non-integer p blow up near the
            // boundary of the cone; flag estimates whose smallest spot
            // eigenvalue gets within a relative whisker of zero.
            SymMatrix x(spots.dim());
            double lo = std::numeric_limits<double>::infinity();
            double trace_sum = 0.0;
            for (int i = 0; i < spots.count(); ++i) {
                spots.load(i, x);
                lo = std::min(lo, spots.dim() == 1 ? x(0, 0) : min_eigenvalue(x));
                trace_sum += x.trace();
            }
            double scale = trace_sum / (spots.count() * spots.dim());
            if (lo < 1e-3 * scale) r.flags.push_back(kFlagNearSingular);
        }
        if (ctx.theta) r.theta_bias = theta_mode_bias(g, spots, *ctx.theta);
    }

    if (!std::isfinite(r.value))
        throw NumericError("estimate '" + to_string(opt.kind) + "' of " + g.name() +
                           " is not finite");
    if (g.nonnegative() && r.value < 0.0) r.flags.push_back(kFlagNegativeValue);
    if (!(r.avar > 0.0) || !std::isfinite(r.avar)) r.flags.push_back(kFlagAvarZero);
    r.ci = confidence_interval(r.value, r.avar, r.mesh, opt.ci_level);
    return r;
}

EstimateReport estimate(const TestFunction& g, const ObservationGrid& grid,
                        const TuningPlan& plan, const EstimateOptions& opt) {
    plan.validate();
    SpotContext ctx;
    ctx.theta = plan.theta;
    SpotSeries spots;
    if (!is_baseline(opt.kind)) {
        WindowChoice w = select_window(grid.n(), grid.mesh(), plan);
        TruncationChoice u = select_truncation(grid, plan);
        spots = spot_estimates(grid, w.k, u.u);
        ctx.spots = &spots;
        ctx.window_clamped = w.clamped;
    }
    return estimate_with_context(g, grid, ctx, opt);
}

// ---- serialization ----

namespace {

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_flags(const std::vector<std::string>& flags) {
    std::string s;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (i) s += ';';
        s += flags[i];
    }
    return s;
}

} // namespace

void write_report_kv(const EstimateReport& r, std::ostream& out) {
    out << "estimator=" << to_string(r.kind) << "\n";
    out << "function=" << r.function << "\n";
    out << "n=" << r.n << "\n";
    out << "mesh=" << num17(r.mesh) << "\n";
    out << "horizon=" << num17(r.horizon) << "\n";
    out << "window=" << r.window << "\n";
    out << "truncation=" << num17(r.truncation) << "\n";
    out << "truncated_fraction=" << num17(r.truncated_fraction) << "\n";
    out << "value=" << num17(r.value) << "\n";
    out << "avar=" << num17(r.avar) << "\n";
    out << "ci_level=" << num17(r.ci_level) << "\n";
    if (r.ci.defined) {
        out << "ci_low=" << num17(r.ci.lo) << "\n";
        out << "ci_high=" << num17(r.ci.hi) << "\n";
    } else {
        out << "ci=undefined\n";
    }
    out << "flags=" << join_flags(r.flags) << "\n";
    if (r.theta_bias) {
        out << "theta=" << num17(r.theta_bias->theta) << "\n";
        out << "bias_a1=" << num17(r.theta_bias->a1) << "\n";
        out << "bias_a2=" << num17(r.theta_bias->a2) << "\n";
        out << "bias_a3_a4=" << r.theta_bias->a3_a4 << "\n";
    }
}

void write_report_csv_header(std::ostream& out) {
    out << "estimator,function,n,mesh,horizon,window,truncation,truncated_fraction,value,avar,"
           "ci_level,ci_low,ci_high,flags\n";
}

void write_report_csv_row(const EstimateReport& r, std::ostream& out) {
    out << to_string(r.kind) << ',' << '"' << r.function << '"' << ',' << r.n << ','
        << num17(r.mesh) << ',' << num17(r.horizon) << ',' << r.window << ','
        << num17(r.truncation) << ',' << num17(r.truncated_fraction) << ',' << num17(r.value)
        << ',' << num17(r.avar) << ',' << num17(r.ci_level) << ',';
    if (r.ci.defined)
        out << num17(r.ci.lo) << ',' << num17(r.ci.hi);
    else
        out << ',';
    out << ',' << join_flags(r.flags) << "\n";
}

} // namespace volfn
