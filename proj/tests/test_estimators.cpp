#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "volfn/errors.hpp"
#include "volfn/estimators.hpp"
#include "volfn/grid.hpp"
#include "volfn/parallel.hpp"
#include "volfn/rng.hpp"
#include "volfn/spot.hpp"
#include "volfn/testfn.hpp"

using namespace volfn;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

SpotSeries series1(const std::vector<double>& vals, int k, double mesh) {
    return SpotSeries(1, k, mesh, kInf, vals, 0.0);
}

SpotSeries random_series(std::uint64_t seed, int d, int count, double mesh) {
    RngStream rng(seed);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(count) * d * d);
    std::vector<double> v(static_cast<std::size_t>(d));
    SymMatrix x(d);
    for (int i = 0; i < count; ++i) {
        x.fill(0.0);
        for (int r = 0; r < d + 1; ++r) {
            for (int c = 0; c < d; ++c) v[static_cast<std::size_t>(c)] = rng.next_normal();
            for (int j = 0; j < d; ++j)
                for (int k2 = j; k2 < d; ++k2)
                    x.add(j, k2, v[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(k2)] /
                                     (d + 1.0));
        }
        for (int j = 0; j < d; ++j) x.add(j, j, 0.2); // keep it positive definite
        flat.insert(flat.end(), x.data(), x.data() + d * d);
    }
    return SpotSeries(d, 10, mesh, kInf, std::move(flat), 0.0);
}

} // namespace

TEST_CASE("raw estimator: single window oracle") {
    auto g = make_power(2.0);
    SpotSeries s = series1({2.0}, 5, 0.5);
    CHECK(estimate_raw(*g, s) == doctest::Approx(0.5 * 4.0).epsilon(1e-15));
}

TEST_CASE("border term") {
    auto g = make_power(1.0);
    // ends are 2 and 2, k=3, mesh=1: 0.5 * (3-1) * 1 * (2+2) = 4
    SpotSeries s = series1({2.0, 7.0, 2.0}, 3, 1.0);
    CHECK(border_term(*g, s) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("corrected overlapping: curvature subtraction") {
    auto g = make_power(2.0);
    // one window at c: mesh * (c^2 - Q/(2k)) with Q = 4c^2
    for (double c : {0.5, 1.0, 3.0}) {
        for (int k : {2, 10, 40}) {
            SpotSeries s(1, k, 0.25, kInf, {c}, 0.0);
            double expect = 0.25 * (c * c) * (1.0 - 2.0 / k);
            CHECK(estimate_corrected_overlapping(*g, s) == doctest::Approx(expect).epsilon(1e-14));
        }
    }

    // d=2, trace(x^2) at the identity, k=2, mesh=1: 2 - 12/4 = -1
    auto t2 = make_trace_power(2, 2);
    SymMatrix id = SymMatrix::identity(2);
    std::vector<double> flat(id.data(), id.data() + 4);
    SpotSeries s2(2, 2, 1.0, kInf, std::move(flat), 0.0);
    CHECK(estimate_corrected_overlapping(*t2, s2) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("corrected nonoverlapping: disjoint windows") {
    auto g = make_power(1.0); // Q = 0
    // spots at windows 0..4 are 1..5; k=2 -> n = 6 increments -> blocks at 0, 2, 4
    SpotSeries s = series1({1.0, 2.0, 3.0, 4.0, 5.0}, 2, 0.1);
    CHECK(estimate_corrected_nonoverlapping(*g, s) ==
          doctest::Approx(2.0 * 0.1 * (1.0 + 3.0 + 5.0)).epsilon(1e-14));
}

TEST_CASE("avar plug-in") {
    auto g = make_power(2.0);
    SpotSeries s = series1({1.0}, 4, 1.0);
    CHECK(estimate_avar(*g, s) == doctest::Approx(8.0).epsilon(1e-14)); // 8 c^4 at c=1
    SpotSeries z = series1({0.0, 0.0}, 4, 1.0);
    CHECK(estimate_avar(*g, z) == 0.0);
}

TEST_CASE("identity collapse: correction is exactly zero") {
    auto g = make_test_function("identity", 1);
    SpotSeries s = random_series(3, 1, 500, 1e-3);
    double raw = estimate_raw(*g, s);
    double corrected = estimate_corrected_overlapping(*g, s);
    CHECK(raw == corrected); // bitwise: the subtracted kernel is the constant 0.0
    double direct = 0.0;
    for (int i = 0; i < s.count(); ++i) direct += s.at(i)[0];
    direct *= 1e-3;
    CHECK(corrected == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("serial reference matches parallel kernels bitwise") {
    for (int d : {1, 3}) {
        SpotSeries s = random_series(40 + d, d, 1234, 1e-3);
        auto g = d == 1 ? make_power(2.0) : make_trace_power(d, 2);
        CHECK(estimate_raw(*g, s) == serial::estimate_raw(*g, s));
        CHECK(estimate_corrected_overlapping(*g, s) ==
              serial::estimate_corrected_overlapping(*g, s));
        CHECK(estimate_avar(*g, s) == serial::estimate_avar(*g, s));

        // and the result must not depend on the worker cap
        set_max_workers(3);
        double capped = estimate_corrected_overlapping(*g, s);
        set_max_workers(1);
        double single = estimate_corrected_overlapping(*g, s);
        set_max_workers(0);
        CHECK(capped == single);
    }

    // block_sum itself: alternating series that is hostile to reassociation
    auto term = [](std::int64_t i) {
        return (i % 2 ? -1.0 : 1.0) / (1.0 + static_cast<double>(i) * 1e-3);
    };
    CHECK(block_sum(100000, term) == serial::block_sum(100000, term));
}

TEST_CASE("theta-mode bias terms at constant spots") {
    auto g = make_power(2.0);
    SpotSeries s = series1(std::vector<double>(100, 1.0), 7, 0.01);
    ThetaBias b = theta_mode_bias(*g, s, 2.0);
    CHECK(b.theta == 2.0);
    CHECK(b.a1 == doctest::Approx(-2.0).epsilon(1e-14)); // -(theta/2)(1 + 1) * c^2
    // a2 = (1/(2 theta)) * mesh * sum Q = (1/4) * 0.01 * 100 * 4 = 1
    CHECK(b.a2 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(b.a3_a4 == "not estimated");
    CHECK_THROWS(theta_mode_bias(*g, s, 0.0));
}

TEST_CASE("normal quantile against a bisection oracle") {
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    auto oracle = [&](double p) {
        double lo = -40.0, hi = 40.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (cdf(mid) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    for (double p : {1e-9, 1e-4, 0.025, 0.3, 0.5, 0.7, 0.975, 0.995, 1.0 - 1e-4}) {
        CHECK(normal_quantile(p) == doctest::Approx(oracle(p)).epsilon(1e-9));
        // symmetry is limited by cancellation in 1-p out in the tails
        CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-6));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK_THROWS(normal_quantile(0.0));
    CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("confidence interval arithmetic") {
    ConfidenceInterval ci = confidence_interval(1.0, 4.0, 0.01, 0.95);
    REQUIRE(ci.defined);
    CHECK(ci.lo == doctest::Approx(0.608007).epsilon(1e-6));
    CHECK(ci.hi == doctest::Approx(1.391993).epsilon(1e-6));

    CHECK_FALSE(confidence_interval(1.0, 0.0, 0.01, 0.95).defined);
    CHECK_FALSE(confidence_interval(1.0, -1.0, 0.01, 0.95).defined);
    CHECK_FALSE(confidence_interval(1.0, kInf, 0.01, 0.95).defined);
    CHECK_THROWS(confidence_interval(1.0, 4.0, 0.01, 1.0));

    // widening factor when moving from 95% to 99%
    ConfidenceInterval w = confidence_interval(1.0, 4.0, 0.01, 0.99);
    double ratio = (w.hi - w.lo) / (ci.hi - ci.lo);
    CHECK(ratio == doctest::Approx(1.3140).epsilon(1e-4));
}

TEST_CASE("baseline moment estimator") {
    // p=1 is realized variance: values 0,1,3 -> 1 + 4 = 5 (any mesh)
    ObservationGrid g(1, 0.25, {0.0, 1.0, 3.0});
    CHECK(baseline_moment(1.0, g) == doctest::Approx(5.0).epsilon(1e-14));

    // p=2 with every increment sqrt(mesh): each term 1, total = t / 3
    int n = 400;
    double mesh = 1.0 / n;
    std::vector<double> vals(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) vals[static_cast<std::size_t>(i)] = i * std::sqrt(mesh);
    ObservationGrid u(1, mesh, std::move(vals));
    CHECK(baseline_moment(2.0, u) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    ObservationGrid g2(2, 1.0, {0.0, 0.0, 1.0, 1.0});
    CHECK_THROWS_AS(baseline_moment(1.0, g2), ConfigError);
}

TEST_CASE("singular windows rejected for boundary-only-smooth functions") {
    auto gh = make_power(2.5);
    SpotSeries s = series1({1.0, 0.0, 2.0}, 2, 0.1);
    try {
        estimate_raw(*gh, s);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("window index 1") != std::string::npos);
    }
    // smooth functions handle the same series fine
    CHECK_NOTHROW(estimate_raw(*make_power(2.0), s));
}

TEST_CASE("estimator kind names round trip") {
    for (EstimatorKind k : all_estimator_kinds())
        CHECK(estimator_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(estimator_kind_from_string("bogus"), ConfigError);
}

TEST_CASE("full pipeline report") {
    RngStream rng(9);
    int n = 3000;
    double mesh = 1e-3;
    std::vector<double> vals(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 0; i < n; ++i)
        vals[static_cast<std::size_t>(i + 1)] =
            vals[static_cast<std::size_t>(i)] + std::sqrt(mesh) * rng.next_normal();
    ObservationGrid grid(1, mesh, std::move(vals));

    TuningPlan plan;
    plan.trunc_exponent.reset();
    auto g = make_power(2.0);

    EstimateOptions opt;
    opt.kind = EstimatorKind::CorrectedOverlapping;
    EstimateReport r = estimate(*g, grid, plan, opt);
    CHECK(r.n == n);
    CHECK(r.mesh == mesh);
    CHECK(r.window == select_window(n, mesh, plan).k);
    CHECK(std::isinf(r.truncation));
    CHECK(r.value > 0.0);
    CHECK(r.avar > 0.0);
    REQUIRE(r.ci.defined);
    CHECK(r.ci.lo < r.value);
    CHECK(r.ci.hi > r.value);
    CHECK_FALSE(r.theta_bias.has_value());

    // the pipeline must equal the manual composition bit for bit
    WindowChoice w = select_window(n, mesh, plan);
    SpotSeries spots = spot_estimates(grid, w.k, kInf);
    CHECK(r.value == estimate_corrected_overlapping(*g, spots));
    CHECK(r.avar == estimate_avar(*g, spots));

    // raw differs from corrected in general, is equal for identity g
    opt.kind = EstimatorKind::Raw;
    EstimateReport rr = estimate(*g, grid, plan, opt);
    CHECK(rr.value != r.value);
    auto gid = make_test_function("identity", 1);
    opt.kind = EstimatorKind::Raw;
    double raw_id = estimate(*gid, grid, plan, opt).value;
    opt.kind = EstimatorKind::CorrectedOverlapping;
    double cor_id = estimate(*gid, grid, plan, opt).value;
    CHECK(raw_id == cor_id);

    // theta mode adds the bias diagnostics
    TuningPlan tplan = plan;
    tplan.theta = 1.0;
    EstimateReport rt = estimate(*g, grid, tplan, opt);
    REQUIRE(rt.theta_bias.has_value());
    CHECK(rt.theta_bias->theta == 1.0);
    CHECK(rt.theta_bias->a1 < 0.0);
    CHECK(rt.theta_bias->a2 > 0.0);

    // window clamping flag
    TuningPlan cplan = plan;
    cplan.window_const = 1e7;
    EstimateReport rc = estimate(*g, grid, cplan, opt);
    CHECK(rc.has_flag(kFlagWindowClamped));
    CHECK(rc.window == n - 1);

    // border option shifts the corrected value by the border term
    EstimateOptions bopt;
    bopt.kind = EstimatorKind::CorrectedOverlapping;
    bopt.border = true;
    EstimateReport rb = estimate(*g, grid, plan, bopt);
    CHECK(rb.value == doctest::Approx(r.value + border_term(*g, spots)).epsilon(1e-13));

    // RawBorderCorrected == Raw + border term even without the border option
    EstimateOptions ropt;
    ropt.kind = EstimatorKind::RawBorderCorrected;
    EstimateReport rbc = estimate(*g, grid, plan, ropt);
    CHECK(rbc.value == doctest::Approx(rr.value + border_term(*g, spots)).epsilon(1e-13));
}

TEST_CASE("flags: negative value, avar zero, near-singular") {
    // constant path: all increments zero, spots all zero
    ObservationGrid flat(1, 0.1, std::vector<double>(51, 3.0));
    TuningPlan plan;
    plan.trunc_exponent.reset();
    EstimateOptions opt;
    opt.kind = EstimatorKind::Raw;
    EstimateReport r = estimate(*make_power(2.0), flat, plan, opt);
    CHECK(r.value == 0.0);
    CHECK(r.avar == 0.0);
    CHECK(r.has_flag(kFlagAvarZero));
    CHECK_FALSE(r.ci.defined);

    // the corrected estimator can undershoot zero when the curvature term
    // dominates; nonnegative g then gets the negative-value flag
    auto g2 = make_power(2.0);
    EstimateOptions copt;
    copt.kind = EstimatorKind::CorrectedOverlapping;

    SpotSeries boundary = series1({1.0}, 2, 1.0); // 1 - 4/(2*2) = 0 exactly
    SpotContext bctx;
    bctx.spots = &boundary;
    EstimateReport rzero = estimate_with_context(*g2, flat, bctx, copt);
    CHECK(rzero.value == 0.0);
    CHECK_FALSE(rzero.has_flag(kFlagNegativeValue));

    SpotSeries under = series1({1.0}, 2, 1.0);
    SpotContext uctx;
    uctx.spots = &under;
    auto g3 = make_power(3.0); // Q = 12 c^3: 1 - 12/4 = -2 < 0
    EstimateReport rneg = estimate_with_context(*g3, flat, uctx, copt);
    CHECK(rneg.value == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(rneg.has_flag(kFlagNegativeValue));

    // near-singular flag for non-integer power on an almost-singular series
    SpotSeries tiny = series1({1.0, 1e-9, 1.0}, 3, 0.1);
    SpotContext tctx;
    tctx.spots = &tiny;
    EstimateOptions topt;
    topt.kind = EstimatorKind::Raw;
    EstimateReport rt = estimate_with_context(*make_power(2.5), flat, tctx, topt);
    CHECK(rt.has_flag(kFlagNearSingular));
    EstimateReport rs = estimate_with_context(*make_power(2.0), flat, tctx, topt);
    CHECK_FALSE(rs.has_flag(kFlagNearSingular));
}

TEST_CASE("report serialization") {
    EstimateReport r;
    r.kind = EstimatorKind::CorrectedOverlapping;
    r.function = "power:p=2";
    r.n = 100;
    r.mesh = 0.01;
    r.horizon = 1.0;
    r.window = 10;
    r.truncation = 0.5;
    r.truncated_fraction = 0.25;
    r.value = 1.0 / 3.0;
    r.avar = 4.0;
    r.ci_level = 0.95;
    r.ci = confidence_interval(r.value, r.avar, r.mesh, r.ci_level);
    r.flags.push_back(kFlagHighTruncation);

    std::ostringstream kv;
    write_report_kv(r, kv);
    std::string text = kv.str();
    CHECK(text.find("estimator=corrected_overlapping\n") != std::string::npos);
    CHECK(text.find("function=power:p=2\n") != std::string::npos);
    CHECK(text.find("ci_low=") != std::string::npos);
    CHECK(text.find("flags=high_truncation_fraction") != std::string::npos);

    // 17 significant digits round trip
    std::size_t pos = text.find("value=");
    REQUIRE(pos != std::string::npos);
    double back = std::strtod(text.c_str() + pos + 6, nullptr);
    CHECK(back == r.value);

    // undefined CI renders as a sentinel, and the CSV leaves the cells empty
    r.avar = 0.0;
    r.ci = confidence_interval(r.value, r.avar, r.mesh, r.ci_level);
    std::ostringstream kv2;
    write_report_kv(r, kv2);
    CHECK(kv2.str().find("ci=undefined") != std::string::npos);

    std::ostringstream csv;
    write_report_csv_header(csv);
    write_report_csv_row(r, csv);
    std::string line = csv.str();
    std::size_t header_cols = std::count(line.begin(), line.begin() + static_cast<long>(line.find('\n')), ',');
    std::size_t row_cols = std::count(line.begin() + static_cast<long>(line.find('\n')), line.end(), ',');
    CHECK(header_cols == row_cols);
}

TEST_CASE("estimate dimension mismatch") {
    ObservationGrid g2(2, 1.0,
                       {0.0, 0.0, 1.0, 1.0, 2.0, 0.0, 2.5, 1.0, 3.0, 0.5, 2.0, 1.5});
    TuningPlan plan;
    plan.trunc_exponent.reset();
    CHECK_THROWS_AS(estimate(*make_power(2.0), g2, plan, {}), ConfigError);
    EstimateOptions opt;
    opt.kind = EstimatorKind::BaselineMoment;
    CHECK_THROWS_AS(estimate(*make_trace_power(2, 2), g2, plan, opt), ConfigError);
}
