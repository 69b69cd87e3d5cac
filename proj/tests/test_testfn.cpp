#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "volfn/errors.hpp"
#include "volfn/rng.hpp"
#include "volfn/testfn.hpp"

using namespace volfn;

namespace {

SymMatrix random_psd(RngStream& rng, int d, double lo, double hi) {
    std::vector<double> q(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) q[static_cast<std::size_t>(i) * d + i] = 1.0;
    for (int round = 0; round < 3; ++round)
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                double ang = 6.283185307179586 * rng.next_uniform();
                double c = std::cos(ang), s = std::sin(ang);
                for (int r = 0; r < d; ++r) {
                    double qa = q[static_cast<std::size_t>(r) * d + a];
                    double qb = q[static_cast<std::size_t>(r) * d + b];
                    q[static_cast<std::size_t>(r) * d + a] = c * qa - s * qb;
                    q[static_cast<std::size_t>(r) * d + b] = s * qa + c * qb;
                }
            }
    std::vector<double> lam(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) lam[static_cast<std::size_t>(i)] = lo + (hi - lo) * rng.next_uniform();
    SymMatrix x(d);
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
            double v = 0.0;
            for (int i = 0; i < d; ++i)
                v += q[static_cast<std::size_t>(j) * d + i] * lam[static_cast<std::size_t>(i)] *
                     q[static_cast<std::size_t>(k) * d + i];
            x.set(j, k, v);
        }
    return x;
}

// All built-ins at a given dimension, for property sweeps.
std::vector<std::unique_ptr<TestFunction>> builtins(int d) {
    std::vector<std::unique_ptr<TestFunction>> out;
    out.push_back(make_identity_component(d, 0, 0));
    if (d >= 2) out.push_back(make_identity_component(d, 0, 1));
    if (d == 1) {
        out.push_back(make_power(1.0));
        out.push_back(make_power(2.0));
        out.push_back(make_power(3.0));
    }
    out.push_back(make_trace_power(d, 1));
    out.push_back(make_trace_power(d, 2));
    out.push_back(make_trace_power(d, 3));
    out.push_back(make_entry_product(d, 0, 0, 0, 0));
    if (d >= 2) {
        out.push_back(make_entry_product(d, 0, 1, 0, 1));
        out.push_back(make_entry_product(d, 0, 0, 1, 1));
        if (d >= 3) out.push_back(make_entry_product(d, 0, 1, 1, 2));
    }
    return out;
}

} // namespace

TEST_CASE("power function: closed-form values and derivatives") {
    auto g = make_power(2.0);
    SymMatrix x(1);
    x.set(0, 0, 3.0);
    CHECK(g->eval(x) == 9.0);
    EvalResult r = eval_with_derivatives(*g, x);
    CHECK(r.value == 9.0);
    CHECK(r.grad(0, 0) == 6.0);
    CHECK(r.hess(0, 0, 0, 0) == 2.0);
    // correction kernel Q(x) = 2 p (p-1) x^p: at p=2, x=3 -> 4 * 9 = 36
    CHECK(g->correction_kernel(x) == doctest::Approx(36.0).epsilon(1e-14));
    CHECK(g->growth_order() == 2.0);
    CHECK(g->nonnegative());
    CHECK(g->smooth_on_boundary());

    auto g3 = make_power(3.0);
    CHECK(check_derivatives(*g3, x) < 1e-8);
    CHECK(g3->correction_kernel(x) == doctest::Approx(2.0 * 3.0 * 2.0 * 27.0).epsilon(1e-14));

    // non-integer p: boundary-flagged, negative arguments rejected
    auto gh = make_power(1.5);
    CHECK_FALSE(gh->smooth_on_boundary());
    CHECK(gh->eval(x) == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-14));
    SymMatrix bad(1);
    bad.set(0, 0, -1.0);
    CHECK_THROWS_AS(gh->eval(bad), NumericError);
    CHECK(check_derivatives(*gh, x) < 1e-6);
    CHECK(make_power(1.0)->smooth_on_boundary());
    CHECK_FALSE(make_power(2.5)->smooth_on_boundary());
    CHECK(make_power(3.0)->smooth_on_boundary());
}

TEST_CASE("identity component: linear, zero hessian, zero correction") {
    auto g = make_identity_component(2, 0, 1);
    SymMatrix x(2);
    x.set(0, 0, 1.0);
    x.set(1, 1, 2.0);
    x.set(0, 1, 0.25);
    CHECK(g->eval(x) == 0.25);
    SymMatrix dgrad(2);
    g->grad_into(x, dgrad);
    // Off-diagonal entry: the symmetrized gradient carries weight 1/2 on each
    // of (0,1) and (1,0), so sum_{jk} grad(jk) * E(jk) recovers dg[E].
    CHECK(dgrad(0, 1) == 0.5);
    CHECK(dgrad(0, 0) == 0.0);
    CHECK(g->correction_kernel(x) == 0.0);
    CHECK_FALSE(g->nonnegative());
    CHECK(make_identity_component(2, 1, 1)->nonnegative());
    CHECK(check_derivatives(*g, x) < 1e-10);

    CHECK_THROWS_AS(make_identity_component(2, 0, 2), ConfigError);
}

TEST_CASE("trace power: 2x2 hand oracle") {
    // x = [[1,1],[1,2]]: x^2 = [[2,3],[3,5]], trace = 7.
    auto g = make_trace_power(2, 2);
    SymMatrix x(2);
    x.set(0, 0, 1.0);
    x.set(0, 1, 1.0);
    x.set(1, 1, 2.0);
    CHECK(g->eval(x) == doctest::Approx(7.0).epsilon(1e-14));
    // gradient of trace(x^2) is 2x
    SymMatrix dg(2);
    g->grad_into(x, dg);
    CHECK(dg(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(dg(0, 1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(dg(1, 1) == doctest::Approx(4.0).epsilon(1e-14));

    // correction kernel of trace(x^q):
    //   q * sum_{u=0}^{q-2} [ trace(x^{u+1}) trace(x^{q-1-u}) + trace(x^q) ]
    // q=2: 2 * (trace(x)^2 + trace(x^2)) = 2 * (9 + 7) = 32.
    CHECK(g->correction_kernel(x) == doctest::Approx(32.0).epsilon(1e-13));
    // and at the identity (d=2, q=2): 2 * (4 + 2) = 12.
    CHECK(g->correction_kernel(SymMatrix::identity(2)) == doctest::Approx(12.0).epsilon(1e-14));

    CHECK(g->growth_order() == 2.0);
    CHECK(g->nonnegative());
    CHECK(make_trace_power(2, 3)->nonnegative()); // restricted to PSD arguments
}

TEST_CASE("trace power reduces to power for d = 1") {
    auto tp = make_trace_power(1, 3);
    auto pw = make_power(3.0);
    SymMatrix x(1);
    x.set(0, 0, 1.7);
    CHECK(tp->eval(x) == doctest::Approx(pw->eval(x)).epsilon(1e-14));
    CHECK(tp->correction_kernel(x) == doctest::Approx(pw->correction_kernel(x)).epsilon(1e-13));
    SymMatrix g1(1), g2(1);
    tp->grad_into(x, g1);
    pw->grad_into(x, g2);
    CHECK(g1(0, 0) == doctest::Approx(g2(0, 0)).epsilon(1e-14));
}

TEST_CASE("entry product: quadratic with constant hessian") {
    auto g = make_entry_product(2, 0, 1, 0, 1); // x(0,1)^2
    SymMatrix x(2);
    x.set(0, 0, 2.0);
    x.set(1, 1, 3.0);
    x.set(0, 1, 0.5);
    CHECK(g->eval(x) == 0.25);
    CHECK(g->nonnegative());
    CHECK(check_derivatives(*g, x) < 1e-9);

    auto g2 = make_entry_product(2, 0, 0, 1, 1); // x(0,0) x(1,1)
    CHECK(g2->eval(x) == 6.0);
    CHECK_FALSE(g2->nonnegative());
    CHECK(check_derivatives(*g2, x) < 1e-9);

    // Q for g = x(0,0)^2 equals the power:p=2 value in the (0,0) coordinate
    // only when d = 1; verify against the brute-force contraction instead.
    auto g3 = make_entry_product(2, 0, 0, 0, 0);
    Tensor4 h = g3->hess(x);
    CHECK(g3->correction_kernel(x) == doctest::Approx(contract_correction(h, x)).epsilon(1e-13));
}

TEST_CASE("avar functional h-bar") {
    // d=1, g=power(1): hbar = 2x^2. g=power(2): hbar = 8x^4.
    SymMatrix x(1);
    x.set(0, 0, 1.5);
    auto p1 = make_power(1.0);
    auto h1 = make_avar_function(*p1);
    CHECK(h1->eval(x) == doctest::Approx(2.0 * std::pow(1.5, 2.0)).epsilon(1e-14));
    auto p2 = make_power(2.0);
    auto h2 = make_avar_function(*p2);
    CHECK(h2->eval(x) == doctest::Approx(8.0 * std::pow(1.5, 4.0)).epsilon(1e-14));
    CHECK(h2->growth_order() == 4.0);
    CHECK(h2->nonnegative());
    CHECK_FALSE(h2->has_hessian());
    SymMatrix dump(1);
    CHECK_THROWS_AS(h2->grad_into(x, dump), NumericError);

    // d=2, g=trace_power(1): hbar(I) = 2 ||I||_F^2 = 4.
    auto t1 = make_trace_power(2, 1);
    auto ht = make_avar_function(*t1);
    CHECK(ht->eval(SymMatrix::identity(2)) == doctest::Approx(4.0).epsilon(1e-14));

    // realized-covariance entry: g = x(0,1) has hbar = x(0,1)^2 + x(0,0)x(1,1)
    auto gid = make_identity_component(2, 0, 1);
    auto hid = make_avar_function(*gid);
    SymMatrix y(2);
    y.set(0, 0, 2.0);
    y.set(1, 1, 3.0);
    y.set(0, 1, 0.5);
    CHECK(hid->eval(y) == doctest::Approx(0.5 * 0.5 + 2.0 * 3.0).epsilon(1e-14));

    // nonnegativity on random PSD inputs, every builtin, d = 1..3
    RngStream rng(23);
    for (int d = 1; d <= 3; ++d)
        for (const auto& g : builtins(d)) {
            auto hb = make_avar_function(*g);
            for (int trial = 0; trial < 1000; ++trial) {
                SymMatrix z = random_psd(rng, d, 0.05, 8.0);
                CHECK(hb->eval(z) >= 0.0);
            }
        }
}

TEST_CASE("closed forms match the brute-force contraction oracle") {
    RngStream rng(29);
    for (int d = 1; d <= 3; ++d)
        for (const auto& g : builtins(d)) {
            for (int trial = 0; trial < 100; ++trial) {
                SymMatrix x = random_psd(rng, d, 0.1, 5.0);
                Tensor4 h = g->hess(x);
                double brute = contract_correction(h, x);
                double closed = g->correction_kernel(x);
                CHECK(closed == doctest::Approx(brute).epsilon(1e-12));
            }
        }
}

TEST_CASE("finite-difference check of every builtin") {
    RngStream rng(31);
    for (int d = 1; d <= 3; ++d)
        for (const auto& g : builtins(d)) {
            double worst = 0.0;
            for (int trial = 0; trial < 100; ++trial) {
                SymMatrix x = random_psd(rng, d, 0.1, 10.0);
                worst = std::max(worst, check_derivatives(*g, x));
            }
            INFO(g->name(), " d=", d);
            CHECK(worst < 1e-6);
        }
}

TEST_CASE("parser") {
    CHECK(make_test_function("power:p=2", 1)->name() == "power:p=2");
    CHECK(make_test_function("trace_power:q=3", 2)->growth_order() == 3.0);
    CHECK(make_test_function("identity", 2)->eval(SymMatrix::identity(2)) == 1.0);
    CHECK(make_test_function("identity:a=0,b=1", 3)->dim() == 3);
    CHECK(make_test_function("entry_product:a=0,b=1,e=0,f=1", 2)->nonnegative());

    CHECK_THROWS_AS(make_test_function("power:p=2", 2), ConfigError);   // power is d=1 only
    CHECK_THROWS_AS(make_test_function("power", 1), ConfigError);       // p required
    CHECK_THROWS_AS(make_test_function("nope:p=1", 1), ConfigError);
    CHECK_THROWS_AS(make_test_function("trace_power:q=0", 2), ConfigError);
    CHECK_THROWS_AS(make_test_function("identity:a=5,b=0", 2), ConfigError);
}

TEST_CASE("domain guard for boundary-only-smooth functions") {
    auto gh = make_power(2.5);
    SymMatrix zero(1);
    CHECK_THROWS_AS(eval_with_derivatives(*gh, zero), NumericError);
    SymMatrix pos(1);
    pos.set(0, 0, 0.5);
    CHECK(eval_with_derivatives(*gh, pos).value == doctest::Approx(std::pow(0.5, 2.5)));
    // smooth functions evaluate fine at singular arguments
    auto g2 = make_power(2.0);
    CHECK(eval_with_derivatives(*g2, zero).value == 0.0);
}

TEST_CASE("gaussian absolute moments") {
    // 2k-th moments: (2k-1)!! for k = 1..5
    CHECK(gaussian_abs_moment(2.0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(gaussian_abs_moment(4.0) == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(gaussian_abs_moment(6.0) == doctest::Approx(15.0).epsilon(1e-13));
    CHECK(gaussian_abs_moment(8.0) == doctest::Approx(105.0).epsilon(1e-13));
    CHECK(gaussian_abs_moment(12.0) == doctest::Approx(10395.0).epsilon(1e-12));
    // odd q: E|Z| = sqrt(2/pi)
    CHECK(gaussian_abs_moment(1.0) == doctest::Approx(std::sqrt(2.0 / 3.141592653589793)).epsilon(1e-13));
    // quadrature oracle at a non-integer exponent: trapezoid on [0, 12]
    {
        double q = 3.7, s = 0.0;
        const int m = 400000;
        const double hi = 12.0, dz = hi / m;
        for (int i = 0; i <= m; ++i) {
            double z = i * dz;
            double w = (i == 0 || i == m) ? 0.5 : 1.0;
            s += w * 2.0 * std::pow(z, q) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.141592653589793);
        }
        s *= dz;
        CHECK(gaussian_abs_moment(q) == doctest::Approx(s).epsilon(1e-8));
    }
    CHECK_THROWS(gaussian_abs_moment(-1.0));
}
