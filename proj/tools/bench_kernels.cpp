// Micro-benchmark: parallel kernels against their serial reference
// implementations, with an agreement check on every pair.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "volfn/estimators.hpp"
#include "volfn/parallel.hpp"
#include "volfn/sim.hpp"
#include "volfn/spot.hpp"
#include "volfn/testfn.hpp"

using namespace volfn;

namespace {

template <class Fn>
double time_best_ms(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-28s %10.3f ms %10.3f ms  x%5.2f   max|diff| %.3g\n", name, serial_ms,
                parallel_ms, parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, diff);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark: parallel vs serial reference"};
    int n = 200000;
    int d = 2;
    int reps = 3;
    int workers = 0;
    app.add_option("--n", n, "observations");
    app.add_option("--d", d, "dimension");
    app.add_option("--reps", reps, "timing repetitions (best of)");
    app.add_option("--workers", workers, "max worker threads (0 = all)");
    CLI11_PARSE(app, argc, argv);

    set_max_workers(workers);
    std::printf("n=%d d=%d workers=%d (hardware %d)\n\n", n, d,
                workers > 0 ? workers : hardware_workers(), hardware_workers());

    // ---- block_sum ----
    {
        const std::int64_t m = 1 << 22;
        auto term = [](std::int64_t i) {
            double x = 1e-6 * static_cast<double>(i);
            return x / (1.0 + x * x);
        };
        double vs = 0, vp = 0;
        double ts = time_best_ms(reps, [&] { vs = serial::block_sum(m, term); });
        double tp = time_best_ms(reps, [&] { vp = block_sum(m, term); });
        report("block_sum (4M terms)", ts, tp, std::fabs(vs - vp));
    }

    // ---- simulated path for the estimator kernels ----
    ModelSpec model;
    model.kind = ModelSpec::Kind::ConstantVol;
    model.dim = d;
    model.n_obs = n;
    model.euler_substeps = 1;
    model.record_true_spot = false;
    SymMatrix c = SymMatrix::identity(d);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) c.set(j, k, 0.3);
    model.c = c;
    SimulatedPath path = simulate(model, 20240915ULL);
    const ObservationGrid& grid = path.grid;

    TuningPlan plan;
    WindowChoice w = select_window(grid.n(), grid.mesh(), plan);
    TruncationChoice u = select_truncation(grid, plan);
    std::printf("window k=%d truncation u=%g\n\n", w.k, u.u);

    // ---- spot series ----
    SpotSeries rolling, direct;
    {
        double ts = time_best_ms(reps, [&] { direct = serial::spot_estimates(grid, w.k, u.u); });
        double tp = time_best_ms(reps, [&] { rolling = spot_estimates(grid, w.k, u.u); });
        double diff = 0.0;
        for (int i = 0; i < rolling.count(); ++i)
            for (int e = 0; e < d * d; ++e)
                diff = std::max(diff, std::fabs(rolling.at(i)[e] - direct.at(i)[e]));
        report("spot rolling vs serial", ts, tp, diff);

        SpotSeries par;
        double tq = time_best_ms(reps, [&] { par = spot_estimates_direct(grid, w.k, u.u); });
        diff = 0.0;
        for (int i = 0; i < par.count(); ++i)
            for (int e = 0; e < d * d; ++e)
                diff = std::max(diff, std::fabs(par.at(i)[e] - direct.at(i)[e]));
        report("spot direct parallel", ts, tq, diff);
    }

    // ---- estimator sums ----
    auto g = d == 1 ? make_test_function("power:p=2", 1)
                    : make_test_function("trace_power:q=2", d);
    {
        double vs = 0, vp = 0;
        double ts = time_best_ms(reps, [&] { vs = serial::estimate_raw(*g, rolling); });
        double tp = time_best_ms(reps, [&] { vp = estimate_raw(*g, rolling); });
        report("raw sum", ts, tp, std::fabs(vs - vp));
    }
    {
        double vs = 0, vp = 0;
        double ts = time_best_ms(reps, [&] { vs = serial::estimate_corrected_overlapping(*g, rolling); });
        double tp = time_best_ms(reps, [&] { vp = estimate_corrected_overlapping(*g, rolling); });
        report("corrected sum", ts, tp, std::fabs(vs - vp));
    }
    {
        double vs = 0, vp = 0;
        double ts = time_best_ms(reps, [&] { vs = serial::estimate_avar(*g, rolling); });
        double tp = time_best_ms(reps, [&] { vp = estimate_avar(*g, rolling); });
        report("avar sum", ts, tp, std::fabs(vs - vp));
    }
    return 0;
}
