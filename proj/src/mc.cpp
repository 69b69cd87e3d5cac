#include "volfn/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "volfn/errors.hpp"
#include "volfn/parallel.hpp"

namespace volfn {

namespace {

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

bool is_baseline(EstimatorKind k) {
    return k == EstimatorKind::BaselineMoment || k == EstimatorKind::BaselineQuarticity;
}

} // namespace

// ---- experiment spec ----

void ExperimentSpec::validate() const {
    model.validate();
    plan.validate();
    if (functions.empty()) throw ConfigError("experiment needs at least one function");
    for (const std::string& f : functions)
        make_test_function(f, model.dim); // throws ConfigError on bad specs
    if (estimators.empty()) throw ConfigError("experiment needs at least one estimator");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    int prev = 0;
    for (int n : meshes) {
        if (n < 3) throw ConfigError("mesh entries must be >= 3 observations");
        if (n <= prev) throw ConfigError("meshes must be strictly increasing");
        prev = n;
    }
}

std::vector<int> ExperimentSpec::effective_meshes() const {
    if (!meshes.empty()) return meshes;
    return {model.n_obs};
}

const McCell& McResult::cell(EstimatorKind k, const std::string& function, int mesh_index) const {
    for (const McCell& c : cells)
        if (c.kind == k && c.function == function && c.mesh_index == mesh_index) return c;
    throw std::out_of_range("no such Monte Carlo cell: " + to_string(k) + " / " + function +
                            " / mesh " + std::to_string(mesh_index));
}

// ---- runner ----

McResult run_mc(const ExperimentSpec& spec) {
    spec.validate();
    set_max_workers(spec.workers);

    const std::vector<int> meshes = spec.effective_meshes();
    const int R = spec.replications;
    const int K = static_cast<int>(spec.estimators.size());
    const int F = static_cast<int>(spec.functions.size());
    const int M = static_cast<int>(meshes.size());

    std::vector<std::unique_ptr<TestFunction>> owned;
    std::vector<const TestFunction*> fns;
    owned.reserve(spec.functions.size());
    for (const std::string& f : spec.functions) {
        owned.push_back(make_test_function(f, spec.model.dim));
        fns.push_back(owned.back().get());
    }

    bool need_spots = false;
    for (EstimatorKind k : spec.estimators)
        if (!is_baseline(k)) need_spots = true;

    McResult result;
    result.reps.assign(static_cast<std::size_t>(M) * R * K * F, McRep{});
    std::vector<double> mesh_wall(static_cast<std::size_t>(M), 0.0);

    for (int mi = 0; mi < M; ++mi) {
        ModelSpec model = spec.model;
        model.n_obs = meshes[static_cast<std::size_t>(mi)];
        model.record_true_spot = false;

        const auto t0 = std::chrono::steady_clock::now();

#pragma omp parallel for schedule(dynamic)
        for (int rep = 0; rep < R; ++rep) {
            const std::size_t row0 =
                (static_cast<std::size_t>(mi) * R + rep) * static_cast<std::size_t>(K) * F;
            auto fail_all = [&](const std::string& why) {
                for (int ki = 0; ki < K; ++ki)
                    for (int fi = 0; fi < F; ++fi) {
                        McRep& row = result.reps[row0 + static_cast<std::size_t>(ki) * F + fi];
                        row.failed = true;
                        row.failure = why;
                    }
            };
            for (int ki = 0; ki < K; ++ki)
                for (int fi = 0; fi < F; ++fi) {
                    McRep& row = result.reps[row0 + static_cast<std::size_t>(ki) * F + fi];
                    row.mesh_index = mi;
                    row.n = model.n_obs;
                    row.rep = rep;
                    row.kind = spec.estimators[static_cast<std::size_t>(ki)];
                    row.function = spec.functions[static_cast<std::size_t>(fi)];
                }

            SpotContext ctx;
            std::unique_ptr<SpotSeries> spots;
            std::unique_ptr<SimulatedPath> path;
            try {
                const std::uint64_t stream =
                    static_cast<std::uint64_t>(mi) * static_cast<std::uint64_t>(R) +
                    static_cast<std::uint64_t>(rep);
                path = std::make_unique<SimulatedPath>(simulate(model, spec.seed, fns, stream));
                if (need_spots) {
                    WindowChoice w = select_window(path->grid.n(), path->grid.mesh(), spec.plan);
                    TruncationChoice u = select_truncation(path->grid, spec.plan);
                    spots = std::make_unique<SpotSeries>(
                        spot_estimates(path->grid, w.k, u.u));
                    ctx.spots = spots.get();
                    ctx.window_clamped = w.clamped;
                }
                ctx.theta = spec.plan.theta;
            } catch (const std::exception& e) {
                fail_all(e.what());
                continue;
            }

            for (int ki = 0; ki < K; ++ki) {
                EstimateOptions opt;
                opt.kind = spec.estimators[static_cast<std::size_t>(ki)];
                opt.ci_level = spec.ci_level;
                opt.border = spec.border;
                for (int fi = 0; fi < F; ++fi) {
                    McRep& row = result.reps[row0 + static_cast<std::size_t>(ki) * F + fi];
                    try {
                        EstimateReport rep_out = estimate_with_context(
                            *fns[static_cast<std::size_t>(fi)], path->grid, ctx, opt);
                        row.value = rep_out.value;
                        row.truth = path->truth[static_cast<std::size_t>(fi)].second;
                        row.error = row.value - row.truth;
                        row.avar = rep_out.avar;
                        row.ci_defined = rep_out.ci.defined;
                        row.ci_lo = rep_out.ci.lo;
                        row.ci_hi = rep_out.ci.hi;
                        row.covered = rep_out.ci.defined && rep_out.ci.lo <= row.truth &&
                                      row.truth <= rep_out.ci.hi;
                        std::string joined;
                        for (const std::string& fl : rep_out.flags) {
                            if (!joined.empty()) joined += ';';
                            joined += fl;
                        }
                        row.flags = joined;
                    } catch (const std::exception& e) {
                        row.failed = true;
                        row.failure = e.what();
                    }
                }
            }
        }

        mesh_wall[static_cast<std::size_t>(mi)] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    // Serial aggregation in fixed (mesh, estimator, function) order.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int mi = 0; mi < M; ++mi) {
        const int n = meshes[static_cast<std::size_t>(mi)];
        const double mesh = spec.model.horizon / n;
        for (int ki = 0; ki < K; ++ki)
            for (int fi = 0; fi < F; ++fi) {
                McCell cell;
                cell.kind = spec.estimators[static_cast<std::size_t>(ki)];
                cell.function = spec.functions[static_cast<std::size_t>(fi)];
                cell.mesh_index = mi;
                cell.n = n;
                cell.mesh = mesh;
                cell.replications = R;
                cell.wall_seconds = mesh_wall[static_cast<std::size_t>(mi)];

                long double sum_err = 0.0L, sum_err2 = 0.0L;
                long double sum_norm = 0.0L, sum_norm2 = 0.0L;
                long double sum_avar = 0.0L;
                int ok = 0, covered = 0, negative = 0;
                for (int rep = 0; rep < R; ++rep) {
                    const McRep& row =
                        result.reps[((static_cast<std::size_t>(mi) * R + rep) * K + ki) *
                                        static_cast<std::size_t>(F) +
                                    fi];
                    if (row.failed) {
                        ++cell.failures;
                        continue;
                    }
                    ++ok;
                    sum_err += row.error;
                    sum_err2 += static_cast<long double>(row.error) * row.error;
                    const double norm = row.error / std::sqrt(mesh);
                    sum_norm += norm;
                    sum_norm2 += static_cast<long double>(norm) * norm;
                    sum_avar += row.avar;
                    if (row.covered) ++covered;
                    if (row.flags.find(kFlagNegativeValue) != std::string::npos) ++negative;
                }
                if (ok > 0) {
                    cell.mean_error = static_cast<double>(sum_err / ok);
                    cell.rmse = std::sqrt(static_cast<double>(sum_err2 / ok));
                    cell.norm_mean = static_cast<double>(sum_norm / ok);
                    cell.mean_avar = static_cast<double>(sum_avar / ok);
                    cell.coverage = static_cast<double>(covered) / ok;
                    cell.negative_frequency = static_cast<double>(negative) / ok;
                } else {
                    cell.mean_error = cell.rmse = cell.norm_mean = cell.mean_avar = nan;
                    cell.coverage = cell.negative_frequency = nan;
                }
                if (ok > 1) {
                    const long double mean = sum_norm / ok;
                    cell.norm_var =
                        static_cast<double>((sum_norm2 - static_cast<long double>(ok) * mean * mean) /
                                            (ok - 1));
                } else {
                    cell.norm_var = nan;
                }
                cell.slope = nan;
                result.cells.push_back(std::move(cell));
            }
    }

    // Convergence slope: regression of log RMSE on log mesh per (estimator,
    // function) across meshes.
    if (M >= 2) {
        for (int ki = 0; ki < K; ++ki)
            for (int fi = 0; fi < F; ++fi) {
                double sx = 0, sy = 0, sxx = 0, sxy = 0;
                int m = 0;
                for (McCell& c : result.cells) {
                    if (c.kind != spec.estimators[static_cast<std::size_t>(ki)] ||
                        c.function != spec.functions[static_cast<std::size_t>(fi)])
                        continue;
                    if (!(c.rmse > 0.0) || !std::isfinite(c.rmse)) continue;
                    const double x = std::log(c.mesh), y = std::log(c.rmse);
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    sxy += x * y;
                    ++m;
                }
                if (m < 2) continue;
                const double denom = m * sxx - sx * sx;
                if (denom == 0.0) continue;
                const double slope = (m * sxy - sx * sy) / denom;
                for (McCell& c : result.cells)
                    if (c.kind == spec.estimators[static_cast<std::size_t>(ki)] &&
                        c.function == spec.functions[static_cast<std::size_t>(fi)])
                        c.slope = slope;
            }
    }
    return result;
}

// ---- serialization ----

void write_mc_summary_csv(const McResult& r, std::ostream& out) {
    out << "estimator,function,n,mesh,replications,failures,mean_error,rmse,norm_mean,norm_var,"
           "coverage,mean_avar,negative_frequency,wall_seconds,slope\n";
    for (const McCell& c : r.cells) {
        out << to_string(c.kind) << ',' << csv_quote(c.function) << ',' << c.n << ','
            << num17(c.mesh) << ',' << c.replications << ',' << c.failures << ','
            << num17(c.mean_error) << ',' << num17(c.rmse) << ',' << num17(c.norm_mean) << ','
            << num17(c.norm_var) << ',' << num17(c.coverage) << ',' << num17(c.mean_avar) << ','
            << num17(c.negative_frequency) << ',' << num17(c.wall_seconds) << ','
            << num17(c.slope) << '\n';
    }
}

void write_mc_reps_csv(const McResult& r, std::ostream& out) {
    out << "mesh_index,n,rep,estimator,function,failed,value,truth,error,avar,ci_defined,ci_lo,"
           "ci_hi,covered,flags,failure\n";
    for (const McRep& row : r.reps) {
        out << row.mesh_index << ',' << row.n << ',' << row.rep << ',' << to_string(row.kind)
            << ',' << csv_quote(row.function) << ',' << (row.failed ? 1 : 0) << ',';
        if (row.failed) {
            out << ",,,,,,,,," << csv_quote(row.failure) << '\n';
            continue;
        }
        out << num17(row.value) << ',' << num17(row.truth) << ',' << num17(row.error) << ','
            << num17(row.avar) << ',' << (row.ci_defined ? 1 : 0) << ',';
        if (row.ci_defined)
            out << num17(row.ci_lo) << ',' << num17(row.ci_hi);
        else
            out << ',';
        out << ',' << (row.covered ? 1 : 0) << ',' << csv_quote(row.flags) << ",\n";
    }
}

// ---- variance comparison against the classical baseline ----

CompareResult run_compare(const ExperimentSpec& spec) {
    if (spec.model.dim != 1)
        throw ConfigError("compare requires a one-dimensional model");
    ExperimentSpec s = spec;
    s.estimators = {EstimatorKind::CorrectedOverlapping, EstimatorKind::BaselineMoment};
    s.validate();

    CompareResult out;
    out.mc = run_mc(s);
    const std::vector<int> meshes = s.effective_meshes();
    for (int mi = 0; mi < static_cast<int>(meshes.size()); ++mi)
        for (const std::string& f : s.functions) {
            const McCell& corr = out.mc.cell(EstimatorKind::CorrectedOverlapping, f, mi);
            const McCell& base = out.mc.cell(EstimatorKind::BaselineMoment, f, mi);
            CompareRow row;
            row.function = f;
            row.n = corr.n;
            row.mesh = corr.mesh;
            row.replications = corr.replications;
            row.var_corrected = corr.norm_var;
            row.var_baseline = base.norm_var;
            row.ratio = base.norm_var != 0.0
                            ? corr.norm_var / base.norm_var
                            : std::numeric_limits<double>::quiet_NaN();
            out.rows.push_back(std::move(row));
        }
    return out;
}

void write_compare_csv(const CompareResult& r, std::ostream& out) {
    out << "function,n,mesh,replications,var_corrected,var_baseline,ratio\n";
    for (const CompareRow& row : r.rows)
        out << csv_quote(row.function) << ',' << row.n << ',' << num17(row.mesh) << ','
            << row.replications << ',' << num17(row.var_corrected) << ','
            << num17(row.var_baseline) << ',' << num17(row.ratio) << '\n';
}

} // namespace volfn
