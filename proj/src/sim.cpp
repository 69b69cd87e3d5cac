#include "volfn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "volfn/errors.hpp"
#include "volfn/rng.hpp"

namespace volfn {

std::string ModelSpec::kind_name() const {
    switch (kind) {
        case Kind::ConstantVol: return "constant_vol";
        case Kind::HestonType: return "heston_type";
        case Kind::CustomCirVol: return "custom_cir_vol";
    }
    return "?";
}

void ModelSpec::validate() const {
    if (dim < 1) throw ConfigError("model: dimension must be >= 1");
    if (!(horizon > 0.0)) throw ConfigError("model: horizon must be positive");
    if (n_obs < 1) throw ConfigError("model: n_obs must be >= 1");
    if (euler_substeps < 1) throw ConfigError("model: euler_substeps must be >= 1");
    switch (kind) {
        case Kind::ConstantVol:
            if (c.dim() != dim)
                throw ConfigError("model: constant_vol covariance must be " + std::to_string(dim) +
                                  "x" + std::to_string(dim));
            if (!is_psd(c)) throw ConfigError("model: constant_vol covariance is not PSD");
            break;
        case Kind::HestonType:
            if (dim != 1) throw ConfigError("model: heston_type requires dimension 1");
            if (!(vol_lo > 0.0) || !(vol_hi >= vol_lo))
                throw ConfigError("model: need 0 < vol_lo <= vol_hi");
            if (!(factor_vol > 0.0)) throw ConfigError("model: factor_vol must be positive");
            break;
        case Kind::CustomCirVol:
            if (dim != 1 && dim != 2)
                throw ConfigError("model: custom_cir_vol supports dimensions 1 and 2");
            if (!(cir_kappa > 0.0) || !(cir_mean > 0.0) || !(cir_xi > 0.0) || !(cir_v0 > 0.0))
                throw ConfigError("model: CIR parameters kappa, vbar, xi, v0 must all be positive");
            if (dim == 2 && !(cir_rho > -1.0 && cir_rho < 1.0))
                throw ConfigError("model: CIR correlation must lie strictly in (-1, 1)");
            break;
    }
    if (jumps) {
        if (!(jumps->intensity > 0.0)) throw ConfigError("model: jump intensity must be positive");
        if (!(jumps->scale > 0.0)) throw ConfigError("model: jump scale must be positive");
    }
}

double SimulatedPath::truth_for(const std::string& fname) const {
    for (const auto& [name, v] : truth)
        if (name == fname) return v;
    throw std::invalid_argument("no recorded truth for function '" + fname + "'");
}

namespace {

double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

} // namespace

SimulatedPath simulate(const ModelSpec& spec, std::uint64_t seed,
                       const std::vector<const TestFunction*>& functionals,
                       std::uint64_t stream_index) {
    spec.validate();
    for (const TestFunction* g : functionals)
        if (g->dim() != spec.dim)
            throw ConfigError("truth function '" + g->name() + "' has dimension " +
                              std::to_string(g->dim()) + ", model has " + std::to_string(spec.dim));

    const int d = spec.dim;
    const int n = spec.n_obs;
    const int sub = spec.euler_substeps;
    const std::int64_t nf = static_cast<std::int64_t>(n) * sub;
    const double mesh = spec.horizon / n;
    const double delta = mesh / sub;
    const double sqdelta = std::sqrt(delta);

    RngStream rng(seed, stream_index);

    SimulatedPath out;
    out.seed = seed;
    out.stream_index = stream_index;
    out.fine_mesh = delta;

    // Jump schedule first (fixed draw order: all gaps, then one size vector
    // per event), so the Brownian draws are unaffected by jump settings only
    // when jumps are absent entirely.
    if (spec.jumps) {
        out.has_jumps = true;
        double t = 0.0;
        for (;;) {
            t += rng.next_exponential(spec.jumps->intensity);
            if (t > spec.horizon) break;
            out.jump_times.push_back(t);
        }
        for (std::size_t e = 0; e < out.jump_times.size(); ++e) {
            std::vector<double> size(static_cast<std::size_t>(d));
            for (int cdx = 0; cdx < d; ++cdx) {
                if (spec.jumps->dist == JumpSpec::Dist::Gaussian)
                    size[static_cast<std::size_t>(cdx)] = spec.jumps->scale * rng.next_normal();
                else
                    size[static_cast<std::size_t>(cdx)] =
                        rng.next_u64() & 1u ? spec.jumps->scale : -spec.jumps->scale;
            }
            out.jump_sizes.push_back(std::move(size));
        }
    }

    // Volatility state.
    SymMatrix cs(d);            // current spot covariance
    std::vector<double> chol;   // current d x d factor L with L L^T = cs
    chol.assign(static_cast<std::size_t>(d) * d, 0.0);
    double v1 = spec.cir_v0, v2 = spec.cir_v0, y = spec.factor_y0;
    const double cir_floor = 1e-12 * std::max(1.0, spec.cir_mean);
    const double rho_c = std::sqrt(1.0 - spec.cir_rho * spec.cir_rho);

    SymMatrix const_chol(d);
    if (spec.kind == ModelSpec::Kind::ConstantVol) const_chol = sym_sqrt(spec.c);

    auto refresh_vol = [&]() {
        switch (spec.kind) {
            case ModelSpec::Kind::ConstantVol:
                cs = spec.c;
                for (int r = 0; r < d; ++r)
                    for (int q = 0; q < d; ++q)
                        chol[static_cast<std::size_t>(r) * d + q] = const_chol(r, q);
                break;
            case ModelSpec::Kind::HestonType: {
                double sig = spec.vol_lo + (spec.vol_hi - spec.vol_lo) * logistic(y);
                cs.set(0, 0, sig * sig);
                chol[0] = sig;
                break;
            }
            case ModelSpec::Kind::CustomCirVol: {
                double s1 = std::sqrt(v1);
                if (d == 1) {
                    cs.set(0, 0, v1);
                    chol[0] = s1;
                } else {
                    double s2 = std::sqrt(v2);
                    cs.set(0, 0, v1);
                    cs.set(1, 1, v2);
                    cs.set(0, 1, spec.cir_rho * s1 * s2);
                    chol[0] = s1;
                    chol[1] = 0.0;
                    chol[2] = spec.cir_rho * s2;
                    chol[3] = rho_c * s2;
                }
                break;
            }
        }
        if (!(cs(0, 0) >= 0.0))
            throw NumericError("internal: volatility guard failed, spot draw not PSD");
    };

    std::vector<double> obs(static_cast<std::size_t>(n + 1) * d, 0.0);
    std::vector<double> obs_cont(static_cast<std::size_t>(n + 1) * d, 0.0);
    std::vector<double> x(static_cast<std::size_t>(d), 0.0);
    std::vector<double> xc(static_cast<std::size_t>(d), 0.0);
    std::vector<double> z(static_cast<std::size_t>(d), 0.0);
    std::vector<long double> acc(functionals.size(), 0.0L);
    long double acc_trace = 0.0L;
    if (spec.record_true_spot)
        out.true_spot.reserve(static_cast<std::size_t>(nf) * d * d);

    std::size_t jptr = 0;
    refresh_vol();

    for (std::int64_t s = 0; s < nf; ++s) {
        // Left-point evaluations at the current spot.
        for (std::size_t f = 0; f < functionals.size(); ++f)
            acc[f] += static_cast<long double>(functionals[f]->eval(cs)) * delta;
        acc_trace += static_cast<long double>(cs.trace()) * delta;
        if (spec.record_true_spot)
            out.true_spot.insert(out.true_spot.end(), cs.data(),
                                 cs.data() + static_cast<std::size_t>(d) * d);

        // Price step.
        for (int cdx = 0; cdx < d; ++cdx) z[static_cast<std::size_t>(cdx)] = rng.next_normal();
        for (int r = 0; r < d; ++r) {
            double diff = 0.0;
            for (int q = 0; q < d; ++q)
                diff += chol[static_cast<std::size_t>(r) * d + q] * z[static_cast<std::size_t>(q)];
            double dx = spec.drift * delta + sqdelta * diff;
            xc[static_cast<std::size_t>(r)] += dx;
            x[static_cast<std::size_t>(r)] += dx;
        }

        // Volatility step (independent Brownian drivers).
        switch (spec.kind) {
            case ModelSpec::Kind::ConstantVol:
                break;
            case ModelSpec::Kind::HestonType:
                y += spec.factor_drift * delta + spec.factor_vol * sqdelta * rng.next_normal();
                refresh_vol();
                break;
            case ModelSpec::Kind::CustomCirVol: {
                double zv = rng.next_normal();
                v1 += spec.cir_kappa * (spec.cir_mean - v1) * delta +
                      spec.cir_xi * std::sqrt(v1) * sqdelta * zv;
                v1 = std::max(v1, cir_floor);
                if (d == 2) {
                    double zv2 = rng.next_normal();
                    v2 += spec.cir_kappa * (spec.cir_mean - v2) * delta +
                          spec.cir_xi * std::sqrt(v2) * sqdelta * zv2;
                    v2 = std::max(v2, cir_floor);
                }
                refresh_vol();
                break;
            }
        }

        // Jumps landing in (s delta, (s+1) delta]; the last step absorbs any
        // event placed at the horizon itself despite rounding of nf*delta.
        double t_next = s + 1 == nf ? spec.horizon : static_cast<double>(s + 1) * delta;
        while (jptr < out.jump_times.size() && out.jump_times[jptr] <= t_next) {
            for (int r = 0; r < d; ++r)
                x[static_cast<std::size_t>(r)] += out.jump_sizes[jptr][static_cast<std::size_t>(r)];
            ++jptr;
        }

        if ((s + 1) % sub == 0) {
            std::int64_t row = (s + 1) / sub;
            for (int r = 0; r < d; ++r) {
                obs[static_cast<std::size_t>(row) * d + r] = x[static_cast<std::size_t>(r)];
                obs_cont[static_cast<std::size_t>(row) * d + r] = xc[static_cast<std::size_t>(r)];
            }
        }
    }

    out.grid = ObservationGrid(d, mesh, std::move(obs));
    out.grid_continuous = ObservationGrid(d, mesh, std::move(obs_cont));
    out.truth.reserve(functionals.size());
    for (std::size_t f = 0; f < functionals.size(); ++f)
        out.truth.emplace_back(functionals[f]->name(), static_cast<double>(acc[f]));
    out.truth_identity_trace = static_cast<double>(acc_trace);
    return out;
}

} // namespace volfn
