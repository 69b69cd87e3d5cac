#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volfn/grid.hpp"
#include "volfn/symmat.hpp"
#include "volfn/testfn.hpp"

namespace volfn {

struct JumpSpec {
    enum class Dist { Gaussian, TwoPoint };
    double intensity = 0.0; // events per unit time
    Dist dist = Dist::Gaussian;
    double scale = 0.0; // Gaussian sd, or |size| for the two-point +-size law
};

// Model classes covered by the estimation theory:
//  constant_vol     dX = a dt + L dW with L L^T = c (any dim, c PSD)
//  heston_type      d = 1. Markov factor vol: dY = yb dt + ys dWb,
//                   sigma(Y) = vol_lo + (vol_hi - vol_lo) / (1 + exp(-Y)),
//                   dX = a dt + sigma(Y) dW; W and Wb independent. Smooth,
//                   bounded volatility, bounded away from zero.
//  custom_cir_vol   square-root variance: dv = kappa (vbar - v) dt
//                   + xi sqrt(v) dWb. d = 1 uses c = v. d = 2 runs two
//                   independent copies v1, v2 and correlates the price
//                   Brownians with a fixed Cholesky factor, giving
//                   c = [[v1, rho sqrt(v1 v2)], [rho sqrt(v1 v2), v2]].
// Optional finite-activity jumps (compound Poisson) are added on top of X.
struct ModelSpec {
    enum class Kind { ConstantVol, HestonType, CustomCirVol };
    Kind kind = Kind::ConstantVol;
    int dim = 1;
    double drift = 0.0; // a, applied to every price component

    SymMatrix c; // constant_vol covariance (defaults to identity)

    double cir_kappa = 2.0;
    double cir_mean = 1.0; // vbar
    double cir_xi = 0.5;
    double cir_v0 = 1.0;
    double cir_rho = 0.0; // d = 2 cross-correlation

    double factor_drift = 0.0; // yb
    double factor_vol = 1.0;   // ys
    double factor_y0 = 0.0;
    double vol_lo = 0.5;
    double vol_hi = 1.5;

    std::optional<JumpSpec> jumps;

    double horizon = 1.0;
    int n_obs = 10000;
    int euler_substeps = 10;

    bool record_true_spot = true; // MC turns this off to save memory

    void validate() const; // ConfigError on bad values
    std::string kind_name() const;
};

struct SimulatedPath {
    ObservationGrid grid;            // observed path (jumps included)
    ObservationGrid grid_continuous; // same Brownian path with jumps stripped
    bool has_jumps = false;
    std::vector<double> jump_times;
    std::vector<std::vector<double>> jump_sizes; // one d-vector per event

    // Ground truth accumulated on the fine grid (left-point Riemann sums).
    std::vector<std::pair<std::string, double>> truth; // per requested function
    double truth_identity_trace = 0.0;                 // integral of trace(c)

    // Spot covariance at each fine step (row-major d*d per step), present
    // when spec.record_true_spot.
    std::vector<double> true_spot;
    double fine_mesh = 0.0;

    std::uint64_t seed = 0;
    std::uint64_t stream_index = 0;

    double truth_for(const std::string& fname) const;
};

// Pure function of (spec, seed, stream_index): same arguments, same path,
// regardless of platform or thread. Functionals passed in get their exact
// V(g) along the path accumulated into truth.
SimulatedPath simulate(const ModelSpec& spec, std::uint64_t seed,
                       const std::vector<const TestFunction*>& functionals = {},
                       std::uint64_t stream_index = 0);

} // namespace volfn
