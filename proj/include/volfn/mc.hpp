#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "volfn/estimators.hpp"
#include "volfn/sim.hpp"
#include "volfn/spot.hpp"

namespace volfn {

struct ExperimentSpec {
    ModelSpec model;
    TuningPlan plan;
    std::vector<std::string> functions; // e.g. {"power:p=2"}
    std::vector<EstimatorKind> estimators = {EstimatorKind::CorrectedOverlapping};
    int replications = 100;
    std::uint64_t seed = 1;
    std::vector<int> meshes; // n values for rate studies; empty -> {model.n_obs}
    double ci_level = 0.95;
    bool border = false; // border-correct the corrected estimators too
    int workers = 0;     // 0 = all available
    std::string out_dir = ".";

    void validate() const;
    std::vector<int> effective_meshes() const;
};

// One per-replication estimate row.
struct McRep {
    int mesh_index = 0;
    int n = 0;
    int rep = 0;
    EstimatorKind kind = EstimatorKind::CorrectedOverlapping;
    std::string function;
    bool failed = false;
    std::string failure;
    double value = 0.0;
    double truth = 0.0;
    double error = 0.0;
    double avar = 0.0;
    bool ci_defined = false;
    double ci_lo = 0.0, ci_hi = 0.0;
    bool covered = false;
    std::string flags;
};

// Aggregate over replications for one (estimator, function, mesh).
struct McCell {
    EstimatorKind kind = EstimatorKind::CorrectedOverlapping;
    std::string function;
    int mesh_index = 0;
    int n = 0;
    double mesh = 0.0;
    int replications = 0;
    int failures = 0;
    double mean_error = 0.0;
    double rmse = 0.0;
    double norm_mean = 0.0; // mean of error / sqrt(mesh)
    double norm_var = 0.0;  // sample variance of error / sqrt(mesh)
    double coverage = 0.0;  // fraction of successful reps with truth inside the CI
    double mean_avar = 0.0;
    double negative_frequency = 0.0;
    double wall_seconds = 0.0; // per-mesh wall time (same for all cells of the mesh)
    double slope = 0.0;        // log-log RMSE slope across meshes; NaN if < 2 meshes
};

struct McResult {
    std::vector<McCell> cells;
    std::vector<McRep> reps;

    const McCell& cell(EstimatorKind k, const std::string& function, int mesh_index = 0) const;
};

// Deterministic given spec (including across worker counts): replication r on
// mesh m always uses rng stream index m*R + r, and rows are gathered in index
// order.
McResult run_mc(const ExperimentSpec& spec);

void write_mc_summary_csv(const McResult& r, std::ostream& out);
void write_mc_reps_csv(const McResult& r, std::ostream& out);

// Variance comparison of the corrected estimator against the classical
// moment baseline (d = 1, power functions).
struct CompareRow {
    std::string function;
    int n = 0;
    double mesh = 0.0;
    int replications = 0;
    double var_corrected = 0.0; // MC variance of normalized error, corrected
    double var_baseline = 0.0;  // same for the classical moment estimator
    double ratio = 0.0;         // corrected / baseline
};
struct CompareResult {
    std::vector<CompareRow> rows;
    McResult mc; // underlying per-replication data
};

CompareResult run_compare(const ExperimentSpec& spec);
void write_compare_csv(const CompareResult& r, std::ostream& out);

} // namespace volfn
