// Command line front end: simulate paths, estimate functionals on CSV data,
// run Monte Carlo studies, compare against the classical baseline.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "volfn/config.hpp"
#include "volfn/errors.hpp"
#include "volfn/estimators.hpp"
#include "volfn/mc.hpp"
#include "volfn/parallel.hpp"
#include "volfn/sim.hpp"

namespace fs = std::filesystem;
using namespace volfn;

namespace {

std::vector<std::string> split_semis(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::size_t b = cur.find_first_not_of(" \t");
        if (b != std::string::npos) {
            std::size_t e = cur.find_last_not_of(" \t");
            out.push_back(cur.substr(b, e - b + 1));
        }
        cur.clear();
    };
    for (char ch : s) {
        if (ch == ';')
            flush();
        else
            cur += ch;
    }
    flush();
    return out;
}

// Known [experiment] keys, shared with the config binder; the lightweight
// readers below (simulate/estimate do not need a full ExperimentSpec) still
// reject typos.
const std::set<std::string>& experiment_keys() {
    static const std::set<std::string> keys = {"functions", "estimators", "replications",
                                               "seed",      "meshes",     "ci_level",
                                               "border",    "workers",    "out_dir"};
    return keys;
}

std::string experiment_value(const ConfigFile& cfg, const std::string& key) {
    const ConfigFile::Section* s = cfg.find("experiment");
    if (!s) return "";
    for (const auto& e : s->entries) {
        if (!experiment_keys().count(e.key))
            throw ConfigError(cfg.label + ":" + std::to_string(e.line) + ": unknown key '" +
                              e.key + "' in [experiment]");
        if (e.key == key) return e.value;
    }
    return "";
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError(what + " must be a nonnegative integer, got '" + s + "'");
    return v;
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot open output file '" + p.string() + "'");
    body(out);
    out.flush();
    if (!out) throw DataError("failed while writing '" + p.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create output directory '" + p.string() + "': " + ec.message());
    return p;
}

// The admissible truncation exponent depends on the growth p of g and the
// jump activity r through the lower bound (2p - 1) / (2 (2p - r)). r is not
// observable, so check against the worst case r = 1 and warn (once) rather
// than fail.
void warn_truncation_exponent(const TuningPlan& plan,
                              const std::vector<const TestFunction*>& fns) {
    static bool warned = false;
    if (warned || !plan.trunc_exponent || fns.empty()) return;
    double p = 1.0;
    for (const TestFunction* f : fns) p = std::max(p, f->growth_order());
    const double worst_r = 1.0;
    const double bound = (2.0 * p - 1.0) / (2.0 * (2.0 * p - worst_r));
    if (*plan.trunc_exponent < bound) {
        std::fprintf(stderr,
                     "warning: truncation exponent varpi=%g is below the admissibility bound "
                     "(2p-1)/(2(2p-r)) = %g for growth p=%g at worst-case jump activity r=1; "
                     "with active jumps of near-unit activity the truncation may not remove all "
                     "jump bias\n",
                     *plan.trunc_exponent, bound, p);
        warned = true;
    }
}

struct PlanFlags {
    CLI::Option* gamma = nullptr;
    CLI::Option* kappa = nullptr;
    CLI::Option* varpi = nullptr;
    CLI::Option* alpha = nullptr;
    CLI::Option* theta = nullptr;
    CLI::Option* no_trunc = nullptr;
    double gamma_v = 0.0, kappa_v = 0.0, varpi_v = 0.0, alpha_v = 0.0, theta_v = 0.0;
    bool no_trunc_v = false;

    void add_to(CLI::App* cmd) {
        gamma = cmd->add_option("--gamma", gamma_v, "window exponent, in (1/3, 1/2)");
        kappa = cmd->add_option("--kappa", kappa_v, "window constant: k = ceil(kappa * n^gamma)");
        varpi = cmd->add_option("--varpi", varpi_v, "truncation exponent, in (0, 1/2)");
        alpha = cmd->add_option("--alpha", alpha_v, "truncation multiplier");
        theta = cmd->add_option("--theta", theta_v,
                                "fixed-theta window k = ceil(theta / sqrt(mesh)); also reports "
                                "the window bias terms");
        no_trunc = cmd->add_flag("--no-truncation", no_trunc_v,
                                 "disable jump truncation (continuous-path data)");
    }

    void apply(TuningPlan& plan) const {
        if (gamma->count()) plan.gamma = gamma_v;
        if (kappa->count()) plan.window_const = kappa_v;
        if (varpi->count()) plan.trunc_exponent = varpi_v;
        if (alpha->count()) plan.trunc_const = alpha_v;
        if (theta->count()) plan.theta = theta_v;
        if (no_trunc_v) plan.trunc_exponent.reset();
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Integrated volatility functionals: estimation on high-frequency data, "
                 "simulation, Monte Carlo verification"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir;
    std::uint64_t seed = 0;
    int workers = 0;
    double ci_level = 0.95;
    std::vector<std::string> fn_specs, est_names;
    bool border = false;
    PlanFlags plan_flags;

    CLI::App* csim = app.add_subcommand(
        "simulate", "simulate a model path; writes path.csv and a truth sidecar");
    csim->add_option("--config", config_path, "config with a [model] section")->required();
    CLI::Option* sim_seed = csim->add_option("--seed", seed, "rng seed (overrides config)");
    CLI::Option* sim_out = csim->add_option("--out-dir", out_dir, "output directory");
    csim->add_option("--function", fn_specs,
                     "function spec whose exact value goes into the sidecar (repeatable)");

    CLI::App* cest = app.add_subcommand(
        "estimate", "estimate integrated functionals from a CSV path (time,X1..Xd)");
    cest->add_option("data", data_path, "input CSV")->required();
    cest->add_option("--config", config_path, "optional config with [plan]/[experiment]");
    CLI::Option* est_fn = cest->add_option("--function", fn_specs,
                                           "function spec, e.g. power:p=2 (repeatable)");
    CLI::Option* est_kind = cest->add_option("--estimator", est_names,
                                             "estimator kind (repeatable): raw, "
                                             "raw_border_corrected, corrected_overlapping, "
                                             "corrected_nonoverlapping, baseline_moment, "
                                             "baseline_quarticity");
    CLI::Option* est_ci = cest->add_option("--ci-level", ci_level, "confidence level in (0, 1)");
    CLI::Option* est_border =
        cest->add_flag("--border", border, "add the border term to the corrected estimators");
    cest->add_option("--workers", workers, "max worker threads (0 = all)");
    plan_flags.add_to(cest);

    auto add_mc_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config")->required();
        CLI::Option* oseed = cmd->add_option("--seed", seed, "rng seed (overrides config)");
        CLI::Option* oworkers = cmd->add_option("--workers", workers, "max worker threads");
        CLI::Option* oout = cmd->add_option("--out-dir", out_dir, "output directory");
        CLI::Option* oci = cmd->add_option("--ci-level", ci_level, "confidence level");
        CLI::Option* ofn = cmd->add_option("--function", fn_specs, "override function list");
        CLI::Option* okind = cmd->add_option("--estimator", est_names, "override estimator list");
        CLI::Option* oborder = cmd->add_flag("--border", border, "border-correct the estimates");
        return std::vector<CLI::Option*>{oseed, oworkers, oout, oci, ofn, okind, oborder};
    };

    CLI::App* cmc = app.add_subcommand(
        "mc", "Monte Carlo study; writes summary.csv and replications.csv");
    auto mc_opts = add_mc_flags(cmc);
    PlanFlags mc_plan_flags;
    mc_plan_flags.add_to(cmc);

    CLI::App* ccmp = app.add_subcommand(
        "compare", "variance comparison against the classical moment baseline");
    auto cmp_opts = add_mc_flags(ccmp);
    PlanFlags cmp_plan_flags;
    cmp_plan_flags.add_to(ccmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(csim)) {
            ConfigFile cfg = ConfigFile::parse_file(config_path);
            ModelSpec model = model_from_config(cfg);

            std::uint64_t s = 1;
            std::string cfg_seed = experiment_value(cfg, "seed");
            if (!cfg_seed.empty()) s = parse_u64(cfg_seed, "seed");
            if (sim_seed->count()) s = seed;

            std::vector<std::string> names = fn_specs;
            if (names.empty()) names = split_semis(experiment_value(cfg, "functions"));
            std::vector<std::unique_ptr<TestFunction>> owned;
            std::vector<const TestFunction*> fns;
            for (const std::string& f : names) {
                owned.push_back(make_test_function(f, model.dim));
                fns.push_back(owned.back().get());
            }

            std::string dir = sim_out->count() ? out_dir : experiment_value(cfg, "out_dir");
            fs::path out = prepare_out_dir(dir);

            SimulatedPath path = simulate(model, s, fns);
            write_file(out / "path.csv", [&](std::ostream& o) { write_grid_csv(path.grid, o); });
            std::cout << "wrote " << (out / "path.csv").string() << "\n";
            if (path.has_jumps) {
                write_file(out / "path_continuous.csv",
                           [&](std::ostream& o) { write_grid_csv(path.grid_continuous, o); });
                std::cout << "wrote " << (out / "path_continuous.csv").string() << "\n";
            }
            write_file(out / "truth.txt",
                       [&](std::ostream& o) { write_truth_sidecar(path, names, o); });
            std::cout << "wrote " << (out / "truth.txt").string() << "\n";
            return 0;
        }

        if (app.got_subcommand(cest)) {
            set_max_workers(workers);
            std::unique_ptr<ConfigFile> cfg;
            if (!config_path.empty())
                cfg = std::make_unique<ConfigFile>(ConfigFile::parse_file(config_path));

            TuningPlan plan;
            if (cfg) plan = plan_from_config(*cfg);
            plan_flags.apply(plan);
            plan.validate();

            ObservationGrid grid = read_grid_csv(data_path);

            std::vector<std::string> names = fn_specs;
            if (names.empty() && cfg) names = split_semis(experiment_value(*cfg, "functions"));
            if (names.empty())
                throw ConfigError("no test function given (use --function or a config with "
                                  "[experiment] functions)");
            std::vector<std::unique_ptr<TestFunction>> owned;
            std::vector<const TestFunction*> fns;
            for (const std::string& f : names) {
                owned.push_back(make_test_function(f, grid.dim()));
                fns.push_back(owned.back().get());
            }

            std::vector<std::string> kinds = est_names;
            if (kinds.empty() && cfg) kinds = split_semis(experiment_value(*cfg, "estimators"));
            if (kinds.empty()) kinds.push_back("corrected_overlapping");

            EstimateOptions opt;
            if (!est_ci->count() && cfg) {
                std::string v = experiment_value(*cfg, "ci_level");
                if (!v.empty()) ci_level = std::strtod(v.c_str(), nullptr);
            }
            opt.ci_level = ci_level;
            opt.border = border;
            if (!est_border->count() && cfg) {
                std::string v = experiment_value(*cfg, "border");
                if (v == "on" || v == "true" || v == "1" || v == "yes") opt.border = true;
            }

            warn_truncation_exponent(plan, fns);

            bool first = true;
            for (const TestFunction* g : fns)
                for (const std::string& kname : kinds) {
                    opt.kind = estimator_kind_from_string(kname);
                    EstimateReport rep = estimate(*g, grid, plan, opt);
                    if (!first) std::cout << "\n";
                    first = false;
                    write_report_kv(rep, std::cout);
                }
            return 0;
        }

        CLI::App* cmd = app.got_subcommand(cmc) ? cmc : ccmp;
        const bool is_compare = cmd == ccmp;
        const auto& opts = is_compare ? cmp_opts : mc_opts;
        const PlanFlags& pflags = is_compare ? cmp_plan_flags : mc_plan_flags;

        ConfigFile cfg = ConfigFile::parse_file(config_path);
        ExperimentSpec spec = experiment_from_config(cfg);
        if (opts[0]->count()) spec.seed = seed;
        if (opts[1]->count()) spec.workers = workers;
        if (opts[2]->count()) spec.out_dir = out_dir;
        if (opts[3]->count()) spec.ci_level = ci_level;
        if (opts[4]->count()) spec.functions = fn_specs;
        if (opts[5]->count()) {
            spec.estimators.clear();
            for (const std::string& k : est_names)
                spec.estimators.push_back(estimator_kind_from_string(k));
        }
        if (border) spec.border = true;
        pflags.apply(spec.plan);
        spec.validate();

        {
            std::vector<std::unique_ptr<TestFunction>> owned;
            std::vector<const TestFunction*> fns;
            for (const std::string& f : spec.functions) {
                owned.push_back(make_test_function(f, spec.model.dim));
                fns.push_back(owned.back().get());
            }
            warn_truncation_exponent(spec.plan, fns);
        }

        fs::path out = prepare_out_dir(spec.out_dir);
        if (is_compare) {
            CompareResult res = run_compare(spec);
            write_file(out / "compare.csv", [&](std::ostream& o) { write_compare_csv(res, o); });
            write_file(out / "summary.csv",
                       [&](std::ostream& o) { write_mc_summary_csv(res.mc, o); });
            write_file(out / "replications.csv",
                       [&](std::ostream& o) { write_mc_reps_csv(res.mc, o); });
            std::cerr << "wrote " << (out / "compare.csv").string() << ", "
                      << (out / "summary.csv").string() << ", "
                      << (out / "replications.csv").string() << "\n";
            write_compare_csv(res, std::cout);
        } else {
            McResult res = run_mc(spec);
            write_file(out / "summary.csv", [&](std::ostream& o) { write_mc_summary_csv(res, o); });
            write_file(out / "replications.csv",
                       [&](std::ostream& o) { write_mc_reps_csv(res, o); });
            std::cerr << "wrote " << (out / "summary.csv").string() << ", "
                      << (out / "replications.csv").string() << "\n";
            write_mc_summary_csv(res, std::cout);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
