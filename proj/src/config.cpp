#include "volfn/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "volfn/errors.hpp"

namespace volfn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& label) {
    ConfigFile cfg;
    cfg.label = label;
    std::string line;
    int lineno = 0;
    Section* cur = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(label + ":" + std::to_string(lineno) + ": malformed section header");
            std::string name = trim(t.substr(1, t.size() - 2));
            for (const Section& s : cfg.sections)
                if (s.name == name)
                    throw ConfigError(label + ":" + std::to_string(lineno) + ": duplicate section [" +
                                      name + "]");
            cfg.sections.push_back(Section{name, {}, lineno});
            cur = &cfg.sections.back();
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(label + ":" + std::to_string(lineno) +
                              ": expected key = value or [section]");
        if (!cur)
            throw ConfigError(label + ":" + std::to_string(lineno) +
                              ": key outside of any [section]");
        Entry e{trim(t.substr(0, eq)), trim(t.substr(eq + 1)), lineno};
        if (e.key.empty())
            throw ConfigError(label + ":" + std::to_string(lineno) + ": empty key");
        for (const Entry& prev : cur->entries)
            if (prev.key == e.key)
                throw ConfigError(label + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  e.key + "' in [" + cur->name + "]");
        cur->entries.push_back(std::move(e));
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse(in, path);
}

const ConfigFile::Section* ConfigFile::find(const std::string& name) const {
    for (const Section& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

namespace {

struct SectionReader {
    const ConfigFile& cfg;
    const ConfigFile::Section* sec;
    std::set<std::string> used;

    SectionReader(const ConfigFile& c, const std::string& name) : cfg(c), sec(c.find(name)) {}

    bool present() const { return sec != nullptr; }

    const ConfigFile::Entry* entry(const std::string& key) {
        if (!sec) return nullptr;
        used.insert(key);
        for (const auto& e : sec->entries)
            if (e.key == key) return &e;
        return nullptr;
    }

    std::string where(const ConfigFile::Entry& e) const {
        return cfg.label + ":" + std::to_string(e.line);
    }

    std::string str(const std::string& key, const std::string& fallback) {
        const auto* e = entry(key);
        return e ? e->value : fallback;
    }

    double num(const std::string& key, double fallback, bool* found = nullptr) {
        const auto* e = entry(key);
        if (found) *found = e != nullptr;
        if (!e) return fallback;
        char* end = nullptr;
        double v = std::strtod(e->value.c_str(), &end);
        if (end == e->value.c_str() || *trim(end ? end : "").c_str() != '\0')
            throw ConfigError(where(*e) + ": '" + key + "' must be a number, got '" + e->value +
                              "'");
        return v;
    }

    long long integer(const std::string& key, long long fallback) {
        const auto* e = entry(key);
        if (!e) return fallback;
        char* end = nullptr;
        long long v = std::strtoll(e->value.c_str(), &end, 10);
        if (end == e->value.c_str() || *end != '\0')
            throw ConfigError(where(*e) + ": '" + key + "' must be an integer, got '" + e->value +
                              "'");
        return v;
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        const auto* e = entry(key);
        if (!e) return fallback;
        char* end = nullptr;
        unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
        if (end == e->value.c_str() || *end != '\0')
            throw ConfigError(where(*e) + ": '" + key + "' must be a nonnegative integer, got '" +
                              e->value + "'");
        return v;
    }

    bool flag(const std::string& key, bool fallback) {
        const auto* e = entry(key);
        if (!e) return fallback;
        std::string v = e->value;
        std::transform(v.begin(), v.end(), v.begin(), ::tolower);
        if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
        if (v == "off" || v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(where(*e) + ": '" + key + "' must be on/off, got '" + e->value + "'");
    }

    void finish() const {
        if (!sec) return;
        for (const auto& e : sec->entries)
            if (!used.count(e.key))
                throw ConfigError(where(e) + ": unknown key '" + e.key + "' in [" + sec->name +
                                  "]");
    }
};

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

SymMatrix parse_matrix(const std::string& text, int d, const std::string& where) {
    std::vector<std::vector<double>> rows;
    for (const std::string& row_text : split_list(text, ';')) {
        std::istringstream rs(row_text);
        std::vector<double> row;
        double v;
        while (rs >> v) row.push_back(v);
        if (!rs.eof())
            throw ConfigError(where + ": cannot parse matrix row '" + row_text + "'");
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (static_cast<int>(rows.size()) != d)
        throw ConfigError(where + ": expected " + std::to_string(d) + " matrix rows, got " +
                          std::to_string(rows.size()));
    std::vector<double> raw(static_cast<std::size_t>(d) * d);
    for (int r = 0; r < d; ++r) {
        if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != d)
            throw ConfigError(where + ": matrix row " + std::to_string(r + 1) + " has " +
                              std::to_string(rows[static_cast<std::size_t>(r)].size()) +
                              " entries, expected " + std::to_string(d));
        for (int cdx = 0; cdx < d; ++cdx)
            raw[static_cast<std::size_t>(r) * d + cdx] = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(cdx)];
    }
    double asym = 0.0;
    for (int r = 0; r < d; ++r)
        for (int cdx = 0; cdx < d; ++cdx)
            asym = std::max(asym, std::fabs(raw[static_cast<std::size_t>(r) * d + cdx] -
                                            raw[static_cast<std::size_t>(cdx) * d + r]));
    if (asym > 0.0) throw ConfigError(where + ": covariance matrix must be symmetric");
    return symmetrize(raw.data(), d);
}

// Every binder accepts the same universe of sections, so a typo like
// [experment] cannot silently fall back to defaults.
void check_section_names(const ConfigFile& cfg) {
    for (const auto& s : cfg.sections)
        if (s.name != "model" && s.name != "plan" && s.name != "experiment")
            throw ConfigError(cfg.label + ":" + std::to_string(s.line) + ": unknown section [" +
                              s.name + "]");
}

} // namespace

ModelSpec model_from_config(const ConfigFile& cfg) {
    check_section_names(cfg);
    SectionReader r(cfg, "model");
    if (!r.present()) throw ConfigError(cfg.label + ": missing [model] section");
    ModelSpec m;
    std::string kind = r.str("kind", "constant_vol");
    if (kind == "constant_vol")
        m.kind = ModelSpec::Kind::ConstantVol;
    else if (kind == "heston_type")
        m.kind = ModelSpec::Kind::HestonType;
    else if (kind == "custom_cir_vol")
        m.kind = ModelSpec::Kind::CustomCirVol;
    else
        throw ConfigError(cfg.label + ": unknown model kind '" + kind +
                          "' (expected constant_vol, heston_type or custom_cir_vol)");

    m.dim = static_cast<int>(r.integer("dim", 1));
    m.drift = r.num("drift", 0.0);
    m.horizon = r.num("horizon", 1.0);
    m.n_obs = static_cast<int>(r.integer("n", 10000));
    m.euler_substeps = static_cast<int>(r.integer("substeps", 10));

    const auto* centry = r.entry("c");
    if (m.kind == ModelSpec::Kind::ConstantVol) {
        if (centry)
            m.c = parse_matrix(centry->value, m.dim, r.where(*centry));
        else
            m.c = SymMatrix::identity(std::max(1, m.dim));
    } else if (centry) {
        throw ConfigError(r.where(*centry) + ": 'c' only applies to constant_vol models");
    }

    m.cir_kappa = r.num("kappa", m.cir_kappa);
    m.cir_mean = r.num("vbar", m.cir_mean);
    m.cir_xi = r.num("xi", m.cir_xi);
    m.cir_v0 = r.num("v0", m.cir_v0);
    m.cir_rho = r.num("rho", m.cir_rho);
    m.factor_drift = r.num("factor_drift", m.factor_drift);
    m.factor_vol = r.num("factor_vol", m.factor_vol);
    m.factor_y0 = r.num("y0", m.factor_y0);
    m.vol_lo = r.num("vol_lo", m.vol_lo);
    m.vol_hi = r.num("vol_hi", m.vol_hi);

    std::string jumps = r.str("jumps", "none");
    if (jumps != "none") {
        JumpSpec j;
        if (jumps == "gaussian")
            j.dist = JumpSpec::Dist::Gaussian;
        else if (jumps == "two_point")
            j.dist = JumpSpec::Dist::TwoPoint;
        else
            throw ConfigError(cfg.label + ": unknown jump kind '" + jumps +
                              "' (expected none, gaussian or two_point)");
        j.intensity = r.num("jump_intensity", 0.0);
        j.scale = r.num("jump_scale", 0.0);
        m.jumps = j;
    } else {
        // consume the keys so they are not flagged as unknown when present
        r.num("jump_intensity", 0.0);
        r.num("jump_scale", 0.0);
    }
    r.finish();
    m.validate();
    return m;
}

TuningPlan plan_from_config(const ConfigFile& cfg) {
    check_section_names(cfg);
    SectionReader r(cfg, "plan");
    TuningPlan p;
    if (!r.present()) return p;
    p.gamma = r.num("gamma", p.gamma);
    p.window_const = r.num("kappa", p.window_const);
    bool theta_found = false;
    double theta = r.num("theta", 0.0, &theta_found);
    if (theta_found) p.theta = theta;

    bool varpi_found = false;
    double varpi = r.num("varpi", 0.49, &varpi_found);
    p.trunc_exponent = varpi;
    p.trunc_const = r.num("alpha", p.trunc_const);
    std::string trunc = r.str("truncation", "on");
    if (trunc == "none" || trunc == "off") {
        if (varpi_found)
            throw ConfigError(cfg.label + ": truncation=none conflicts with an explicit varpi");
        p.trunc_exponent.reset();
    } else if (trunc != "on") {
        throw ConfigError(cfg.label + ": truncation must be on or none, got '" + trunc + "'");
    }

    std::string scale = r.str("scale", "bipower");
    if (scale == "bipower") {
        p.bipower_scale = true;
    } else if (scale.rfind("fixed:", 0) == 0) {
        p.bipower_scale = false;
        char* end = nullptr;
        p.fixed_scale = std::strtod(scale.c_str() + 6, &end);
        if (end == scale.c_str() + 6 || *end != '\0')
            throw ConfigError(cfg.label + ": cannot parse truncation scale '" + scale + "'");
    } else {
        throw ConfigError(cfg.label + ": truncation scale must be bipower or fixed:<value>");
    }
    r.finish();
    p.validate();
    return p;
}

ExperimentSpec experiment_from_config(const ConfigFile& cfg) {
    ExperimentSpec e;
    e.model = model_from_config(cfg);
    e.plan = plan_from_config(cfg);

    SectionReader r(cfg, "experiment");
    if (r.present()) {
        e.functions = split_list(r.str("functions", ""), ';');
        std::vector<std::string> est_names = split_list(r.str("estimators", ""), ';');
        if (!est_names.empty()) {
            e.estimators.clear();
            for (const std::string& name : est_names)
                e.estimators.push_back(estimator_kind_from_string(name));
        }
        e.replications = static_cast<int>(r.integer("replications", e.replications));
        e.seed = r.u64("seed", e.seed);
        e.ci_level = r.num("ci_level", e.ci_level);
        e.border = r.flag("border", e.border);
        e.workers = static_cast<int>(r.integer("workers", e.workers));
        e.out_dir = r.str("out_dir", e.out_dir);
        std::string meshes = r.str("meshes", "");
        if (!meshes.empty()) {
            std::istringstream ms(meshes);
            std::string tok;
            while (ms >> tok) {
                char* end = nullptr;
                long v = std::strtol(tok.c_str(), &end, 10);
                if (end == tok.c_str() || *end != '\0')
                    throw ConfigError(cfg.label + ": meshes must be a space-separated list of "
                                      "integers, got '" + tok + "'");
                e.meshes.push_back(static_cast<int>(v));
            }
        }
        r.finish();
    }
    if (e.functions.empty())
        throw ConfigError(cfg.label + ": [experiment] must list at least one function");
    e.validate();
    return e;
}

void write_truth_sidecar(const SimulatedPath& path, const std::vector<std::string>& function_names,
                         std::ostream& out) {
    out << "seed=" << path.seed << "\n";
    out << "stream_index=" << path.stream_index << "\n";
    out << "dim=" << path.grid.dim() << "\n";
    out << "n=" << path.grid.n() << "\n";
    out << "mesh=" << num17(path.grid.mesh()) << "\n";
    out << "horizon=" << num17(path.grid.horizon()) << "\n";
    out << "fine_mesh=" << num17(path.fine_mesh) << "\n";
    out << "truth_identity_trace=" << num17(path.truth_identity_trace) << "\n";
    out << "truth_count=" << path.truth.size() << "\n";
    for (std::size_t i = 0; i < path.truth.size(); ++i) {
        out << "g" << i << "=" << (i < function_names.size() ? function_names[i] : path.truth[i].first)
            << "\n";
        out << "v" << i << "=" << num17(path.truth[i].second) << "\n";
    }
    out << "jump_count=" << path.jump_times.size() << "\n";
    for (std::size_t j = 0; j < path.jump_times.size(); ++j) {
        out << "jump_time_" << j << "=" << num17(path.jump_times[j]) << "\n";
        out << "jump_size_" << j << "=";
        for (std::size_t cdx = 0; cdx < path.jump_sizes[j].size(); ++cdx) {
            if (cdx) out << ' ';
            out << num17(path.jump_sizes[j][cdx]);
        }
        out << "\n";
    }
}

} // namespace volfn
