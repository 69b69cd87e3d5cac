#include "volfn/testfn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <utility>
#include <vector>

#include "volfn/errors.hpp"

namespace volfn {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Weight of an ordered index pair in the symmetrized-gradient convention:
// off-diagonal coordinates always move in pairs, so their partials carry 1/2.
double pair_weight(int j, int k) { return j == k ? 1.0 : 0.5; }

bool canonical_quad(int j, int k, int l, int m) {
    if (j > k || l > m) return false;
    return j < l || (j == l && k <= m);
}

void require_dim(const TestFunction& g, const SymMatrix& x) {
    if (x.dim() != g.dim())
        throw std::invalid_argument(g.name() + ": expected dimension " + std::to_string(g.dim()) +
                                    ", got " + std::to_string(x.dim()));
}

} // namespace

double contract_correction(const Tensor4& h, const SymMatrix& x) {
    const int d = x.dim();
    double s = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m)
                    s += h(j, k, l, m) * (x(j, l) * x(k, m) + x(j, m) * x(k, l));
    return s;
}

double TestFunction::correction_kernel(const SymMatrix& x) const {
    static thread_local Tensor4 h;
    if (h.dim() != x.dim()) h = Tensor4(x.dim());
    hess_into(x, h);
    return contract_correction(h, x);
}

SymMatrix TestFunction::grad(const SymMatrix& x) const {
    SymMatrix g(x.dim());
    grad_into(x, g);
    return g;
}

Tensor4 TestFunction::hess(const SymMatrix& x) const {
    Tensor4 h(x.dim());
    hess_into(x, h);
    return h;
}

// ---- identity component ----

namespace {

class IdentityComponent final : public TestFunction {
public:
    IdentityComponent(int d, int a, int b) : d_(d), a_(a), b_(b) {}
    std::string name() const override {
        return "identity:a=" + std::to_string(a_) + ",b=" + std::to_string(b_);
    }
    int dim() const override { return d_; }
    double eval(const SymMatrix& x) const override { return x(a_, b_); }
    void grad_into(const SymMatrix& x, SymMatrix& out) const override {
        require_dim(*this, x);
        out.fill(0.0);
        out.set(a_, b_, pair_weight(a_, b_));
    }
    void hess_into(const SymMatrix& x, Tensor4& out) const override {
        require_dim(*this, x);
        out.fill(0.0);
    }
    double growth_order() const override { return 1.0; }
    bool smooth_on_boundary() const override { return true; }
    bool nonnegative() const override { return a_ == b_; }
    double correction_kernel(const SymMatrix&) const override { return 0.0; }

private:
    int d_, a_, b_;
};

// ---- scalar power (d = 1) ----

class Power final : public TestFunction {
public:
    explicit Power(double p) : p_(p) {}
    std::string name() const override {
        char buf[48];
        std::snprintf(buf, sizeof buf, "power:p=%g", p_);
        return buf;
    }
    int dim() const override { return 1; }

    double eval(const SymMatrix& x) const override { return xp(x(0, 0), p_); }
    void grad_into(const SymMatrix& x, SymMatrix& out) const override {
        require_dim(*this, x);
        out.set(0, 0, p_ * xp(x(0, 0), p_ - 1.0));
    }
    void hess_into(const SymMatrix& x, Tensor4& out) const override {
        require_dim(*this, x);
        double c2 = p_ * (p_ - 1.0);
        out.set_sym(0, 0, 0, 0, c2 == 0.0 ? 0.0 : c2 * xp(x(0, 0), p_ - 2.0));
    }
    double growth_order() const override { return p_; }
    bool smooth_on_boundary() const override {
        // x^p extends C3 to x = 0 exactly when p is 1, 2 or at least 3.
        return p_ == 1.0 || p_ == 2.0 || p_ >= 3.0;
    }
    bool nonnegative() const override { return true; }
    double correction_kernel(const SymMatrix& x) const override {
        double c2 = p_ * (p_ - 1.0);
        return c2 == 0.0 ? 0.0 : 2.0 * c2 * xp(x(0, 0), p_);
    }

private:
    double xp(double x, double e) const {
        if (x < 0.0 && p_ != std::floor(p_))
            throw NumericError("power: negative argument with non-integer exponent");
        if (e == 0.0) return 1.0;
        if (e == 1.0) return x;
        if (e == 2.0) return x * x;
        return std::pow(x, e);
    }
    double p_;
};

// ---- trace power ----

class TracePower final : public TestFunction {
public:
    TracePower(int d, int q) : d_(d), q_(q) {}
    std::string name() const override { return "trace_power:q=" + std::to_string(q_); }
    int dim() const override { return d_; }

    double eval(const SymMatrix& x) const override {
        if (q_ == 1) return x.trace();
        if (q_ == 2) {
            double f = x.frobenius_norm();
            return f * f;
        }
        const std::vector<double>& p = powers(x);
        return detail::mat_trace_prod(d_, pw(p, q_ - 1), x.data());
    }

    void grad_into(const SymMatrix& x, SymMatrix& out) const override {
        require_dim(*this, x);
        if (q_ == 1) {
            out.fill(0.0);
            for (int j = 0; j < d_; ++j) out.set(j, j, 1.0);
            return;
        }
        if (q_ == 2) {
            out = x;
            out *= 2.0;
            return;
        }
        const std::vector<double>& p = powers(x);
        out.load_from(pw(p, q_ - 1));
        out *= static_cast<double>(q_);
    }

    void hess_into(const SymMatrix& x, Tensor4& out) const override {
        require_dim(*this, x);
        if (q_ == 1) {
            out.fill(0.0);
            return;
        }
        const std::vector<double>& p = powers(x);
        const double scale = 0.25 * q_;
        for (int j = 0; j < d_; ++j)
            for (int k = j; k < d_; ++k)
                for (int l = 0; l < d_; ++l)
                    for (int m = l; m < d_; ++m) {
                        if (!canonical_quad(j, k, l, m)) continue;
                        double s = 0.0;
                        for (int u = 0; u <= q_ - 2; ++u) {
                            const double* pu = pw(p, u);
                            const double* pv = pw(p, q_ - 2 - u);
                            s += pu[j * d_ + l] * pv[k * d_ + m] + pu[j * d_ + m] * pv[k * d_ + l] +
                                 pu[k * d_ + l] * pv[j * d_ + m] + pu[k * d_ + m] * pv[j * d_ + l];
                        }
                        out.set_sym(j, k, l, m, scale * s);
                    }
    }

    double growth_order() const override { return q_; }
    bool smooth_on_boundary() const override { return true; }
    bool nonnegative() const override { return true; }

    double correction_kernel(const SymMatrix& x) const override {
        if (q_ == 1) return 0.0;
        // q * sum_{u+v=q-2} [ trace(x^{u+1}) trace(x^{v+1}) + trace(x^q) ]
        std::vector<double> tr(static_cast<std::size_t>(q_) + 1, 0.0);
        if (q_ == 2) {
            tr[1] = x.trace();
            double f = x.frobenius_norm();
            tr[2] = f * f;
        } else {
            const std::vector<double>& p = powers(x);
            for (int u = 1; u <= q_; ++u) {
                const double* b = pw(p, u);
                double t = 0.0;
                for (int j = 0; j < d_; ++j) t += b[j * d_ + j];
                tr[static_cast<std::size_t>(u)] = t;
            }
        }
        double s = 0.0;
        for (int u = 0; u <= q_ - 2; ++u)
            s += tr[static_cast<std::size_t>(u) + 1] * tr[static_cast<std::size_t>(q_ - 1 - u)] +
                 tr[static_cast<std::size_t>(q_)];
        return q_ * s;
    }

private:
    // Powers x^0..x^q packed consecutively in a thread-local buffer.
    const std::vector<double>& powers(const SymMatrix& x) const {
        static thread_local std::vector<double> buf;
        const std::size_t dd = static_cast<std::size_t>(d_) * d_;
        buf.assign(dd * (static_cast<std::size_t>(q_) + 1), 0.0);
        for (int j = 0; j < d_; ++j) buf[static_cast<std::size_t>(j) * d_ + j] = 1.0;
        for (int u = 1; u <= q_; ++u)
            detail::mat_mul(d_, buf.data() + dd * (u - 1), x.data(), buf.data() + dd * u);
        return buf;
    }
    const double* pw(const std::vector<double>& p, int u) const {
        return p.data() + static_cast<std::size_t>(d_) * d_ * u;
    }
    int d_, q_;
};

// ---- entry product ----

class EntryProduct final : public TestFunction {
public:
    EntryProduct(int d, int a, int b, int e, int f)
        : d_(d), a_(a), b_(b), e_(e), f_(f), s1_(d), s2_(d) {
        s1_.set(a, b, pair_weight(a, b));
        s2_.set(e, f, pair_weight(e, f));
    }
    std::string name() const override {
        return "entry_product:a=" + std::to_string(a_) + ",b=" + std::to_string(b_) +
               ",e=" + std::to_string(e_) + ",f=" + std::to_string(f_);
    }
    int dim() const override { return d_; }
    double eval(const SymMatrix& x) const override { return x(a_, b_) * x(e_, f_); }
    void grad_into(const SymMatrix& x, SymMatrix& out) const override {
        require_dim(*this, x);
        out.fill(0.0);
        out.add_scaled(s1_, x(e_, f_));
        out.add_scaled(s2_, x(a_, b_));
    }
    void hess_into(const SymMatrix& x, Tensor4& out) const override {
        require_dim(*this, x);
        for (int j = 0; j < d_; ++j)
            for (int k = j; k < d_; ++k)
                for (int l = 0; l < d_; ++l)
                    for (int m = l; m < d_; ++m) {
                        if (!canonical_quad(j, k, l, m)) continue;
                        out.set_sym(j, k, l, m, s1_(j, k) * s2_(l, m) + s2_(j, k) * s1_(l, m));
                    }
    }
    double growth_order() const override { return 2.0; }
    bool smooth_on_boundary() const override { return true; }
    bool nonnegative() const override {
        return std::minmax(a_, b_) == std::minmax(e_, f_);
    }
    double correction_kernel(const SymMatrix& x) const override {
        // 4 trace(S1 x S2 x)
        double s = 0.0;
        for (int j = 0; j < d_; ++j)
            for (int k = 0; k < d_; ++k)
                for (int l = 0; l < d_; ++l)
                    for (int m = 0; m < d_; ++m)
                        s += s1_(j, k) * x(k, l) * s2_(l, m) * x(m, j);
        return 4.0 * s;
    }

private:
    int d_, a_, b_, e_, f_;
    SymMatrix s1_, s2_;
};

// ---- asymptotic variance functional ----

class AvarFunction final : public TestFunction {
public:
    explicit AvarFunction(const TestFunction& base) : base_(base) {}
    std::string name() const override { return "avar(" + base_.name() + ")"; }
    int dim() const override { return base_.dim(); }

    double eval(const SymMatrix& x) const override {
        const int d = base_.dim();
        static thread_local SymMatrix grad;
        static thread_local std::vector<double> prod;
        if (grad.dim() != d) grad = SymMatrix(d);
        prod.resize(static_cast<std::size_t>(d) * d);
        base_.grad_into(x, grad);
        detail::mat_mul(d, grad.data(), x.data(), prod.data());
        // 2 trace((D x)(D x))
        return 2.0 * detail::mat_trace_prod(d, prod.data(), prod.data());
    }
    void grad_into(const SymMatrix&, SymMatrix&) const override {
        throw NumericError(name() + ": gradient not available");
    }
    void hess_into(const SymMatrix&, Tensor4&) const override {
        throw NumericError(name() + ": Hessian not available");
    }
    double growth_order() const override { return 2.0 * base_.growth_order(); }
    bool smooth_on_boundary() const override { return base_.smooth_on_boundary(); }
    bool nonnegative() const override { return true; }
    bool has_hessian() const override { return false; }
    double correction_kernel(const SymMatrix&) const override {
        throw NumericError(name() + ": Hessian not available");
    }

private:
    const TestFunction& base_;
};

int require_index(int v, int d, const std::string& what) {
    if (v < 0 || v >= d)
        throw ConfigError("function parameter " + what + "=" + std::to_string(v) +
                          " out of range for dimension " + std::to_string(d));
    return v;
}

} // namespace

std::unique_ptr<TestFunction> make_identity_component(int d, int a, int b) {
    require_index(a, d, "a");
    require_index(b, d, "b");
    return std::make_unique<IdentityComponent>(d, a, b);
}

std::unique_ptr<TestFunction> make_power(double p) {
    if (!(p > 0.0)) throw ConfigError("power: exponent must be positive");
    return std::make_unique<Power>(p);
}

std::unique_ptr<TestFunction> make_trace_power(int d, int q) {
    if (q < 1) throw ConfigError("trace_power: order must be a positive integer");
    return std::make_unique<TracePower>(d, q);
}

std::unique_ptr<TestFunction> make_entry_product(int d, int a, int b, int e, int f) {
    require_index(a, d, "a");
    require_index(b, d, "b");
    require_index(e, d, "e");
    require_index(f, d, "f");
    return std::make_unique<EntryProduct>(d, a, b, e, f);
}

std::unique_ptr<TestFunction> make_avar_function(const TestFunction& g) {
    return std::make_unique<AvarFunction>(g);
}

// ---- parsing ----

namespace {

std::vector<std::pair<std::string, std::string>> parse_params(const std::string& s) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? s.size() : comma + 1;
        if (item.empty()) continue;
        std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("function parameter '" + item + "' is not of the form key=value");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

double param_num(const std::vector<std::pair<std::string, std::string>>& ps, const std::string& key,
                 bool required, double fallback) {
    for (const auto& [k, v] : ps) {
        if (k != key) continue;
        char* end = nullptr;
        double x = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError("function parameter " + key + "='" + v + "' is not a number");
        return x;
    }
    if (required) throw ConfigError("function parameter '" + key + "' is required");
    return fallback;
}

int param_int(const std::vector<std::pair<std::string, std::string>>& ps, const std::string& key,
              bool required, int fallback) {
    double x = param_num(ps, key, required, fallback);
    int i = static_cast<int>(std::llround(x));
    if (x != static_cast<double>(i))
        throw ConfigError("function parameter '" + key + "' must be an integer");
    return i;
}

} // namespace

std::unique_ptr<TestFunction> make_test_function(const std::string& spec, int d) {
    if (d < 1) throw ConfigError("function '" + spec + "': dimension must be >= 1");
    std::size_t colon = spec.find(':');
    std::string fname = spec.substr(0, colon);
    auto ps = parse_params(colon == std::string::npos ? "" : spec.substr(colon + 1));

    if (fname == "identity" || fname == "identity_component")
        return make_identity_component(d, param_int(ps, "a", false, 0), param_int(ps, "b", false, 0));
    if (fname == "power") {
        if (d != 1) throw ConfigError("power is only defined for dimension 1");
        return make_power(param_num(ps, "p", true, 0.0));
    }
    if (fname == "trace_power") return make_trace_power(d, param_int(ps, "q", true, 0));
    if (fname == "entry_product")
        return make_entry_product(d, param_int(ps, "a", true, 0), param_int(ps, "b", true, 0),
                                  param_int(ps, "e", true, 0), param_int(ps, "f", true, 0));
    throw ConfigError("unknown function '" + fname +
                      "' (expected identity, power, trace_power or entry_product)");
}

// ---- evaluation with checks ----

EvalResult eval_with_derivatives(const TestFunction& g, const SymMatrix& x) {
    require_dim(g, x);
    if (!g.smooth_on_boundary() && min_eigenvalue(x) <= 0.0)
        throw NumericError(g.name() +
                           ": argument must be positive definite (function is only smooth on the "
                           "interior of the cone)");
    EvalResult r;
    r.value = g.eval(x);
    r.grad = SymMatrix(x.dim());
    g.grad_into(x, r.grad);
    r.hess = Tensor4(x.dim());
    g.hess_into(x, r.hess);
    if (!std::isfinite(r.value))
        throw NumericError(g.name() + ": evaluation returned a non-finite value");
    return r;
}

double check_derivatives(const TestFunction& g, const SymMatrix& x, double h) {
    const int d = g.dim();
    require_dim(g, x);
    auto gval = [&](const SymMatrix& y) { return g.eval(y); };

    double worst = 0.0;
    auto track = [&](double analytic, double fd) {
        double denom = std::max({1.0, std::fabs(analytic), std::fabs(fd)});
        worst = std::max(worst, std::fabs(analytic - fd) / denom);
    };

    SymMatrix grad = g.grad(x);
    for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) {
            SymMatrix xp = x, xm = x;
            xp.set(j, k, x(j, k) + h);
            xm.set(j, k, x(j, k) - h);
            double w = j == k ? 1.0 : 2.0;
            track(grad(j, k), (gval(xp) - gval(xm)) / (2.0 * h * w));
        }
    }

    if (!g.has_hessian()) return worst;

    // Second differences divide by h^2, so the rounding noise eps|g|/(4h^2)
    // would swamp the gradient-sized step; sqrt(h) balances rounding against
    // truncation for the second-order stencil.
    h = std::sqrt(h);
    Tensor4 hess = g.hess(x);
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = l; m < d; ++m) {
                    if (!(j < l || (j == l && k <= m))) continue;
                    double w1 = j == k ? 1.0 : 2.0;
                    double w2 = l == m ? 1.0 : 2.0;
                    SymMatrix xpp = x, xpm = x, xmp = x, xmm = x;
                    xpp.set(j, k, xpp(j, k) + h);
                    xpp.set(l, m, xpp(l, m) + h);
                    xpm.set(j, k, xpm(j, k) + h);
                    xpm.set(l, m, xpm(l, m) - h);
                    xmp.set(j, k, xmp(j, k) - h);
                    xmp.set(l, m, xmp(l, m) + h);
                    xmm.set(j, k, xmm(j, k) - h);
                    xmm.set(l, m, xmm(l, m) - h);
                    double fd = (gval(xpp) - gval(xpm) - gval(xmp) + gval(xmm)) / (4.0 * h * h * w1 * w2);
                    track(hess(j, k, l, m), fd);
                }
    return worst;
}

double gaussian_abs_moment(double q) {
    if (q < 0.0) throw std::invalid_argument("gaussian_abs_moment: order must be >= 0");
    return std::pow(2.0, 0.5 * q) * std::tgamma(0.5 * (q + 1.0)) / std::sqrt(kPi);
}

} // namespace volfn
