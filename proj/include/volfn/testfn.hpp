#pragma once
#include <memory>
#include <string>

#include "volfn/symmat.hpp"

namespace volfn {

// Scalar functional g of a symmetric positive semidefinite matrix, with
// enough derivative structure for the bias corrections and the plug-in
// asymptotic variance. Entries of the matrix argument are treated as d^2
// formally independent coordinates; because the argument is symmetric, the
// off-diagonal partials always appear through the symmetric combination, and
// the gradient/Hessian returned here are the symmetrized ones
// (grad(j,k) == grad(k,j), Hessian invariant under swaps inside each index
// pair and under pair exchange).
class TestFunction {
public:
    virtual ~TestFunction() = default;

    virtual std::string name() const = 0;
    virtual int dim() const = 0;

    virtual double eval(const SymMatrix& x) const = 0;
    virtual void grad_into(const SymMatrix& x, SymMatrix& out) const = 0;
    virtual void hess_into(const SymMatrix& x, Tensor4& out) const = 0;

    // Polynomial growth order p: |g(x)| <= K (1 + |x|^p).
    virtual double growth_order() const = 0;

    // True when g extends C3-smoothly to the whole PSD cone boundary; when
    // false, evaluation requires a strictly positive definite argument.
    virtual bool smooth_on_boundary() const = 0;

    // True when g >= 0 on its domain (used to flag negative estimates).
    virtual bool nonnegative() const = 0;

    virtual bool has_hessian() const { return true; }

    // Correction kernel sum_{j,k,l,m} H(j,k,l,m) (x(j,l) x(k,m) + x(j,m) x(k,l))
    // with H the symmetrized Hessian. The default contracts hess_into; the
    // built-ins override it with closed forms (tested against the default).
    virtual double correction_kernel(const SymMatrix& x) const;

    SymMatrix grad(const SymMatrix& x) const;
    Tensor4 hess(const SymMatrix& x) const;
};

// Generic contraction of an explicit Hessian tensor, the brute-force route
// kept alongside the closed forms as an oracle.
double contract_correction(const Tensor4& h, const SymMatrix& x);

// ---- built-ins ----

// g(x) = x(a,b).
std::unique_ptr<TestFunction> make_identity_component(int d, int a, int b);

// d = 1, g(x) = x^p for x >= 0 (p > 0, not necessarily integer).
std::unique_ptr<TestFunction> make_power(double p);

// g(x) = trace(x^q), integer q >= 1.
std::unique_ptr<TestFunction> make_trace_power(int d, int q);

// g(x) = x(a,b) * x(e,f).
std::unique_ptr<TestFunction> make_entry_product(int d, int a, int b, int e, int f);

// Asymptotic-variance functional of g:
//   hbar(x) = 2 sum_{j,k,l,m} d_{jk} g(x) d_{lm} g(x) x(j,l) x(k,m)
//           = 2 trace(D x D x) with D the symmetrized gradient.
// Evaluation only; grad/hess are not provided (has_hessian() == false).
// Keeps a reference to g: the base function must outlive the wrapper.
std::unique_ptr<TestFunction> make_avar_function(const TestFunction& g);

// Parse "power:p=2", "trace_power:q=3", "identity:a=0,b=1",
// "entry_product:a=0,b=1,e=0,f=1". dim is the matrix dimension to bind.
std::unique_ptr<TestFunction> make_test_function(const std::string& spec, int d);

// Value plus symmetrized derivatives with domain checks: dimension match,
// finiteness, and strict positive definiteness when !smooth_on_boundary().
struct EvalResult {
    double value = 0.0;
    SymMatrix grad;
    Tensor4 hess;
};
EvalResult eval_with_derivatives(const TestFunction& g, const SymMatrix& x);

// Central finite-difference check of grad and hess at x, perturbing (j,k) and
// (k,j) together (off-diagonal coordinates move in the symmetric pair, which
// is the convention the analytic derivatives use). Returns the worst relative
// error across all gradient and Hessian entries.
double check_derivatives(const TestFunction& g, const SymMatrix& x, double h = 1e-5);

// E|Z|^q for Z standard normal: 2^{q/2} Gamma((q+1)/2) / sqrt(pi).
double gaussian_abs_moment(double q);

} // namespace volfn
