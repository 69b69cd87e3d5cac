#include "volfn/symmat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "volfn/errors.hpp"

namespace volfn {

SymMatrix::SymMatrix(int d) : dim_(d) {
    if (d < 1) throw std::invalid_argument("SymMatrix: dimension must be >= 1");
    a_.assign(static_cast<std::size_t>(d) * d, 0.0);
}

SymMatrix SymMatrix::identity(int d) {
    SymMatrix m(d);
    for (int j = 0; j < d; ++j) m.set(j, j, 1.0);
    return m;
}

SymMatrix SymMatrix::diag(const std::vector<double>& v) {
    SymMatrix m(static_cast<int>(v.size()));
    for (int j = 0; j < m.dim(); ++j) m.set(j, j, v[static_cast<std::size_t>(j)]);
    return m;
}

void SymMatrix::fill(double v) { std::fill(a_.begin(), a_.end(), v); }

void SymMatrix::load_from(const double* buf) {
    std::copy(buf, buf + a_.size(), a_.begin());
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    for (double& v : a_) v *= s;
    return *this;
}

void SymMatrix::add_scaled(const SymMatrix& o, double s) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += s * o.a_[i];
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int j = 0; j < dim_; ++j) t += operator()(j, j);
    return t;
}

double SymMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

double SymMatrix::max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::fabs(v));
    return m;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { a += b; return a; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { a -= b; return a; }
SymMatrix operator*(SymMatrix a, double s) { a *= s; return a; }

SymMatrix outer_product_increment(const double* v, int d) {
    SymMatrix m(d);
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) m.set(j, k, v[j] * v[k]);
    return m;
}

SymMatrix symmetrize(const double* m, int d) {
    SymMatrix s(d);
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k)
            s.set(j, k, 0.5 * (m[static_cast<std::size_t>(j) * d + k] +
                               m[static_cast<std::size_t>(k) * d + j]));
    return s;
}

// ---- Jacobi eigensolver ----
//
// Cyclic Jacobi sweeps; fine for the small dimensions this library targets.

std::vector<double> sym_eigenvalues(const SymMatrix& x, std::vector<double>* vectors) {
    const int d = x.dim();
    std::vector<double> a(x.data(), x.data() + static_cast<std::size_t>(d) * d);
    std::vector<double> v;
    if (vectors) {
        v.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j) * d + j] = 1.0;
    }
    auto at = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * d + c]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += at(p, q) * at(p, q);
        if (off <= 1e-300 || std::sqrt(off) <= 1e-15 * (1.0 + x.frobenius_norm())) break;

        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = at(p, q);
                if (apq == 0.0) continue;
                double app = at(p, p), aqq = at(q, q);
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                       : 1.0 / (tau - std::sqrt(1.0 + tau * tau)));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (int r = 0; r < d; ++r) {
                    double arp = at(r, p), arq = at(r, q);
                    at(r, p) = c * arp - s * arq;
                    at(r, q) = s * arp + c * arq;
                }
                for (int r = 0; r < d; ++r) {
                    double apr = at(p, r), aqr = at(q, r);
                    at(p, r) = c * apr - s * aqr;
                    at(q, r) = s * apr + c * aqr;
                }
                if (vectors) {
                    for (int r = 0; r < d; ++r) {
                        double vrp = v[static_cast<std::size_t>(r) * d + p];
                        double vrq = v[static_cast<std::size_t>(r) * d + q];
                        v[static_cast<std::size_t>(r) * d + p] = c * vrp - s * vrq;
                        v[static_cast<std::size_t>(r) * d + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) order[static_cast<std::size_t>(j)] = j;
    std::sort(order.begin(), order.end(), [&](int i, int j) { return at(i, i) < at(j, j); });

    std::vector<double> eig(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) eig[static_cast<std::size_t>(j)] = at(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
    if (vectors) {
        vectors->assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int j = 0; j < d; ++j)
            for (int r = 0; r < d; ++r)
                (*vectors)[static_cast<std::size_t>(r) * d + j] =
                    v[static_cast<std::size_t>(r) * d + order[static_cast<std::size_t>(j)]];
    }
    return eig;
}

double min_eigenvalue(const SymMatrix& x) { return sym_eigenvalues(x).front(); }

double psd_tolerance(const SymMatrix& x) {
    return x.dim() * std::numeric_limits<double>::epsilon() * (1.0 + x.frobenius_norm());
}

bool is_psd(const SymMatrix& x) { return min_eigenvalue(x) >= -psd_tolerance(x); }

SymMatrix sym_sqrt(const SymMatrix& x) {
    const int d = x.dim();
    std::vector<double> vec;
    std::vector<double> eig = sym_eigenvalues(x, &vec);
    double tol = psd_tolerance(x);
    SymMatrix r(d);
    for (int j = 0; j < d; ++j) {
        double e = eig[static_cast<std::size_t>(j)];
        if (e < -tol)
            throw NumericError("sym_sqrt: matrix is not positive semidefinite (min eigenvalue " +
                               std::to_string(e) + ")");
        double s = e > 0.0 ? std::sqrt(e) : 0.0;
        for (int rrow = 0; rrow < d; ++rrow)
            for (int rcol = rrow; rcol < d; ++rcol)
                r.add(rrow, rcol, s * vec[static_cast<std::size_t>(rrow) * d + j] *
                                      vec[static_cast<std::size_t>(rcol) * d + j]);
    }
    return r;
}

// ---- Tensor4 ----

Tensor4::Tensor4(int d) : dim_(d) {
    if (d < 1) throw std::invalid_argument("Tensor4: dimension must be >= 1");
    a_.assign(static_cast<std::size_t>(d) * d * d * d, 0.0);
}

void Tensor4::set_sym(int j, int k, int l, int m, double v) {
    a_[idx(j, k, l, m)] = v;
    a_[idx(k, j, l, m)] = v;
    a_[idx(j, k, m, l)] = v;
    a_[idx(k, j, m, l)] = v;
    a_[idx(l, m, j, k)] = v;
    a_[idx(m, l, j, k)] = v;
    a_[idx(l, m, k, j)] = v;
    a_[idx(m, l, k, j)] = v;
}

void Tensor4::add_sym(int j, int k, int l, int m, double v) {
    set_sym(j, k, l, m, operator()(j, k, l, m) + v);
}

void Tensor4::fill(double v) { std::fill(a_.begin(), a_.end(), v); }

double Tensor4::max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::fabs(v));
    return m;
}

namespace detail {

void mat_mul(int d, const double* a, const double* b, double* out) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k)
                s += a[static_cast<std::size_t>(i) * d + k] * b[static_cast<std::size_t>(k) * d + j];
            out[static_cast<std::size_t>(i) * d + j] = s;
        }
    }
}

double mat_trace_prod(int d, const double* a, const double* b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k)
            s += a[static_cast<std::size_t>(i) * d + k] * b[static_cast<std::size_t>(k) * d + i];
    return s;
}

} // namespace detail

} // namespace volfn
