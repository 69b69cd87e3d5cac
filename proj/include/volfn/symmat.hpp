#pragma once
#include <cstddef>
#include <vector>

namespace volfn {

// Dense symmetric d x d matrix. Symmetry is a hard invariant: the only
// mutating entry access is set(), which writes both (j,k) and (k,j), so the
// stored buffer is exactly symmetric at all times (no tolerance involved).
class SymMatrix {
public:
    SymMatrix() : dim_(0) {}
    explicit SymMatrix(int d);
    static SymMatrix identity(int d);
    static SymMatrix diag(const std::vector<double>& v);

    int dim() const { return dim_; }
    double operator()(int j, int k) const { return a_[static_cast<std::size_t>(j) * dim_ + k]; }
    void set(int j, int k, double v) {
        a_[static_cast<std::size_t>(j) * dim_ + k] = v;
        a_[static_cast<std::size_t>(k) * dim_ + j] = v;
    }
    void add(int j, int k, double v) { set(j, k, operator()(j, k) + v); }

    const double* data() const { return a_.data(); }
    void fill(double v);
    void load_from(const double* buf); // buf is d*d row major, assumed symmetric

    SymMatrix& operator+=(const SymMatrix& o);
    SymMatrix& operator-=(const SymMatrix& o);
    SymMatrix& operator*=(double s);
    void add_scaled(const SymMatrix& o, double s);

    double trace() const;
    double frobenius_norm() const;
    double max_abs() const;

private:
    int dim_;
    std::vector<double> a_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(SymMatrix a, double s);

// Rank-one PSD matrix v v^T from an increment vector.
SymMatrix outer_product_increment(const double* v, int d);

// Nearest symmetric part (m + m^T)/2 of a general row-major d x d buffer.
SymMatrix symmetrize(const double* m, int d);

// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
// If vectors != nullptr it receives the orthonormal eigenvectors as columns
// (row-major d x d, column j pairing with eigenvalue j).
std::vector<double> sym_eigenvalues(const SymMatrix& x, std::vector<double>* vectors = nullptr);

double min_eigenvalue(const SymMatrix& x);

// PSD test with the tolerance used throughout: smallest eigenvalue allowed
// down to -d * eps * (1 + ||x||_F).
bool is_psd(const SymMatrix& x);
double psd_tolerance(const SymMatrix& x);

// Symmetric PSD square root via the eigendecomposition. Negative eigenvalues
// within the PSD tolerance are clamped to zero; beyond it, NumericError.
SymMatrix sym_sqrt(const SymMatrix& x);

// Fourth-order tensor with the pair symmetries of a Hessian in matrix
// argument: H(j,k,l,m) = H(k,j,l,m) = H(j,k,m,l) = H(l,m,j,k). set_sym writes
// the whole orbit of an index quadruple so the invariant is exact.
class Tensor4 {
public:
    Tensor4() : dim_(0) {}
    explicit Tensor4(int d);

    int dim() const { return dim_; }
    double operator()(int j, int k, int l, int m) const { return a_[idx(j, k, l, m)]; }
    void set_sym(int j, int k, int l, int m, double v);
    void add_sym(int j, int k, int l, int m, double v);
    void fill(double v);
    double max_abs() const;

private:
    std::size_t idx(int j, int k, int l, int m) const {
        return ((static_cast<std::size_t>(j) * dim_ + k) * dim_ + l) * dim_ + m;
    }
    int dim_;
    std::vector<double> a_;
};

namespace detail {
// Small dense helpers on row-major buffers (d x d).
void mat_mul(int d, const double* a, const double* b, double* out);
double mat_trace_prod(int d, const double* a, const double* b); // trace(a b)
} // namespace detail

} // namespace volfn
