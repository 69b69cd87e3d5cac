#pragma once
#include <atomic>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace volfn {

namespace detail {
inline std::atomic<int>& worker_cap() {
    static std::atomic<int> cap{0};
    return cap;
}
} // namespace detail

inline int hardware_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Worker cap shared by all parallel loops. 0 means "let the runtime decide".
inline void set_max_workers(int w) {
    detail::worker_cap().store(w < 0 ? 0 : w);
#ifdef _OPENMP
    if (w > 0) omp_set_num_threads(w);
#endif
}

inline int max_workers() { return detail::worker_cap().load(); }

// Deterministic reduction: terms are summed inside fixed-size blocks in
// ascending index order and the block partials are then combined serially,
// again in ascending order. The result is bit-identical for any worker count,
// including the serial build.
template <class TermFn>
double block_sum(std::int64_t n, TermFn&& term, std::int64_t block = 4096) {
    if (n <= 0) return 0.0;
    std::int64_t nblocks = (n + block - 1) / block;
    if (nblocks == 1) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += term(i);
        return s;
    }
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t b = 0; b < nblocks; ++b) {
        std::int64_t lo = b * block;
        std::int64_t hi = lo + block < n ? lo + block : n;
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<std::size_t>(b)] = s;
    }
    double total = 0.0;
    for (std::int64_t b = 0; b < nblocks; ++b) total += partial[static_cast<std::size_t>(b)];
    return total;
}

namespace serial {
// Reference implementation: same block structure, one thread, no OpenMP.
// Tests assert the parallel version reproduces this bit for bit.
template <class TermFn>
double block_sum(std::int64_t n, TermFn&& term, std::int64_t block = 4096) {
    if (n <= 0) return 0.0;
    std::int64_t nblocks = (n + block - 1) / block;
    double total = 0.0;
    for (std::int64_t b = 0; b < nblocks; ++b) {
        std::int64_t lo = b * block;
        std::int64_t hi = lo + block < n ? lo + block : n;
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        total += s;
    }
    return total;
}
} // namespace serial

} // namespace volfn
