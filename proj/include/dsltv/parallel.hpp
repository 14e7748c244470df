// Work partitioning for the data-parallel kernels (Monte Carlo trials,
// measurement-matrix columns, basis extension rows).
//
// Contract: a kernel written against parallel_for must give every iteration
// its own disjoint output slot and must not depend on iteration order. The
// scheduling policy then only changes *when* an iteration runs, never what it
// computes, so the OpenMP path and the serial reference path are bitwise
// identical. tests/test_parallel.cpp asserts this for each kernel and
// tools/bench_kernels.cpp times the two paths against each other.
#pragma once

#include <cstdint>

#ifdef DSLTV_HAVE_OPENMP
#include <omp.h>
#endif

namespace dsltv {

struct ExecPolicy {
    // workers <= 1 selects the serial reference path.
    int workers = 1;

    static ExecPolicy serial() { return ExecPolicy{1}; }

    static ExecPolicy max_parallel() {
#ifdef DSLTV_HAVE_OPENMP
        return ExecPolicy{omp_get_max_threads()};
#else
        return ExecPolicy{1};
#endif
    }
};

/** Runs body(i) for i in [0, n); OpenMP static schedule when workers > 1. */
template <class F>
void parallel_for(std::int64_t n, const ExecPolicy& policy, F&& body) {
#ifdef DSLTV_HAVE_OPENMP
    if (policy.workers > 1) {
#pragma omp parallel for schedule(static) num_threads(policy.workers)
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    (void)policy;
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

/** The serial reference: identical iteration bodies, sequential order. */
template <class F>
void serial_for(std::int64_t n, F&& body) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace dsltv
