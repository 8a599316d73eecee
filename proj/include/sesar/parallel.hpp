#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sesar {

// Every parallel site in the project is an independent per-index map whose
// output slot is written by exactly one thread, so Serial and Parallel
// policies produce bitwise-identical results. Reductions (centroid sums,
// inertia, report assembly) always run serially in fixed index order.
enum class ExecPolicy { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

template <class F>
void parallel_for(int n, ExecPolicy policy, F&& body) {
#ifdef _OPENMP
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
#else
    (void)policy;
#endif
    for (int i = 0; i < n; ++i) body(i);
}

// For coarse jobs of uneven cost (whole experiments in a sweep).
template <class F>
void parallel_for_dynamic(int n, ExecPolicy policy, F&& body) {
#ifdef _OPENMP
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
#else
    (void)policy;
#endif
    for (int i = 0; i < n; ++i) body(i);
}

}  // namespace sesar
