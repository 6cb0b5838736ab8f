#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace isotropica {

// Global worker count. Resolution order: explicit set_thread_count(),
// ISOTROPICA_THREADS, hardware concurrency.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n). Work is split into fixed-size blocks whose
// boundaries do not depend on the thread count, so any per-block results a
// caller accumulates in block order are reproducible across machines and
// --threads settings.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Pairwise (cascade) summation over a contiguous range. Summation tree shape
// depends only on the element count, making results independent of chunking.
double pairwise_sum(const double* v, std::size_t n);
std::complex<double> pairwise_sum(const std::complex<double>* v, std::size_t n);

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}
inline std::complex<double> pairwise_sum(const std::vector<std::complex<double>>& v) {
    return pairwise_sum(v.data(), v.size());
}

} // namespace isotropica
