#include "isotropica/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace isotropica {

namespace {
int g_threads = 0;

int detect_threads() {
    if (const char* env = std::getenv("ISOTROPICA_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}
} // namespace

int thread_count() {
    if (g_threads > 0) return g_threads;
    return detect_threads();
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int nt = thread_count();
    if (nt <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Block size is independent of nt so work decomposition is stable.
    const std::size_t block = 256;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t b = next.fetch_add(1);
            std::size_t lo = b * block;
            if (lo >= n) return;
            std::size_t hi = std::min(n, lo + block);
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        }
    };
    std::vector<std::thread> pool;
    int spawn = std::min<std::size_t>(nt, (n + block - 1) / block);
    pool.reserve(spawn);
    for (int t = 1; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

namespace {
template <typename T>
T pairwise_impl(const T* v, std::size_t n) {
    if (n == 0) return T{};
    if (n <= 16) {
        T s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_impl(v, h) + pairwise_impl(v + h, n - h);
}
} // namespace

double pairwise_sum(const double* v, std::size_t n) { return pairwise_impl(v, n); }
std::complex<double> pairwise_sum(const std::complex<double>* v, std::size_t n) {
    return pairwise_impl(v, n);
}

} // namespace isotropica
