#ifndef NP_PARALLEL_HPP
#define NP_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace np {

// Batch kernels follow one pattern: every index writes only its own output
// slot and draws randomness from a substream derived from stable per-item
// keys, so the OpenMP path is bit-identical to the serial reference for any
// thread count. Floating-point reductions are done serially after the
// parallel fill.

inline std::atomic<bool>& parallel_flag()
{
    static std::atomic<bool> enabled{true};
    return enabled;
}

inline bool parallel_enabled() { return parallel_flag().load(std::memory_order_relaxed); }
inline void set_parallel_enabled(bool on) { parallel_flag().store(on, std::memory_order_relaxed); }

inline int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <class F>
void serial_for(std::size_t n, F&& body)
{
    for (std::size_t i = 0; i < n; ++i) body(i);
}

template <class F>
void parallel_for(std::size_t n, F&& body)
{
#ifdef _OPENMP
    if (parallel_enabled() && n > 1) {
        #pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
    }
#endif
    serial_for(n, body);
}

} // namespace np

#endif
