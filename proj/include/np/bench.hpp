#ifndef NP_BENCH_HPP
#define NP_BENCH_HPP

#include <string>
#include <vector>

#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::bench {

enum class Suite {
    DTLZ1, DTLZ2, DTLZ3, DTLZ4, DTLZ5, DTLZ6, DTLZ7,
    ZDT1, ZDT2, ZDT3, ZDT4, ZDT6
};

// Canonical DTLZ/ZDT definitions (Deb et al. 2002; Zitzler et al. 2000),
// minimization. Formulas are spelled out in docs/benchmarks.md since the
// indicator values downstream only mean something for a pinned suite.
struct ProblemSpec {
    Suite suite;
    std::string name;      // lowercase, e.g. "dtlz2"
    std::size_t dim = 0;   // decision dimension D
    std::size_t n_obj = 0; // objective count M
    Vec lower, upper;      // per-dimension box bounds

    bool in_bounds(const Vec& x) const;
};

Suite suite_from_name(const std::string& name); // throws std::invalid_argument
std::string suite_name(Suite s);
bool is_zdt(Suite s);

// throws std::invalid_argument naming the violated constraint
ProblemSpec make_problem(const std::string& name, std::size_t dim, std::size_t n_obj);

// deterministic analytic evaluation; throws std::domain_error on
// out-of-bounds or wrong-length input
Vec evaluate(const ProblemSpec& p, const Vec& x);

// order-preserving batch evaluation (data-parallel)
std::vector<Vec> evaluate_batch(const ProblemSpec& p, const std::vector<Vec>& xs);

// n_points samples on the analytic Pareto front, deterministic for fixed
// n_points. DTLZ7/ZDT3 (and DTLZ M>=3 surfaces) come from dense sampling of
// front-optimal decisions plus nondominated filtering.
std::vector<Vec> reference_front(const ProblemSpec& p, std::size_t n_points);

// Latin hypercube design: exactly one point per axis stratum per dimension
std::vector<Vec> latin_hypercube(std::size_t n, std::size_t dim,
                                 const Vec& lower, const Vec& upper, Rng& rng);

} // namespace np::bench

#endif
