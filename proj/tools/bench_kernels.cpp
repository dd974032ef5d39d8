// Times the OpenMP batch kernels against their serial reference paths and
// checks the outputs stay bit-identical.

#include <chrono>
#include <cstdio>
#include <functional>

#include "np/bench.hpp"
#include "np/deepgp.hpp"
#include "np/parallel.hpp"
#include "np/pareto.hpp"
#include "np/quality.hpp"
#include "np/rankclf.hpp"
#include "np/rng.hpp"

using namespace np;

namespace {

struct Timing {
    double serial = 0.0, parallel = 0.0;
    bool identical = true;
};

template <class F, class Eq>
Timing time_kernel(F&& kernel, Eq&& equal, int reps)
{
    using Clock = std::chrono::steady_clock;
    Timing t;
    set_parallel_enabled(false);
    auto ref = kernel();
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) kernel();
    t.serial = std::chrono::duration<double>(Clock::now() - t0).count() / reps;

    set_parallel_enabled(true);
    auto par = kernel();
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) kernel();
    t.parallel = std::chrono::duration<double>(Clock::now() - t0).count() / reps;
    t.identical = equal(ref, par);
    return t;
}

void report(const char* name, const Timing& t)
{
    std::printf("%-28s serial %9.4f ms   omp %9.4f ms   speedup %5.2fx   %s\n", name,
                1e3 * t.serial, 1e3 * t.parallel, t.serial / t.parallel,
                t.identical ? "bit-identical" : "MISMATCH");
}

bool vecs_equal(const std::vector<Vec>& a, const std::vector<Vec>& b)
{
    return a == b;
}

} // namespace

int main()
{
    std::printf("threads available: %d\n\n", max_threads());
    Rng rng(7);

    auto problem = bench::make_problem("dtlz2", 30, 2);
    auto pool = bench::latin_hypercube(20000, problem.dim, problem.lower, problem.upper, rng);
    report("evaluate_batch (20k x D30)", time_kernel(
        [&] { return bench::evaluate_batch(problem, pool); }, vecs_equal, 5));

    std::vector<Vec> cloud(2000, Vec(2));
    for (auto& p : cloud) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
    report("nondominated_sort (2k)", time_kernel(
        [&] { return pareto::nondominated_sort(cloud); },
        [](const auto& a, const auto& b) { return a == b; }, 5));

    std::vector<Vec> hv_points(64, Vec(4));
    for (auto& p : hv_points)
        for (auto& v : p) v = rng.uniform();
    quality::HVConfig hv_cfg;
    hv_cfg.ref_point = Vec(4, 1.2);
    hv_cfg.mc_samples = 2000000;
    report("hypervolume_mc (2M samples)", time_kernel(
        [&] { return quality::hypervolume_mc(hv_points, hv_cfg); },
        [](double a, double b) { return a == b; }, 3));

    std::vector<Vec> refs(4000, Vec(2)), sols(600, Vec(2));
    for (auto& p : refs) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
    for (auto& p : sols) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
    report("igd (4k refs x 600 sols)", time_kernel(
        [&] { return quality::igd(sols, refs); },
        [](double a, double b) { return a == b; }, 5));

    // classifier + surrogate batch prediction on a trained desk-scale stack
    auto small = bench::make_problem("dtlz2", 10, 2);
    auto xs = bench::latin_hypercube(120, small.dim, small.lower, small.upper, rng);
    auto fs = bench::evaluate_batch(small, xs);
    pareto::Archive archive;
    {
        std::vector<Sample> batch(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) batch[i] = {xs[i], fs[i], 0};
        archive.insert(std::move(batch));
    }
    rankclf::ClassifierConfig ccfg;
    auto clf = rankclf::make_classifier(small.dim, 5, small.lower, small.upper, ccfg, rng);
    auto labels = pareto::rank_labels(archive.ranks(), 5);
    fit_classifier(clf, archive.decisions(), labels, 30, ccfg, rng);
    auto cand = bench::latin_hypercube(3000, small.dim, small.lower, small.upper, rng);
    rankclf::MCConfig mc;
    report("classifier predict (3k)", time_kernel(
        [&] {
            rankclf::PredictionCache cache;  // fresh cache: full recompute
            return cache.predict_batch(clf, cand, mc, 42);
        },
        [](const auto& a, const auto& b) {
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i].p_bar != b[i].p_bar || a[i].u_ep != b[i].u_ep) return false;
            return true;
        }, 3));

    deepgp::SurrogateConfig scfg;
    auto surrogate = deepgp::SurrogateModel::init(scfg, small.lower, small.upper, archive, rng);
    surrogate.fit(archive, deepgp::FitMode::warm_bounded, false, rng);
    report("surrogate proxy (3k)", time_kernel(
        [&] { return surrogate.proxy_batch(cand); },
        [](const auto& a, const auto& b) {
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i].means != b[i].means || a[i].coarse_var != b[i].coarse_var) return false;
            return true;
        }, 3));
    std::vector<Vec> top(cand.begin(), cand.begin() + 200);
    report("surrogate predict (200)", time_kernel(
        [&] { return surrogate.predict_batch(top, scfg.s_gp, 99); },
        [](const auto& a, const auto& b) {
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i].f_hat != b[i].f_hat || a[i].u_ep != b[i].u_ep) return false;
            return true;
        }, 3));

    double pf = deepgp::SurrogateModel::predict_flop_estimate(scfg, small.dim);
    double xf = deepgp::SurrogateModel::proxy_flop_estimate(scfg, small.dim);
    std::printf("\npredict/proxy flop model: %.0f vs %.0f (ratio %.1fx)\n", pf, xf, pf / xf);
    return 0;
}
