// The OpenMP kernels must be bit-identical to their serial reference paths:
// every batch index owns its output slot and its own derived random stream,
// and floating-point reductions happen serially after the parallel fill.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "np/bench.hpp"
#include "np/deepgp.hpp"
#include "np/loop.hpp"
#include "np/parallel.hpp"
#include "np/pareto.hpp"
#include "np/quality.hpp"
#include "np/rankclf.hpp"
#include "oracles.hpp"

using namespace np;

namespace {

template <class F>
auto serial_vs_parallel(F&& f)
{
    set_parallel_enabled(false);
    auto serial = f();
    set_parallel_enabled(true);
    auto parallel = f();
    return std::make_pair(serial, parallel);
}

} // namespace

TEST_CASE("evaluate_batch is bit-identical across execution modes")
{
    auto problem = bench::make_problem("dtlz3", 12, 3);
    Rng rng(1);
    auto xs = bench::latin_hypercube(500, 12, problem.lower, problem.upper, rng);
    auto [s, p] = serial_vs_parallel([&] { return bench::evaluate_batch(problem, xs); });
    CHECK(s == p);
}

TEST_CASE("nondominated_sort is bit-identical across execution modes")
{
    Rng rng(2);
    std::vector<Vec> pts(400, Vec(3));
    for (auto& v : pts)
        for (auto& c : v) c = rng.below(9);
    auto [s, p] = serial_vs_parallel([&] { return pareto::nondominated_sort(pts); });
    CHECK(s == p);
}

TEST_CASE("monte carlo hypervolume is bit-identical across execution modes")
{
    Rng rng(3);
    std::vector<Vec> pts(24, Vec(4));
    for (auto& v : pts)
        for (auto& c : v) c = rng.uniform();
    quality::HVConfig cfg;
    cfg.ref_point = Vec(4, 1.2);
    cfg.mc_samples = 300000;
    auto [s, p] = serial_vs_parallel([&] { return quality::hypervolume_mc(pts, cfg); });
    CHECK(s == p);
}

TEST_CASE("igd is bit-identical across execution modes")
{
    Rng rng(4);
    std::vector<Vec> sols(200, Vec(2)), refs(1500, Vec(2));
    for (auto& v : sols) { v[0] = rng.uniform(); v[1] = rng.uniform(); }
    for (auto& v : refs) { v[0] = rng.uniform(); v[1] = rng.uniform(); }
    auto [s, p] = serial_vs_parallel([&] { return quality::igd(sols, refs); });
    CHECK(s == p);
}

TEST_CASE("classifier batch prediction is bit-identical across execution modes")
{
    Rng rng(5);
    std::vector<Vec> xs;
    std::vector<std::size_t> labels;
    for (int i = 0; i < 40; ++i) {
        xs.push_back({rng.uniform(), rng.uniform()});
        labels.push_back(1 + i % 3);
    }
    rankclf::ClassifierConfig ccfg;
    ccfg.hidden1 = 32;
    ccfg.hidden2 = 32;
    auto model = rankclf::make_classifier(2, 5, Vec{0, 0}, Vec{1, 1}, ccfg, rng);
    fit_classifier(model, xs, labels, 40, ccfg, rng);
    std::vector<Vec> pool(300, Vec(2));
    for (auto& v : pool) { v[0] = rng.uniform(); v[1] = rng.uniform(); }
    rankclf::MCConfig mc;
    auto [s, p] = serial_vs_parallel([&] {
        rankclf::PredictionCache cache;
        return cache.predict_batch(model, pool, mc, 42);
    });
    REQUIRE(s.size() == p.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].p_bar == p[i].p_bar);
        CHECK(s[i].u_ep == p[i].u_ep);
        CHECK(s[i].s_used == p[i].s_used);
    }
}

TEST_CASE("surrogate batch prediction is bit-identical across execution modes")
{
    Rng rng(6);
    pareto::Archive archive;
    std::vector<Sample> batch;
    for (int i = 0; i < 50; ++i) {
        double x = rng.uniform(), y = rng.uniform();
        batch.push_back(Sample{{x, y}, {x + y, x * y}, 0});
    }
    archive.insert(std::move(batch));
    deepgp::SurrogateConfig cfg;
    cfg.m_inducing = 12;
    cfg.d_rff = 32;
    auto model = deepgp::SurrogateModel::init(cfg, Vec{0, 0}, Vec{1, 1}, archive, rng);
    model.fit(archive, deepgp::FitMode::full_refit, false, rng);
    std::vector<Vec> pool(200, Vec(2));
    for (auto& v : pool) { v[0] = rng.uniform(); v[1] = rng.uniform(); }

    auto [sp, pp] = serial_vs_parallel([&] { return model.proxy_batch(pool); });
    for (std::size_t i = 0; i < sp.size(); ++i) {
        CHECK(sp[i].means == pp[i].means);
        CHECK(sp[i].coarse_var == pp[i].coarse_var);
    }
    auto [sf, pf] = serial_vs_parallel([&] { return model.predict_batch(pool, 8, 77); });
    for (std::size_t i = 0; i < sf.size(); ++i) {
        CHECK(sf[i].f_hat == pf[i].f_hat);
        CHECK(sf[i].u_ep == pf[i].u_ep);
        CHECK(sf[i].u_al == pf[i].u_al);
    }
}

TEST_CASE("surrogate fitting is bit-identical across execution modes")
{
    Rng fill(7);
    pareto::Archive archive;
    std::vector<Sample> batch;
    for (int i = 0; i < 40; ++i) {
        double x = fill.uniform(), y = fill.uniform();
        batch.push_back(Sample{{x, y}, {x + y, x - y}, 0});
    }
    archive.insert(std::move(batch));
    deepgp::SurrogateConfig cfg;
    cfg.m_inducing = 10;
    cfg.d_rff = 32;
    auto fit_once = [&] {
        Rng rng(9);
        auto model = deepgp::SurrogateModel::init(cfg, Vec{0, 0}, Vec{1, 1}, archive, rng);
        auto rep = model.fit(archive, deepgp::FitMode::full_refit, false, rng);
        return std::make_pair(rep.elbo_trace, model.objective(0).w_mean);
    };
    auto [s, p] = serial_vs_parallel(fit_once);
    CHECK(s.first == p.first);
    CHECK(s.second == p.second);
}

TEST_CASE("a whole optimizer run is bit-identical across execution modes")
{
    auto problem = bench::make_problem("dtlz2", 6, 2);
    loop::LoopConfig cfg;
    cfg.budget = 30;
    cfg.batch_q = 3;
    cfg.pool_size = 80;
    cfg.n_screen = 40;
    cfg.top_k = 10;
    cfg.init_size = 18;
    cfg.clf_epochs = 10;
    cfg.ref_front_size = 100;
    cfg.classifier.hidden1 = 32;
    cfg.classifier.hidden2 = 32;
    cfg.surrogate.m_inducing = 8;
    cfg.surrogate.d_rff = 32;
    cfg.surrogate.warm_epochs = 3;
    cfg.surrogate.full_epochs = 8;
    cfg.acquisition.steps = 15;

    auto [s, p] = serial_vs_parallel([&] { return loop::run(problem, cfg, 99); });
    REQUIRE(s.rows.size() == p.rows.size());
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        CHECK(s.rows[i].hv == p.rows[i].hv);
        CHECK(s.rows[i].igd == p.rows[i].igd);
        CHECK(s.rows[i].mean_s_used == p.rows[i].mean_s_used);
        CHECK(s.rows[i].acq_loss == p.rows[i].acq_loss);
    }
    REQUIRE(s.history.size() == p.history.size());
    for (std::size_t i = 0; i < s.history.size(); ++i) {
        CHECK(s.history[i].delta_hv == p.history[i].delta_hv);
        CHECK(s.history[i].feat == p.history[i].feat);
    }
    for (std::size_t i = 0; i < s.archive.size(); ++i)
        CHECK(s.archive.samples()[i].x == p.archive.samples()[i].x);
}
