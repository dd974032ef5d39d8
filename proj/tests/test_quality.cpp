#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "np/bench.hpp"
#include "np/quality.hpp"
#include "oracles.hpp"

using namespace np;
using namespace np::quality;

TEST_CASE("igd basics")
{
    std::vector<Vec> ref = {{0, 0}};
    CHECK(igd({{3, 4}}, ref) == doctest::Approx(5.0));
    std::vector<Vec> same = {{0, 1}, {1, 0}};
    CHECK(igd(same, same) == doctest::Approx(0.0));
    CHECK_THROWS_AS(igd({}, ref), std::domain_error);

    // adding a dominated far-away solution never increases IGD
    std::vector<Vec> sols = {{0.2, 0.8}, {0.7, 0.3}};
    std::vector<Vec> reference = {{0, 1}, {0.5, 0.5}, {1, 0}};
    double before = igd(sols, reference);
    sols.push_back({50, 50});
    CHECK(igd(sols, reference) <= before + 1e-15);
}

TEST_CASE("exact hypervolume worked example and edge cases")
{
    HVConfig cfg;
    cfg.ref_point = {3, 3};
    CHECK(hypervolume({{1, 2}, {2, 1}}, cfg) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(hypervolume({}, cfg) == 0.0);
    CHECK(hypervolume({{3, 3}, {4, 1}}, cfg) == 0.0);

    double base = hypervolume({{1, 2}, {2, 1}}, cfg);
    CHECK(hypervolume({{1, 2}, {2, 1}, {1, 2}}, cfg) == doctest::Approx(base));
}

TEST_CASE("exact hypervolume matches the grid oracle (M=2 and M=3)")
{
    Rng rng(9);
    for (int rep = 0; rep < 25; ++rep) {
        std::size_t n = 2 + rng.below(12);
        std::vector<Vec> pts(n, Vec(2));
        for (auto& p : pts) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
        Vec ref{1.1, 1.1};
        double exact = hypervolume_exact(pts, ref);
        double grid = oracles::grid_hypervolume(pts, ref, 1000);
        CHECK(std::abs(exact - grid) <= 2e-3 * std::max(exact, 1e-9));
    }
    for (int rep = 0; rep < 6; ++rep) {
        std::size_t n = 2 + rng.below(8);
        std::vector<Vec> pts(n, Vec(3));
        for (auto& p : pts)
            for (auto& v : p) v = rng.uniform();
        Vec ref{1.1, 1.1, 1.1};
        double exact = hypervolume_exact(pts, ref);
        double grid = oracles::grid_hypervolume(pts, ref, 100);
        CHECK(std::abs(exact - grid) <= 5e-3 * std::max(exact, 1e-9));
    }
}

TEST_CASE("monte carlo hypervolume agrees with exact within 3 sigma")
{
    Rng rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t n = 2 + rng.below(10);
        std::vector<Vec> pts(n, Vec(2));
        for (auto& p : pts) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
        HVConfig cfg;
        cfg.ref_point = {1.2, 1.2};
        cfg.mc_samples = 200000;
        cfg.mc_seed = 1000 + rep;
        double exact = hypervolume_exact(pts, cfg.ref_point);
        double mc = hypervolume_mc(pts, cfg);
        Vec lo(2);
        for (std::size_t m = 0; m < 2; ++m) {
            lo[m] = pts[0][m];
            for (const auto& p : pts) lo[m] = std::min(lo[m], p[m]);
        }
        double box = (cfg.ref_point[0] - lo[0]) * (cfg.ref_point[1] - lo[1]);
        double frac = exact / box;
        double sigma = box * std::sqrt(frac * (1.0 - frac) /
                                       static_cast<double>(cfg.mc_samples));
        CHECK(std::abs(mc - exact) <= 3.0 * sigma + 1e-12);
    }
}

TEST_CASE("hypervolume monotonicity and scaling")
{
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Vec> pts(5, Vec(2));
        for (auto& p : pts) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
        HVConfig cfg;
        cfg.ref_point = {1.5, 1.5};
        double before = hypervolume(pts, cfg);
        Vec extra = {rng.uniform(), rng.uniform()};
        auto grown = pts;
        grown.push_back(extra);
        CHECK(hypervolume(grown, cfg) >= before - 1e-12);

        double c = 0.5 + rng.uniform();
        std::vector<Vec> scaled = pts;
        for (auto& p : scaled)
            for (auto& v : p) v *= c;
        HVConfig scfg;
        scfg.ref_point = {1.5 * c, 1.5 * c};
        CHECK(hypervolume(scaled, scfg) == doctest::Approx(before * c * c).epsilon(1e-9));
    }
}

TEST_CASE("delta_hv")
{
    HVConfig cfg;
    cfg.ref_point = {2, 2};
    CHECK(delta_hv({}, {1, 1}, cfg) == doctest::Approx(1.0));
    CHECK(delta_hv({{0.5, 0.5}}, {1, 1}, cfg) == doctest::Approx(0.0));
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Vec> pts(4, Vec(2));
        for (auto& p : pts) { p[0] = rng.uniform(); p[1] = rng.uniform(); }
        Vec cand = {rng.uniform(), rng.uniform()};
        CHECK(delta_hv(pts, cand, cfg) >= -1e-12);
    }
}

TEST_CASE("calibration metrics")
{
    std::vector<std::pair<double, bool>> perfect(40, {1.0, true});
    auto m = calibration_metrics(perfect, 15);
    CHECK(m.ece == doctest::Approx(0.0));
    CHECK(m.mce == doctest::Approx(0.0));
    CHECK(m.ace == doctest::Approx(0.0));

    std::vector<std::pair<double, bool>> wrong(40, {1.0, false});
    m = calibration_metrics(wrong, 15);
    CHECK(m.ece == doctest::Approx(1.0));
    CHECK(m.mce == doctest::Approx(1.0));
    CHECK(m.ace == doctest::Approx(1.0));

    std::vector<std::pair<double, bool>> half;
    for (int i = 0; i < 50; ++i) half.push_back({0.5, i % 2 == 0});
    m = calibration_metrics(half, 15);
    CHECK(m.ece == doctest::Approx(0.0));

    CHECK_THROWS_AS(calibration_metrics({}, 15), std::domain_error);

    Rng rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::pair<double, bool>> conf;
        for (int i = 0; i < 60; ++i) conf.push_back({rng.uniform(), rng.uniform() < 0.5});
        auto mm = calibration_metrics(conf, 15);
        CHECK(mm.ece <= mm.mce + 1e-12);
        CHECK(mm.ece >= 0.0);
        CHECK(mm.mce <= 1.0);
        CHECK(mm.ace >= 0.0);
        CHECK(mm.ace <= 1.0);
    }
}

TEST_CASE("reliability bins have the requested count")
{
    std::vector<std::pair<double, bool>> conf = {{0.1, false}, {0.9, true}, {1.0, true}};
    auto bins = reliability_bins(conf, 15);
    CHECK(bins.size() == 15);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    CHECK(total == conf.size());
    CHECK(bins.back().count == 1);  // conf == 1.0 lands in the top bin
    CHECK(bins[13].count == 1);     // 0.9 sits one bin below
}

TEST_CASE("constants estimators")
{
    // quantile of constants is the constant
    std::vector<double> oracle = {1, 1, 1}, realized = {1, 1, 1};
    CHECK(estimate_rho(oracle, realized) == doctest::Approx(1.0));
    CHECK(estimate_rho({2, 4, 8}, {0, 0, 0}) == doctest::Approx(0.0));
    CHECK(estimate_rho({0.0, 2.0}, {1.0, 1.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(estimate_rho({}, {}), std::domain_error);
    CHECK_THROWS_AS(estimate_rho({0.0}, {1.0}), std::runtime_error);

    // single-point archive replaced by the reference point loses the full HV
    HVConfig cfg;
    cfg.ref_point = {2, 2};
    Rng rng(5);
    double h = estimate_h_max({{{1, 1}}}, 5, cfg, rng);
    CHECK(h == doctest::Approx(1.0));
    CHECK(estimate_h_max({}, 5, cfg, rng) == 0.0);

    auto problem = bench::make_problem("dtlz2", 6, 2);
    pareto::Archive archive;
    Rng drng(8);
    auto xs = bench::latin_hypercube(40, 6, problem.lower, problem.upper, drng);
    auto fs = bench::evaluate_batch(problem, xs);
    std::vector<Sample> batch(40);
    for (std::size_t i = 0; i < 40; ++i) batch[i] = {xs[i], fs[i], 0};
    archive.insert(std::move(batch));
    HVConfig hv_cfg;
    hv_cfg.ref_point = {5, 5};
    Rng lrng(9);
    double lh = estimate_l_h(problem, archive, 50, 0.01, hv_cfg, lrng);
    CHECK(std::isfinite(lh));
    CHECK(lh >= 0.0);
    CHECK_THROWS_AS(estimate_l_h(problem, archive, 5, 0.01, hv_cfg, lrng), std::domain_error);
}

TEST_CASE("suggest_k")
{
    CHECK(suggest_k(300, 60) == 5);
    CHECK(suggest_k(300, 15) == 20);
    CHECK(suggest_k(300, 300) == 1);
    CHECK_THROWS_AS(suggest_k(10, 20), std::domain_error);
    CHECK_THROWS_AS(suggest_k(10, 0), std::domain_error);
}
