#include "np/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "np/parallel.hpp"
#include "np/pareto.hpp"

namespace np::bench {

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void config_error(const std::string& msg) { throw std::invalid_argument(msg); }

// DTLZ tail term g over x_{M}..x_{D} (0-based slice [m_obj-1, dim))
double dtlz_g_rastrigin(const Vec& x, std::size_t first)
{
    double s = 0.0;
    for (std::size_t i = first; i < x.size(); ++i) {
        double d = x[i] - 0.5;
        s += d * d - std::cos(20.0 * kPi * d);
    }
    return 100.0 * (static_cast<double>(x.size() - first) + s);
}

double dtlz_g_sphere(const Vec& x, std::size_t first)
{
    double s = 0.0;
    for (std::size_t i = first; i < x.size(); ++i) {
        double d = x[i] - 0.5;
        s += d * d;
    }
    return s;
}

// DTLZ2-style objectives from angles theta_1..theta_{M-1} (radians scaled to
// [0, pi/2]) and tail term g
Vec hypersphere_objectives(const Vec& theta, double g)
{
    std::size_t m_obj = theta.size() + 1;
    Vec f(m_obj);
    for (std::size_t m = 0; m < m_obj; ++m) {
        double v = 1.0 + g;
        for (std::size_t i = 0; i + m + 1 < m_obj; ++i) v *= std::cos(theta[i]);
        if (m > 0) v *= std::sin(theta[m_obj - 1 - m]);
        f[m] = v;
    }
    return f;
}

Vec dtlz1_objectives(const Vec& x, std::size_t m_obj, double g)
{
    Vec f(m_obj);
    for (std::size_t m = 0; m < m_obj; ++m) {
        double v = 0.5 * (1.0 + g);
        for (std::size_t i = 0; i + m + 1 < m_obj; ++i) v *= x[i];
        if (m > 0) v *= 1.0 - x[m_obj - 1 - m];
        f[m] = v;
    }
    return f;
}

double zdt_g_linear(const Vec& x)
{
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += x[i];
    return 1.0 + 9.0 * s / static_cast<double>(x.size() - 1);
}

// low-discrepancy fill-in for surface-shaped fronts (M >= 3); radical
// inverse per prime base
double halton(std::size_t index, std::size_t base)
{
    double f = 1.0, r = 0.0;
    std::size_t i = index + 1;
    while (i > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

constexpr std::size_t kPrimes[] = {2, 3, 5, 7, 11, 13};

// keep exactly n points from a larger deterministic candidate list
std::vector<Vec> downsample(std::vector<Vec> pts, std::size_t n)
{
    if (pts.size() <= n) return pts;
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = (i * (pts.size() - 1)) / (n - 1 > 0 ? n - 1 : 1);
        out.push_back(pts[j]);
    }
    return out;
}

std::vector<Vec> nondominated_filter_sorted(std::vector<Vec> pts)
{
    // lexicographic sort keeps the result deterministic, dedups exactly
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<Vec> keep;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            if (&p != &q && pareto::dominates(q, p)) { dominated = true; break; }
        }
        if (!dominated) keep.push_back(p);
    }
    return keep;
}

// minimal f1 attainable on the ZDT6 front, located once by dense scan plus
// ternary refinement (the curve is smooth near the optimum)
double zdt6_f1_min()
{
    static const double value = [] {
        auto f1 = [](double x) { return 1.0 - std::exp(-4.0 * x) * std::pow(std::sin(6.0 * kPi * x), 6.0); };
        double best_x = 0.0, best = f1(0.0);
        for (int i = 0; i <= 200000; ++i) {
            double x = static_cast<double>(i) / 200000.0;
            double v = f1(x);
            if (v < best) { best = v; best_x = x; }
        }
        double lo = std::max(0.0, best_x - 1e-5), hi = std::min(1.0, best_x + 1e-5);
        for (int it = 0; it < 200; ++it) {
            double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (f1(m1) < f1(m2)) hi = m2; else lo = m1;
        }
        return f1(0.5 * (lo + hi));
    }();
    return value;
}

} // namespace

bool ProblemSpec::in_bounds(const Vec& x) const
{
    if (x.size() != dim) return false;
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
}

Suite suite_from_name(const std::string& name)
{
    static const std::pair<const char*, Suite> table[] = {
        {"dtlz1", Suite::DTLZ1}, {"dtlz2", Suite::DTLZ2}, {"dtlz3", Suite::DTLZ3},
        {"dtlz4", Suite::DTLZ4}, {"dtlz5", Suite::DTLZ5}, {"dtlz6", Suite::DTLZ6},
        {"dtlz7", Suite::DTLZ7}, {"zdt1", Suite::ZDT1},   {"zdt2", Suite::ZDT2},
        {"zdt3", Suite::ZDT3},   {"zdt4", Suite::ZDT4},   {"zdt6", Suite::ZDT6},
    };
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (const auto& [key, s] : table)
        if (lower == key) return s;
    config_error("unknown problem name '" + name + "'");
}

std::string suite_name(Suite s)
{
    switch (s) {
        case Suite::DTLZ1: return "dtlz1";
        case Suite::DTLZ2: return "dtlz2";
        case Suite::DTLZ3: return "dtlz3";
        case Suite::DTLZ4: return "dtlz4";
        case Suite::DTLZ5: return "dtlz5";
        case Suite::DTLZ6: return "dtlz6";
        case Suite::DTLZ7: return "dtlz7";
        case Suite::ZDT1: return "zdt1";
        case Suite::ZDT2: return "zdt2";
        case Suite::ZDT3: return "zdt3";
        case Suite::ZDT4: return "zdt4";
        case Suite::ZDT6: return "zdt6";
    }
    return "?";
}

bool is_zdt(Suite s)
{
    return s == Suite::ZDT1 || s == Suite::ZDT2 || s == Suite::ZDT3 ||
           s == Suite::ZDT4 || s == Suite::ZDT6;
}

ProblemSpec make_problem(const std::string& name, std::size_t dim, std::size_t n_obj)
{
    Suite s = suite_from_name(name);
    ProblemSpec p;
    p.suite = s;
    p.name = suite_name(s);
    p.dim = dim;
    p.n_obj = n_obj;
    if (is_zdt(s)) {
        if (n_obj != 2)
            config_error(p.name + ": ZDT is bi-objective, got M=" + std::to_string(n_obj));
        if (dim < 2)
            config_error(p.name + ": D >= 2 required, got D=" + std::to_string(dim));
    } else {
        if (n_obj != 2 && n_obj != 3 && n_obj != 5)
            config_error(p.name + ": DTLZ supports M in {2,3,5}, got M=" + std::to_string(n_obj));
        if (dim < n_obj + 1)
            config_error(p.name + ": D >= M+1 required, got D=" + std::to_string(dim) +
                         ", M=" + std::to_string(n_obj));
    }
    p.lower.assign(dim, 0.0);
    p.upper.assign(dim, 1.0);
    if (s == Suite::ZDT4) {
        for (std::size_t i = 1; i < dim; ++i) { p.lower[i] = -5.0; p.upper[i] = 5.0; }
    }
    return p;
}

Vec evaluate(const ProblemSpec& p, const Vec& x)
{
    if (x.size() != p.dim)
        throw std::domain_error(p.name + ": decision vector length " + std::to_string(x.size()) +
                                " != D=" + std::to_string(p.dim));
    if (!p.in_bounds(x))
        throw std::domain_error(p.name + ": decision vector out of bounds");

    const std::size_t m_obj = p.n_obj;
    switch (p.suite) {
        case Suite::DTLZ1:
            return dtlz1_objectives(x, m_obj, dtlz_g_rastrigin(x, m_obj - 1));
        case Suite::DTLZ2: {
            Vec theta(m_obj - 1);
            for (std::size_t i = 0; i + 1 < m_obj; ++i) theta[i] = 0.5 * kPi * x[i];
            return hypersphere_objectives(theta, dtlz_g_sphere(x, m_obj - 1));
        }
        case Suite::DTLZ3: {
            Vec theta(m_obj - 1);
            for (std::size_t i = 0; i + 1 < m_obj; ++i) theta[i] = 0.5 * kPi * x[i];
            return hypersphere_objectives(theta, dtlz_g_rastrigin(x, m_obj - 1));
        }
        case Suite::DTLZ4: {
            Vec theta(m_obj - 1);
            for (std::size_t i = 0; i + 1 < m_obj; ++i)
                theta[i] = 0.5 * kPi * std::pow(x[i], 100.0);
            return hypersphere_objectives(theta, dtlz_g_sphere(x, m_obj - 1));
        }
        case Suite::DTLZ5:
        case Suite::DTLZ6: {
            double g = p.suite == Suite::DTLZ5 ? dtlz_g_sphere(x, m_obj - 1) : [&] {
                double s = 0.0;
                for (std::size_t i = m_obj - 1; i < x.size(); ++i) s += std::pow(x[i], 0.1);
                return s;
            }();
            Vec theta(m_obj - 1);
            theta[0] = 0.5 * kPi * x[0];
            for (std::size_t i = 1; i + 1 < m_obj; ++i)
                theta[i] = kPi / (4.0 * (1.0 + g)) * (1.0 + 2.0 * g * x[i]);
            return hypersphere_objectives(theta, g);
        }
        case Suite::DTLZ7: {
            double s = 0.0;
            for (std::size_t i = m_obj - 1; i < x.size(); ++i) s += x[i];
            double g = 1.0 + 9.0 * s / static_cast<double>(x.size() - m_obj + 1);
            Vec f(m_obj);
            for (std::size_t m = 0; m + 1 < m_obj; ++m) f[m] = x[m];
            double h = static_cast<double>(m_obj);
            for (std::size_t m = 0; m + 1 < m_obj; ++m)
                h -= f[m] / (1.0 + g) * (1.0 + std::sin(3.0 * kPi * f[m]));
            f[m_obj - 1] = (1.0 + g) * h;
            return f;
        }
        case Suite::ZDT1: {
            double g = zdt_g_linear(x);
            return {x[0], g * (1.0 - std::sqrt(x[0] / g))};
        }
        case Suite::ZDT2: {
            double g = zdt_g_linear(x);
            double r = x[0] / g;
            return {x[0], g * (1.0 - r * r)};
        }
        case Suite::ZDT3: {
            double g = zdt_g_linear(x);
            double r = x[0] / g;
            return {x[0], g * (1.0 - std::sqrt(r) - r * std::sin(10.0 * kPi * x[0]))};
        }
        case Suite::ZDT4: {
            double s = 0.0;
            for (std::size_t i = 1; i < x.size(); ++i)
                s += x[i] * x[i] - 10.0 * std::cos(4.0 * kPi * x[i]);
            double g = 1.0 + 10.0 * static_cast<double>(x.size() - 1) + s;
            return {x[0], g * (1.0 - std::sqrt(x[0] / g))};
        }
        case Suite::ZDT6: {
            double f1 = 1.0 - std::exp(-4.0 * x[0]) * std::pow(std::sin(6.0 * kPi * x[0]), 6.0);
            double s = 0.0;
            for (std::size_t i = 1; i < x.size(); ++i) s += x[i];
            double g = 1.0 + 9.0 * std::pow(s / static_cast<double>(x.size() - 1), 0.25);
            double r = f1 / g;
            return {f1, g * (1.0 - r * r)};
        }
    }
    throw std::logic_error("unreachable suite");
}

std::vector<Vec> evaluate_batch(const ProblemSpec& p, const std::vector<Vec>& xs)
{
    std::vector<Vec> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = evaluate(p, xs[i]); });
    return out;
}

std::vector<Vec> reference_front(const ProblemSpec& p, std::size_t n_points)
{
    if (n_points < p.n_obj)
        throw std::invalid_argument("reference_front: n_points < M");
    const std::size_t m_obj = p.n_obj;

    auto curve = [&](auto&& point_of_t) {
        std::vector<Vec> out(n_points);
        for (std::size_t i = 0; i < n_points; ++i) {
            double t = n_points == 1 ? 0.0
                                     : static_cast<double>(i) / static_cast<double>(n_points - 1);
            out[i] = point_of_t(t);
        }
        return out;
    };

    // surface fronts (M >= 3): low-discrepancy parameter sweep, oversampled,
    // filtered for nondomination, deduplicated, strided down to n_points
    auto surface = [&](auto&& point_of_u, std::size_t n_params) {
        std::size_t oversample = std::max<std::size_t>(4 * n_points, 64);
        std::vector<Vec> pts(oversample);
        for (std::size_t i = 0; i < oversample; ++i) {
            Vec u(n_params);
            for (std::size_t d = 0; d < n_params; ++d) u[d] = halton(i, kPrimes[d]);
            pts[i] = point_of_u(u);
        }
        auto keep = nondominated_filter_sorted(std::move(pts));
        while (keep.size() < n_points) keep.insert(keep.end(), keep.begin(), keep.end());
        return downsample(std::move(keep), n_points);
    };

    switch (p.suite) {
        case Suite::DTLZ1: {
            if (m_obj == 2)
                return curve([](double t) { return Vec{0.5 * t, 0.5 * (1.0 - t)}; });
            return surface([&](const Vec& u) {
                Vec x(u);
                x.resize(m_obj - 1);
                return dtlz1_objectives(x, m_obj, 0.0);
            }, m_obj - 1);
        }
        case Suite::DTLZ2:
        case Suite::DTLZ3:
        case Suite::DTLZ4: {
            if (m_obj == 2)
                return curve([](double t) {
                    double a = 0.5 * kPi * t;
                    return Vec{std::cos(a), std::sin(a)};
                });
            return surface([&](const Vec& u) {
                Vec theta(m_obj - 1);
                for (std::size_t d = 0; d + 1 < m_obj; ++d) theta[d] = 0.5 * kPi * u[d];
                return hypersphere_objectives(theta, 0.0);
            }, m_obj - 1);
        }
        case Suite::DTLZ5:
        case Suite::DTLZ6: {
            // degenerate curve convention: theta_1 sweeps, deeper angles pi/4
            return curve([&](double t) {
                Vec theta(m_obj - 1, 0.25 * kPi);
                theta[0] = 0.5 * kPi * t;
                return hypersphere_objectives(theta, 0.0);
            });
        }
        case Suite::DTLZ7: {
            auto point = [&](const Vec& u) {
                Vec f(m_obj);
                double h = static_cast<double>(m_obj);
                for (std::size_t m = 0; m + 1 < m_obj; ++m) {
                    f[m] = u[m];
                    h -= f[m] / 2.0 * (1.0 + std::sin(3.0 * kPi * f[m]));
                }
                f[m_obj - 1] = 2.0 * h;
                return f;
            };
            if (m_obj == 2) {
                std::size_t oversample = std::max<std::size_t>(8 * n_points, 512);
                std::vector<Vec> pts(oversample);
                for (std::size_t i = 0; i < oversample; ++i) {
                    double t = static_cast<double>(i) / static_cast<double>(oversample - 1);
                    pts[i] = point(Vec{t});
                }
                auto keep = nondominated_filter_sorted(std::move(pts));
                while (keep.size() < n_points) keep.insert(keep.end(), keep.begin(), keep.end());
                return downsample(std::move(keep), n_points);
            }
            return surface(point, m_obj - 1);
        }
        case Suite::ZDT1:
        case Suite::ZDT4:
            return curve([](double t) { return Vec{t, 1.0 - std::sqrt(t)}; });
        case Suite::ZDT2:
            return curve([](double t) { return Vec{t, 1.0 - t * t}; });
        case Suite::ZDT3: {
            std::size_t oversample = std::max<std::size_t>(8 * n_points, 512);
            std::vector<Vec> pts(oversample);
            for (std::size_t i = 0; i < oversample; ++i) {
                double t = static_cast<double>(i) / static_cast<double>(oversample - 1);
                pts[i] = Vec{t, 1.0 - std::sqrt(t) - t * std::sin(10.0 * kPi * t)};
            }
            auto keep = nondominated_filter_sorted(std::move(pts));
            while (keep.size() < n_points) keep.insert(keep.end(), keep.begin(), keep.end());
            return downsample(std::move(keep), n_points);
        }
        case Suite::ZDT6: {
            double lo = zdt6_f1_min();
            return curve([lo](double t) {
                double f1 = lo + (1.0 - lo) * t;
                return Vec{f1, 1.0 - f1 * f1};
            });
        }
    }
    throw std::logic_error("unreachable suite");
}

std::vector<Vec> latin_hypercube(std::size_t n, std::size_t dim,
                                 const Vec& lower, const Vec& upper, Rng& rng)
{
    std::vector<Vec> pts(n, Vec(dim));
    std::vector<std::size_t> perm(n);
    for (std::size_t d = 0; d < dim; ++d) {
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[rng.below(i)]);
        for (std::size_t i = 0; i < n; ++i) {
            double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
            pts[i][d] = lower[d] + (upper[d] - lower[d]) * u;
        }
    }
    return pts;
}

} // namespace np::bench
