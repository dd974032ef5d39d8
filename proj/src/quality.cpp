#include "np/quality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "np/parallel.hpp"

namespace np::quality {

namespace {

// keep only points strictly inside the box bounded by z; the rest have zero
// dominated measure
std::vector<Vec> clip_to_ref(const std::vector<Vec>& points, const Vec& z)
{
    std::vector<Vec> out;
    for (const auto& p : points) {
        if (p.size() != z.size())
            throw std::domain_error("hypervolume: point/ref length mismatch");
        bool inside = true;
        for (std::size_t m = 0; m < z.size(); ++m)
            if (!(p[m] < z[m])) { inside = false; break; }
        if (inside) out.push_back(p);
    }
    return out;
}

double hv2(std::vector<Vec> pts, double z1, double z2)
{
    std::sort(pts.begin(), pts.end());
    double hv = 0.0, best2 = z2;
    for (const auto& p : pts) {
        if (p[1] < best2) {
            hv += (z1 - p[0]) * (best2 - p[1]);
            best2 = p[1];
        }
    }
    return hv;
}

// dimension sweep on the last objective; slab between consecutive levels is
// the (M-1)-dim HV of everything at or below the lower level
double hv_sweep(std::vector<Vec> pts, const Vec& z)
{
    const std::size_t m_obj = z.size();
    if (m_obj == 2) return hv2(std::move(pts), z[0], z[1]);
    std::sort(pts.begin(), pts.end(), [m_obj](const Vec& a, const Vec& b) {
        return a[m_obj - 1] < b[m_obj - 1];
    });
    Vec z_low(z.begin(), z.end() - 1);
    double hv = 0.0;
    std::vector<Vec> active;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec proj(pts[i].begin(), pts[i].end() - 1);
        active.push_back(std::move(proj));
        double level = pts[i][m_obj - 1];
        double next = (i + 1 < pts.size()) ? pts[i + 1][m_obj - 1] : z[m_obj - 1];
        if (next > level) hv += hv_sweep(active, z_low) * (next - level);
    }
    return hv;
}

} // namespace

double igd(const std::vector<Vec>& solutions, const std::vector<Vec>& reference)
{
    if (solutions.empty() || reference.empty())
        throw std::domain_error("igd: empty point set");
    std::vector<double> dist(reference.size());
    parallel_for(reference.size(), [&](std::size_t r) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : solutions) {
            double d2 = 0.0;
            for (std::size_t m = 0; m < s.size(); ++m) {
                double d = reference[r][m] - s[m];
                d2 += d * d;
            }
            best = std::min(best, d2);
        }
        dist[r] = std::sqrt(best);
    });
    double sum = 0.0;
    for (double d : dist) sum += d;
    return sum / static_cast<double>(reference.size());
}

double hypervolume_exact(const std::vector<Vec>& points, const Vec& ref_point)
{
    auto pts = clip_to_ref(points, ref_point);
    if (pts.empty()) return 0.0;
    return hv_sweep(std::move(pts), ref_point);
}

double hypervolume_mc(const std::vector<Vec>& points, const HVConfig& cfg)
{
    const Vec& z = cfg.ref_point;
    auto pts = clip_to_ref(points, z);
    if (pts.empty()) return 0.0;
    const std::size_t m_obj = z.size();
    Vec lo(m_obj);
    for (std::size_t m = 0; m < m_obj; ++m) {
        lo[m] = pts[0][m];
        for (const auto& p : pts) lo[m] = std::min(lo[m], p[m]);
    }
    double box = 1.0;
    for (std::size_t m = 0; m < m_obj; ++m) box *= z[m] - lo[m];

    // sample i is a pure function of (seed, i): parallel chunks count hits
    // into their own slots, integer-summed serially afterwards
    const std::size_t n = cfg.mc_samples;
    const std::size_t chunk = 4096;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<std::uint64_t> hits(n_chunks, 0);
    parallel_for(n_chunks, [&](std::size_t c) {
        Rng rng(mix64(cfg.mc_seed ^ mix64(c + 1)));
        std::uint64_t h = 0;
        Vec u(m_obj);
        std::size_t first = c * chunk, last = std::min(n, first + chunk);
        for (std::size_t i = first; i < last; ++i) {
            for (std::size_t m = 0; m < m_obj; ++m)
                u[m] = lo[m] + (z[m] - lo[m]) * rng.uniform();
            for (const auto& p : pts) {
                bool dom = true;
                for (std::size_t m = 0; m < m_obj; ++m)
                    if (!(p[m] <= u[m])) { dom = false; break; }
                if (dom) { ++h; break; }
            }
        }
        hits[c] = h;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    return box * static_cast<double>(total) / static_cast<double>(n);
}

double hypervolume(const std::vector<Vec>& points, const HVConfig& cfg)
{
    if (cfg.ref_point.size() < 2)
        throw std::domain_error("hypervolume: M >= 2 required");
    if (cfg.ref_point.size() <= 3) return hypervolume_exact(points, cfg.ref_point);
    return hypervolume_mc(points, cfg);
}

double delta_hv(const std::vector<Vec>& points, const Vec& candidate, const HVConfig& cfg)
{
    double before = hypervolume(points, cfg);
    std::vector<Vec> joined(points);
    joined.push_back(candidate);
    double after = hypervolume(joined, cfg);
    return std::max(0.0, after - before);
}

CalibrationMetrics calibration_metrics(const std::vector<std::pair<double, bool>>& confidences,
                                       std::size_t bins)
{
    auto stats = reliability_bins(confidences, bins);
    const double n = static_cast<double>(confidences.size());
    CalibrationMetrics out;
    std::size_t nonempty = 0;
    for (const auto& b : stats) {
        if (b.count == 0) continue;
        double gap = std::abs(b.accuracy - b.confidence);
        out.ece += (static_cast<double>(b.count) / n) * gap;
        out.mce = std::max(out.mce, gap);
        out.ace += gap;
        ++nonempty;
    }
    if (nonempty > 0) out.ace /= static_cast<double>(nonempty);
    return out;
}

std::vector<BinStat> reliability_bins(const std::vector<std::pair<double, bool>>& confidences,
                                      std::size_t bins)
{
    if (confidences.empty()) throw std::domain_error("calibration_metrics: empty input");
    if (bins < 1) throw std::domain_error("calibration_metrics: bins >= 1 required");
    std::vector<BinStat> stats(bins);
    for (std::size_t b = 0; b < bins; ++b)
        stats[b].center = (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
    for (const auto& [conf, correct] : confidences) {
        auto b = static_cast<std::size_t>(conf * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;  // conf == 1.0 lands in the top bin
        stats[b].confidence += conf;
        stats[b].accuracy += correct ? 1.0 : 0.0;
        stats[b].count += 1;
    }
    for (auto& b : stats) {
        if (b.count == 0) continue;
        b.confidence /= static_cast<double>(b.count);
        b.accuracy /= static_cast<double>(b.count);
    }
    return stats;
}

double estimate_l_h(const bench::ProblemSpec& problem, const pareto::Archive& archive,
                    std::size_t n, double delta, const HVConfig& cfg, Rng& rng)
{
    if (n < 10) throw std::domain_error("estimate_l_h: N >= 10 required");
    if (!(delta > 0.0)) throw std::domain_error("estimate_l_h: delta > 0 required");
    auto front = archive.pareto_front_objectives();
    std::vector<double> ratios;
    ratios.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec x(problem.dim);
        for (std::size_t d = 0; d < problem.dim; ++d)
            x[d] = rng.uniform(problem.lower[d], problem.upper[d]);
        Vec y = bench::evaluate(problem, x);
        Vec yp(y);
        double norm1 = 0.0;
        for (std::size_t m = 0; m < y.size(); ++m) {
            yp[m] = y[m] * (1.0 + delta);
            norm1 += std::abs(y[m] - yp[m]);
        }
        if (norm1 <= 0.0) continue;  // degenerate perturbation
        double c0 = delta_hv(front, y, cfg);
        double c1 = delta_hv(front, yp, cfg);
        ratios.push_back(std::abs(c0 - c1) / norm1);
    }
    if (ratios.empty()) throw std::runtime_error("estimate_l_h: all perturbations degenerate");
    std::sort(ratios.begin(), ratios.end());
    auto idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(ratios.size()))) - 1;
    return ratios[std::min(idx, ratios.size() - 1)];
}

double estimate_h_max(const std::vector<std::vector<Vec>>& archive_scenarios,
                      std::size_t trials, const HVConfig& cfg, Rng& rng)
{
    if (archive_scenarios.empty() || trials < 1) return 0.0;
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto& scen = archive_scenarios[t % archive_scenarios.size()];
        if (scen.empty()) continue;
        std::size_t victim = rng.below(scen.size());
        double full = hypervolume(scen, cfg);
        std::vector<Vec> replaced;
        replaced.reserve(scen.size());
        for (std::size_t i = 0; i < scen.size(); ++i)
            replaced.push_back(i == victim ? cfg.ref_point : scen[i]);
        worst = std::max(worst, full - hypervolume(replaced, cfg));
    }
    return worst;
}

double estimate_rho(const std::vector<double>& oracle_gains,
                    const std::vector<double>& realized_gains)
{
    if (oracle_gains.size() != realized_gains.size() || oracle_gains.empty())
        throw std::domain_error("estimate_rho: gain lists must be nonempty and equal length");
    std::vector<double> ratios;
    for (std::size_t i = 0; i < oracle_gains.size(); ++i) {
        if (oracle_gains[i] <= 0.0) continue;
        ratios.push_back(realized_gains[i] / oracle_gains[i]);
    }
    if (ratios.empty()) throw std::runtime_error("estimate_rho: no positive oracle gains");
    std::sort(ratios.begin(), ratios.end());
    std::size_t n = ratios.size();
    return n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
}

std::size_t suggest_k(std::size_t budget, std::size_t n_min)
{
    if (n_min < 1 || budget < n_min)
        throw std::domain_error("suggest_k: B >= N_min >= 1 required");
    return budget / n_min;
}

} // namespace np::quality
