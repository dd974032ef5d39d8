#include "np/deepgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "np/parallel.hpp"

namespace np::deepgp {

namespace {

constexpr double kVarFloor = 1e-8;
constexpr double kLogNoiseMin = -12.0;
constexpr double kLogNoiseMax = 8.0;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Gauss-Hermite nodes/weights (physicists'), 7 points; weights normalized
// by 1/sqrt(pi) so they sum to one
struct GHRule {
    std::vector<double> t, w;
};

GHRule gh_rule(std::size_t nodes)
{
    static const double t7[] = {-2.6519613568352334924, -1.6735516287674714450,
                                -0.8162878828589646630, 0.0,
                                0.8162878828589646630, 1.6735516287674714450,
                                2.6519613568352334924};
    static const double w7[] = {9.7178124509951915415e-4, 5.4515582819127030592e-2,
                                4.2560725261012780052e-1, 8.1026461755680732676e-1,
                                4.2560725261012780052e-1, 5.4515582819127030592e-2,
                                9.7178124509951915415e-4};
    static const double t5[] = {-2.0201828704560856329, -0.9585724646138185072, 0.0,
                                0.9585724646138185072, 2.0201828704560856329};
    static const double w5[] = {1.9953242059045913208e-2, 3.9361932315224115983e-1,
                                9.4530872048294188123e-1, 3.9361932315224115983e-1,
                                1.9953242059045913208e-2};
    GHRule rule;
    const double* t = t7;
    const double* w = w7;
    std::size_t n = 7;
    if (nodes <= 5) { t = t5; w = w5; n = 5; }
    double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        rule.t.push_back(t[i]);
        rule.w.push_back(w[i] * inv_sqrt_pi);
    }
    return rule;
}

// --- dense lower-triangular linear algebra (row-major M x M) ---

bool cholesky(const Vec& a, std::size_t m, Vec& l)
{
    l.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * m + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) return false;
                l[i * m + i] = std::sqrt(s);
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    return true;
}

void solve_lower(const Vec& l, std::size_t m, const double* b, double* y)
{
    for (std::size_t i = 0; i < m; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * m + k] * y[k];
        y[i] = s / l[i * m + i];
    }
}

void solve_upper_t(const Vec& l, std::size_t m, const double* b, double* y)
{
    // solves L^T y = b
    for (std::size_t ii = m; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < m; ++k) s -= l[k * m + ii] * y[k];
        y[ii] = s / l[ii * m + ii];
    }
}

// reverse-mode Cholesky: given dF/dL, return symmetrized dF/dA where A=LL^T
Vec cholesky_backward(const Vec& l, const Vec& lbar, std::size_t m)
{
    // X = Phi(L^T Lbar): lower triangle, halved diagonal
    Vec x(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = std::max(i, j); k < m; ++k)
                s += l[k * m + i] * lbar[k * m + j];
            x[i * m + j] = (i == j) ? 0.5 * s : s;
        }
    }
    // W = L^{-T} X (column-wise)
    Vec w(m * m, 0.0), col(m), out(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < m; ++i) col[i] = x[i * m + j];
        solve_upper_t(l, m, col.data(), out.data());
        for (std::size_t i = 0; i < m; ++i) w[i * m + j] = out[i];
    }
    // Araw^T = L^{-T} W^T, i.e. solve per row of W
    Vec araw(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) col[j] = w[i * m + j];
        solve_upper_t(l, m, col.data(), out.data());
        for (std::size_t j = 0; j < m; ++j) araw[i * m + j] = out[j];
    }
    Vec abar(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            abar[i * m + j] = 0.5 * (araw[i * m + j] + araw[j * m + i]);
    return abar;
}

struct KernelScratch {
    Vec k_pure;  // M x M, no jitter
    Vec l;       // cholesky of K + jitter*I
    double jitter_used = 0.0;
};

double ard_kernel(const Vec& a, const Vec& b, const Vec& inv2l2, double s2)
{
    double q = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        double dx = a[d] - b[d];
        q += dx * dx * inv2l2[d];
    }
    return s2 * std::exp(-q);
}

void factor_kernel(const ObjectiveGP& gp, const SurrogateConfig& cfg, const Vec& inv2l2,
                   double s2, KernelScratch& ks)
{
    const std::size_t m = gp.z_inducing.size();
    ks.k_pure.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double v = ard_kernel(gp.z_inducing[i], gp.z_inducing[j], inv2l2, s2);
            ks.k_pure[i * m + j] = v;
            ks.k_pure[j * m + i] = v;
        }
    }
    double jitter = cfg.jitter;
    while (jitter <= 1e-4) {
        Vec a = ks.k_pure;
        for (std::size_t i = 0; i < m; ++i) a[i * m + i] += jitter;
        if (cholesky(a, m, ks.l)) {
            ks.jitter_used = jitter;
            return;
        }
        jitter *= 10.0;
    }
    throw std::runtime_error("deepgp: kernel factorization failed after jitter escalation");
}

} // namespace

namespace detail {

double kl_diag_standard(const Vec& mean, const Vec& log_var)
{
    double kl = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
        kl += std::exp(log_var[i]) + mean[i] * mean[i] - 1.0 - log_var[i];
    return 0.5 * kl;
}

ObjectiveGrads zero_grads(const ObjectiveGP& gp)
{
    ObjectiveGrads g;
    g.log_lengthscale.assign(gp.log_lengthscale.size(), 0.0);
    g.log_signal.assign(1, 0.0);
    g.v_mean.assign(gp.v_mean.size(), 0.0);
    g.v_log_var.assign(gp.v_log_var.size(), 0.0);
    g.mean_net = neural::zero_grads(gp.mean_net);
    g.w_mean.assign(gp.w_mean.size(), 0.0);
    g.w_log_var.assign(gp.w_log_var.size(), 0.0);
    g.noise_net = neural::zero_grads(gp.noise_net);
    g.const_log_noise.assign(1, 0.0);
    return g;
}

std::vector<Vec*> param_refs(ObjectiveGP& gp)
{
    std::vector<Vec*> out = {&gp.log_lengthscale, &gp.log_signal, &gp.v_mean, &gp.v_log_var,
                             &gp.w_mean, &gp.w_log_var, &gp.const_log_noise};
    for (auto* p : neural::param_refs(gp.mean_net)) out.push_back(p);
    for (auto* p : neural::param_refs(gp.noise_net)) out.push_back(p);
    return out;
}

std::vector<Vec*> grad_refs(ObjectiveGrads& g)
{
    std::vector<Vec*> out = {&g.log_lengthscale, &g.log_signal, &g.v_mean, &g.v_log_var,
                             &g.w_mean, &g.w_log_var, &g.const_log_noise};
    for (auto* p : neural::grad_refs_mut(g.mean_net)) out.push_back(p);
    for (auto* p : neural::grad_refs_mut(g.noise_net)) out.push_back(p);
    return out;
}

double elbo(const ObjectiveGP& gp, const Dataset& data, const SurrogateConfig& cfg,
            ObjectiveGrads* grads)
{
    const std::size_t n = data.x.size();
    const std::size_t m = gp.z_inducing.size();
    const std::size_t dim = gp.log_lengthscale.size();
    const std::size_t d_rff = gp.omega.size();
    const double s2 = std::exp(2.0 * gp.log_signal[0]);
    const double rff_scale = d_rff ? std::sqrt(2.0 / static_cast<double>(d_rff)) : 0.0;

    Vec inv2l2(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double ell = std::exp(gp.log_lengthscale[d]);
        inv2l2[d] = 0.5 / (ell * ell);
    }
    KernelScratch ks;
    factor_kernel(gp, cfg, inv2l2, s2, ks);

    Vec s_v(m), s_w(gp.w_log_var.size());
    for (std::size_t i = 0; i < m; ++i) s_v[i] = std::exp(gp.v_log_var[i]);
    for (std::size_t i = 0; i < s_w.size(); ++i) s_w[i] = std::exp(gp.w_log_var[i]);

    GHRule gh = gh_rule(cfg.gh_nodes);

    Vec lbar;
    if (grads) lbar.assign(m * m, 0.0);

    Vec kx(m), a(m), abar(m), kxbar(m);
    Vec zf, zbar, sins;
    if (cfg.two_layer) {
        zf.resize(d_rff);
        zbar.resize(d_rff);
        sins.resize(d_rff);
    }

    double total_ell = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const Vec& x = data.x[p];
        const double y = data.y[p];
        for (std::size_t i = 0; i < m; ++i)
            kx[i] = ard_kernel(x, gp.z_inducing[i], inv2l2, s2);
        solve_lower(ks.l, m, kx.data(), a.data());

        neural::ForwardCache mean_cache;
        Vec mean_out = neural::forward(gp.mean_net, x, nullptr, grads ? &mean_cache : nullptr);
        double mu1 = mean_out[0];
        double a_dot_v = 0.0, a_dot_a = 0.0, a2s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            a_dot_v += a[i] * gp.v_mean[i];
            a_dot_a += a[i] * a[i];
            a2s += a[i] * a[i] * s_v[i];
        }
        mu1 += a_dot_v;
        double raw_v1 = s2 - a_dot_a + a2s;
        bool at_floor = !(raw_v1 > kVarFloor);
        double v1 = at_floor ? kVarFloor : raw_v1;

        neural::ForwardCache noise_cache;
        double eta;
        if (cfg.heteroscedastic) {
            Vec no = neural::forward(gp.noise_net, x, nullptr, grads ? &noise_cache : nullptr);
            eta = no[0];
        } else {
            eta = gp.const_log_noise[0];
        }
        double eta_c = std::clamp(eta, kLogNoiseMin, kLogNoiseMax);
        double s2n = std::exp(eta_c);

        double mu1_bar = 0.0, v1_bar = 0.0, s2n_bar = 0.0;
        if (cfg.two_layer) {
            double sq = std::sqrt(2.0 * v1);
            for (std::size_t j = 0; j < gh.t.size(); ++j) {
                double h = mu1 + sq * gh.t[j];
                double mu2 = 0.0, v2 = 0.0;
                for (std::size_t i = 0; i < d_rff; ++i) {
                    double arg = gp.omega[i] * h + gp.phase[i];
                    double c = std::cos(arg);
                    zf[i] = rff_scale * c;
                    if (grads) sins[i] = std::sin(arg);
                    mu2 += gp.w_mean[i] * zf[i];
                    v2 += zf[i] * zf[i] * s_w[i];
                }
                double r = y - mu2;
                total_ell += gh.w[j] * (-0.5 * (kLog2Pi + eta_c) - (r * r + v2) / (2.0 * s2n));
                if (!grads) continue;
                double wj = gh.w[j];
                double dmu2 = wj * r / s2n;
                double dv2 = -wj / (2.0 * s2n);
                s2n_bar += wj * (-0.5 / s2n + (r * r + v2) / (2.0 * s2n * s2n));
                double h_bar = 0.0;
                for (std::size_t i = 0; i < d_rff; ++i) {
                    grads->w_mean[i] += dmu2 * zf[i];
                    grads->w_log_var[i] += dv2 * zf[i] * zf[i] * s_w[i];
                    double zb = dmu2 * gp.w_mean[i] + dv2 * 2.0 * zf[i] * s_w[i];
                    h_bar += zb * (-rff_scale * sins[i] * gp.omega[i]);
                }
                mu1_bar += h_bar;
                v1_bar += h_bar * gh.t[j] / sq;
            }
        } else {
            double r = y - mu1;
            total_ell += -0.5 * (kLog2Pi + eta_c) - (r * r + v1) / (2.0 * s2n);
            if (grads) {
                mu1_bar = r / s2n;
                v1_bar = -0.5 / s2n;
                s2n_bar = -0.5 / s2n + (r * r + v1) / (2.0 * s2n * s2n);
            }
        }

        if (!grads) continue;

        double eta_bar = (eta == eta_c) ? s2n_bar * s2n : 0.0;
        if (cfg.heteroscedastic)
            neural::backward(gp.noise_net, noise_cache, nullptr, Vec{eta_bar}, grads->noise_net);
        else
            grads->const_log_noise[0] += eta_bar;

        neural::backward(gp.mean_net, mean_cache, nullptr, Vec{mu1_bar}, grads->mean_net);

        double v1_pass = at_floor ? 0.0 : v1_bar;
        for (std::size_t i = 0; i < m; ++i) {
            grads->v_mean[i] += mu1_bar * a[i];
            grads->v_log_var[i] += v1_pass * a[i] * a[i] * s_v[i];
            abar[i] = mu1_bar * gp.v_mean[i] + v1_pass * (-2.0 * a[i] + 2.0 * a[i] * s_v[i]);
        }
        grads->log_signal[0] += v1_pass * 2.0 * s2;

        solve_upper_t(ks.l, m, abar.data(), kxbar.data());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                lbar[i * m + j] -= kxbar[i] * a[j];
        for (std::size_t i = 0; i < m; ++i) {
            double g = kxbar[i] * kx[i];
            grads->log_signal[0] += 2.0 * g;
            for (std::size_t d = 0; d < dim; ++d) {
                double dx = x[d] - gp.z_inducing[i][d];
                grads->log_lengthscale[d] += g * dx * dx * 2.0 * inv2l2[d];
            }
        }
    }

    double kl_v = kl_diag_standard(gp.v_mean, gp.v_log_var);
    double kl_w = cfg.two_layer ? kl_diag_standard(gp.w_mean, gp.w_log_var) : 0.0;

    if (grads) {
        Vec kbar = cholesky_backward(ks.l, lbar, m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                double g = kbar[i * m + j] * ks.k_pure[i * m + j];
                grads->log_signal[0] += 2.0 * g;
                for (std::size_t d = 0; d < dim; ++d) {
                    double dx = gp.z_inducing[i][d] - gp.z_inducing[j][d];
                    grads->log_lengthscale[d] += g * dx * dx * 2.0 * inv2l2[d];
                }
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            grads->v_mean[i] -= gp.v_mean[i];
            grads->v_log_var[i] -= 0.5 * (s_v[i] - 1.0);
        }
        if (cfg.two_layer) {
            for (std::size_t i = 0; i < gp.w_mean.size(); ++i) {
                grads->w_mean[i] -= gp.w_mean[i];
                grads->w_log_var[i] -= 0.5 * (s_w[i] - 1.0);
            }
        }
    }

    return total_ell - kl_v - kl_w;
}

double validation_ell(const ObjectiveGP& gp, const Dataset& val, const SurrogateConfig& cfg)
{
    if (val.x.empty()) return 0.0;
    // expected log-likelihood only; KL is data-size independent and would
    // distort the relative comparison the doubling rule makes
    double with_kl = elbo(gp, val, cfg, nullptr);
    double kl = kl_diag_standard(gp.v_mean, gp.v_log_var) +
                (cfg.two_layer ? kl_diag_standard(gp.w_mean, gp.w_log_var) : 0.0);
    return (with_kl + kl) / static_cast<double>(val.x.size());
}

void monitor_predict(const ObjectiveGP& gp, const Vec& x, const SurrogateConfig& cfg,
                     double& mean, double& var)
{
    const std::size_t m = gp.z_inducing.size();
    const std::size_t dim = gp.log_lengthscale.size();
    const double s2 = std::exp(2.0 * gp.log_signal[0]);
    Vec inv2l2(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double ell = std::exp(gp.log_lengthscale[d]);
        inv2l2[d] = 0.5 / (ell * ell);
    }
    Vec kx(m), a(m);
    for (std::size_t i = 0; i < m; ++i)
        kx[i] = ard_kernel(x, gp.z_inducing[i], inv2l2, s2);
    solve_lower(gp.l_chol, m, kx.data(), a.data());
    double mu1 = neural::forward(gp.mean_net, x)[0];
    double a_dot_a = 0.0, a2s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mu1 += a[i] * gp.v_mean[i];
        a_dot_a += a[i] * a[i];
        a2s += a[i] * a[i] * std::exp(gp.v_log_var[i]);
    }
    double v1 = std::max(s2 - a_dot_a + a2s, kVarFloor);

    double eta = cfg.heteroscedastic ? neural::forward(gp.noise_net, x)[0] : gp.const_log_noise[0];
    double s2n = std::exp(std::clamp(eta, kLogNoiseMin, kLogNoiseMax));

    if (!cfg.two_layer) {
        mean = mu1;
        var = v1 + s2n;
        return;
    }
    const std::size_t d_rff = gp.omega.size();
    const double rff_scale = std::sqrt(2.0 / static_cast<double>(d_rff));
    GHRule gh = gh_rule(cfg.gh_nodes);
    double sq = std::sqrt(2.0 * v1);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < gh.t.size(); ++j) {
        double h = mu1 + sq * gh.t[j];
        double mu2 = 0.0, v2 = 0.0;
        for (std::size_t i = 0; i < d_rff; ++i) {
            double z = rff_scale * std::cos(gp.omega[i] * h + gp.phase[i]);
            mu2 += gp.w_mean[i] * z;
            v2 += z * z * std::exp(gp.w_log_var[i]);
        }
        m1 += gh.w[j] * mu2;
        m2 += gh.w[j] * (mu2 * mu2 + v2);
    }
    mean = m1;
    var = std::max(m2 - m1 * m1, 0.0) + s2n;
}

} // namespace detail

std::vector<Vec> kmeans(const std::vector<Vec>& points, std::size_t k, Rng& rng,
                        std::size_t iters)
{
    const std::size_t n = points.size();
    k = std::min(k, n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    std::vector<Vec> centers(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t c = 0; c < k; ++c) centers[c] = points[idx[c]];

    std::vector<std::size_t> assign(n, 0);
    std::vector<double> dist(n, 0.0);
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double d2 = 0.0;
                for (std::size_t d = 0; d < points[i].size(); ++d) {
                    double dx = points[i][d] - centers[c][d];
                    d2 += dx * dx;
                }
                if (d2 < best) { best = d2; arg = c; }
            }
            assign[i] = arg;
            dist[i] = best;
        }
        std::vector<Vec> next(k, Vec(points[0].size(), 0.0));
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < points[i].size(); ++d) next[assign[i]][d] += points[i][d];
            ++count[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                // re-seed an empty cluster with the worst-covered point
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (dist[i] > dist[far]) far = i;
                next[c] = points[far];
                dist[far] = 0.0;
                continue;
            }
            for (auto& v : next[c]) v /= static_cast<double>(count[c]);
        }
        centers = std::move(next);
    }
    return centers;
}

Vec SurrogateModel::normalize(const Vec& x) const
{
    Vec out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        double span = upper_[d] - lower_[d];
        out[d] = span > 0.0 ? (x[d] - lower_[d]) / span : 0.0;
    }
    return out;
}

detail::Dataset SurrogateModel::make_dataset(const pareto::Archive& archive, std::size_t m) const
{
    detail::Dataset data;
    data.x.reserve(archive.size());
    data.y.reserve(archive.size());
    const auto& gp = objectives_[m];
    for (const auto& s : archive.samples()) {
        data.x.push_back(normalize(s.x));
        data.y.push_back((s.f[m] - gp.y_mean) / gp.y_std);
    }
    return data;
}

SurrogateModel SurrogateModel::init(const SurrogateConfig& cfg, const Vec& lower, const Vec& upper,
                                    const pareto::Archive& archive, Rng& rng)
{
    if (archive.size() < 2)
        throw std::runtime_error("init_surrogate: archive must hold at least 2 samples");
    if (cfg.d_rff % 2 != 0)
        throw std::invalid_argument("init_surrogate: d_rff must be even");
    SurrogateModel model;
    model.cfg_ = cfg;
    model.lower_ = lower;
    model.upper_ = upper;

    const std::size_t n_obj = archive.samples().front().f.size();
    const std::size_t dim = lower.size();

    std::vector<Vec> xn;
    xn.reserve(archive.size());
    for (const auto& s : archive.samples()) {
        Vec v(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double span = upper[d] - lower[d];
            v[d] = span > 0.0 ? (s.x[d] - lower[d]) / span : 0.0;
        }
        xn.push_back(std::move(v));
    }
    Rng km_rng = rng.split(0x6b6d65616e73ULL);
    std::vector<Vec> centers = kmeans(xn, cfg.m_inducing, km_rng);
    model.cfg_.m_inducing = centers.size();

    for (std::size_t m = 0; m < n_obj; ++m) {
        Rng orng = rng.split(0x0b9 + m);
        ObjectiveGP gp;
        gp.z_inducing = centers;
        gp.log_lengthscale.assign(dim, std::log(0.3));
        gp.log_signal.assign(1, 0.0);
        gp.v_mean.assign(centers.size(), 0.0);
        gp.v_log_var.assign(centers.size(), 0.0);
        gp.mean_net = neural::make_mlp(dim, {{32, true, false, 0.0},
                                             {16, false, false, 0.0},
                                             {1, false, false, 0.0}}, orng);
        gp.noise_net = neural::make_mlp(dim, {{32, true, false, 0.0},
                                              {16, false, false, 0.0},
                                              {1, false, false, 0.0}}, orng);
        // start from a low-noise prior on the standardized scale; a unit
        // initial variance would let the likelihood explain the signal away
        // while the aleatoric stage is frozen
        gp.noise_net.layers.back().b[0] = std::log(0.01);
        gp.const_log_noise.assign(1, std::log(0.01));
        gp.omega.resize(cfg.d_rff);
        gp.phase.resize(cfg.d_rff);
        for (std::size_t i = 0; i < cfg.d_rff; ++i) {
            gp.omega[i] = orng.normal();
            gp.phase[i] = orng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        gp.w_mean.assign(cfg.d_rff, 0.0);
        gp.w_log_var.assign(cfg.d_rff, 0.0);

        double mean = 0.0;
        for (const auto& s : archive.samples()) mean += s.f[m];
        mean /= static_cast<double>(archive.size());
        double var = 0.0;
        for (const auto& s : archive.samples()) var += (s.f[m] - mean) * (s.f[m] - mean);
        var /= static_cast<double>(archive.size());
        gp.y_mean = mean;
        gp.y_std = std::max(std::sqrt(var), 1e-12);

        model.objectives_.push_back(std::move(gp));
    }
    model.finalize();
    return model;
}

void SurrogateModel::finalize()
{
    for (auto& gp : objectives_) {
        const std::size_t m = gp.z_inducing.size();
        const std::size_t dim = gp.log_lengthscale.size();
        const double s2 = std::exp(2.0 * gp.log_signal[0]);
        Vec inv2l2(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double ell = std::exp(gp.log_lengthscale[d]);
            inv2l2[d] = 0.5 / (ell * ell);
        }
        KernelScratch ks;
        factor_kernel(gp, cfg_, inv2l2, s2, ks);
        gp.l_chol = ks.l;
        gp.whitened_mean.assign(m, 0.0);
        solve_upper_t(gp.l_chol, m, gp.v_mean.data(), gp.whitened_mean.data());
        double slope2 = 0.0;
        for (std::size_t i = 0; i < gp.omega.size(); ++i)
            slope2 += gp.w_mean[i] * gp.w_mean[i] * gp.omega[i] * gp.omega[i];
        gp.slope2 = gp.omega.empty() ? 0.0 : slope2 / static_cast<double>(gp.omega.size());
    }
}

FitReport SurrogateModel::fit(const pareto::Archive& archive, FitMode mode,
                              bool freeze_aleatoric, Rng& rng)
{
    const std::size_t n = archive.size();
    const std::size_t n_obj = objectives_.size();
    FitReport report;
    report.refit_kind = mode;

    std::vector<detail::Dataset> data(n_obj), val(n_obj);
    const std::size_t n_val = std::max<std::size_t>(1, n / 5);
    for (std::size_t m = 0; m < n_obj; ++m) {
        data[m] = make_dataset(archive, m);
        val[m].x.assign(data[m].x.end() - static_cast<std::ptrdiff_t>(n_val), data[m].x.end());
        val[m].y.assign(data[m].y.end() - static_cast<std::ptrdiff_t>(n_val), data[m].y.end());
    }

    // inducing adaptation: double (and re-run k-means) only when the
    // validation signal dropped more than the tolerance since the last fit
    if (has_val_ell_ && cfg_.m_inducing < n) {
        double cur = 0.0;
        for (std::size_t m = 0; m < n_obj; ++m)
            cur += detail::validation_ell(objectives_[m], val[m], cfg_);
        cur /= static_cast<double>(n_obj);
        if (cur < last_val_ell_ - cfg_.elbo_drop_tol * std::abs(last_val_ell_)) {
            cfg_.m_inducing = std::min(2 * cfg_.m_inducing, n);
            Rng km_rng = rng.split(0x646f75626cULL ^ fits_done_);
            std::vector<Vec> xn = data[0].x;
            auto centers = kmeans(xn, cfg_.m_inducing, km_rng);
            cfg_.m_inducing = centers.size();
            for (auto& gp : objectives_) {
                gp.z_inducing = centers;
                gp.v_mean.assign(centers.size(), 0.0);
                gp.v_log_var.assign(centers.size(), 0.0);
            }
            report.inducing_doubled = true;
        }
    }
    report.inducing_count = cfg_.m_inducing;

    const std::size_t max_epochs = mode == FitMode::warm_bounded ? cfg_.warm_epochs
                                                                 : cfg_.full_epochs;

    // per-objective optimizer state; epochs run in lockstep so the report's
    // trace is the total ELBO per epoch. Adam moments persist across warm
    // fits and are rebuilt when parameter shapes change (inducing doubling).
    struct Opt {
        std::vector<Vec*> params;
        std::size_t noise_first = 0, noise_count = 0;
    };
    std::vector<Opt> opts(n_obj);
    if (adam_.size() != n_obj) adam_.assign(n_obj, neural::AdamState{});
    for (std::size_t m = 0; m < n_obj; ++m) {
        opts[m].params = detail::param_refs(objectives_[m]);
        bool shapes_ok = adam_[m].m.size() == opts[m].params.size();
        for (std::size_t t = 0; shapes_ok && t < opts[m].params.size(); ++t)
            shapes_ok = adam_[m].m[t].size() == opts[m].params[t]->size();
        if (!shapes_ok) {
            std::vector<const Vec*> cp(opts[m].params.begin(), opts[m].params.end());
            adam_[m] = neural::make_adam(cp, cfg_.lr);
        }
        adam_[m].lr = cfg_.lr;
        // noise parameters sit at fixed positions: const_log_noise is index 6,
        // noise_net tensors are the final 2*layers entries
        opts[m].noise_first = opts[m].params.size() - 2 * objectives_[m].noise_net.layers.size();
        opts[m].noise_count = 2 * objectives_[m].noise_net.layers.size();
    }

    Vec epoch_elbo(n_obj, 0.0);
    std::vector<detail::ObjectiveGrads> grads(n_obj);
    auto eval_all = [&](bool with_grads) {
        parallel_for(n_obj, [&](std::size_t m) {
            if (with_grads) {
                grads[m] = detail::zero_grads(objectives_[m]);
                epoch_elbo[m] = detail::elbo(objectives_[m], data[m], cfg_, &grads[m]);
            } else {
                epoch_elbo[m] = detail::elbo(objectives_[m], data[m], cfg_, nullptr);
            }
        });
        double total = 0.0;
        for (double v : epoch_elbo) total += v;
        return total;
    };

    double initial = eval_all(false);
    report.initial_elbo = initial;
    double best = initial;
    std::vector<std::vector<Vec>> best_params(n_obj);
    auto snapshot = [&]() {
        for (std::size_t m = 0; m < n_obj; ++m) {
            best_params[m].clear();
            for (auto* p : opts[m].params) best_params[m].push_back(*p);
        }
    };
    snapshot();

    auto val_nlpd = [&]() {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t m = 0; m < n_obj; ++m) {
            for (std::size_t i = 0; i < val[m].x.size(); ++i) {
                double mean, var;
                detail::monitor_predict(objectives_[m], val[m].x[i], cfg_, mean, var);
                double r = val[m].y[i] - mean;
                acc += 0.5 * (kLog2Pi + std::log(var)) + r * r / (2.0 * var);
                ++cnt;
            }
        }
        return cnt ? acc / static_cast<double>(cnt) : 0.0;
    };

    double prev_nlpd = std::numeric_limits<double>::infinity();
    std::size_t nlpd_streak = 0, flat_streak = 0;
    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        eval_all(true);
        for (std::size_t m = 0; m < n_obj; ++m) {
            auto grefs = detail::grad_refs(grads[m]);
            if (freeze_aleatoric) {
                grads[m].const_log_noise.assign(1, 0.0);
                for (std::size_t t = opts[m].noise_first;
                     t < opts[m].noise_first + opts[m].noise_count; ++t)
                    std::fill(grefs[t]->begin(), grefs[t]->end(), 0.0);
            }
            // ascent on the ELBO
            for (auto* g : grefs)
                for (auto& v : *g) v = -v;
            std::vector<const Vec*> cg(grefs.begin(), grefs.end());
            neural::adam_step(opts[m].params, cg, adam_[m]);
        }
        double cur = eval_all(false);
        report.elbo_trace.push_back(cur);
        report.epochs_run += 1;
        double improvement = cur - best;
        if (cur > best) {
            best = cur;
            snapshot();
        }
        finalize();
        if (mode == FitMode::full_refit) {
            // stop once improvement over the best sits below the tolerance
            // for a few epochs (single transient dips do not count)
            if (improvement < cfg_.elbo_rel_tol * std::abs(best)) ++flat_streak;
            else flat_streak = 0;
            double nlpd_now = val_nlpd();
            if (nlpd_now > prev_nlpd) ++nlpd_streak;
            else nlpd_streak = 0;
            prev_nlpd = nlpd_now;
            if (epoch >= 4 && (flat_streak >= 3 || nlpd_streak >= cfg_.nlpd_patience)) break;
        }
    }

    // restore the best snapshot seen during the fit
    for (std::size_t m = 0; m < n_obj; ++m)
        for (std::size_t t = 0; t < opts[m].params.size(); ++t)
            *opts[m].params[t] = best_params[m][t];
    finalize();
    report.final_elbo = best;

    double vell = 0.0;
    for (std::size_t m = 0; m < n_obj; ++m)
        vell += detail::validation_ell(objectives_[m], val[m], cfg_);
    last_val_ell_ = vell / static_cast<double>(n_obj);
    has_val_ell_ = true;
    fits_done_ += 1;
    return report;
}

SurrogatePrediction SurrogateModel::predict(const Vec& x, std::size_t s_gp,
                                            const Rng& stream) const
{
    if (!fitted()) throw std::runtime_error("predict: surrogate not fitted");
    const std::size_t n_obj = objectives_.size();
    SurrogatePrediction out;
    out.f_hat.resize(n_obj);
    out.u_ep.resize(n_obj);
    out.u_al.resize(n_obj);
    Vec xn = normalize(x);
    for (std::size_t m = 0; m < n_obj; ++m) {
        const auto& gp = objectives_[m];
        const std::size_t mi = gp.z_inducing.size();
        const std::size_t dim = gp.log_lengthscale.size();
        const double s2 = std::exp(2.0 * gp.log_signal[0]);
        Vec inv2l2(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double ell = std::exp(gp.log_lengthscale[d]);
            inv2l2[d] = 0.5 / (ell * ell);
        }
        Vec kx(mi), a(mi);
        for (std::size_t i = 0; i < mi; ++i)
            kx[i] = ard_kernel(xn, gp.z_inducing[i], inv2l2, s2);
        solve_lower(gp.l_chol, mi, kx.data(), a.data());
        double mu1 = neural::forward(gp.mean_net, xn)[0];
        double a_dot_a = 0.0, a2s = 0.0;
        for (std::size_t i = 0; i < mi; ++i) {
            mu1 += a[i] * gp.v_mean[i];
            a_dot_a += a[i] * a[i];
            a2s += a[i] * a[i] * std::exp(gp.v_log_var[i]);
        }
        double v1 = std::max(s2 - a_dot_a + a2s, kVarFloor);

        double eta = cfg_.heteroscedastic ? neural::forward(gp.noise_net, xn)[0]
                                          : gp.const_log_noise[0];
        double s2n = std::exp(std::clamp(eta, kLogNoiseMin, kLogNoiseMax));

        double f_std, ep_std;
        if (!cfg_.two_layer) {
            f_std = mu1;
            ep_std = v1;
        } else {
            const std::size_t d_rff = gp.omega.size();
            const double rff_scale = std::sqrt(2.0 / static_cast<double>(d_rff));
            Rng local = stream.split(0xf00d + m);
            double sum_mu = 0.0, sum_mu2 = 0.0, sum_v2 = 0.0;
            for (std::size_t s = 0; s < s_gp; ++s) {
                double h = mu1 + std::sqrt(v1) * local.normal();
                double mu2 = 0.0, v2 = 0.0;
                for (std::size_t i = 0; i < d_rff; ++i) {
                    double z = rff_scale * std::cos(gp.omega[i] * h + gp.phase[i]);
                    mu2 += gp.w_mean[i] * z;
                    v2 += z * z * std::exp(gp.w_log_var[i]);
                }
                sum_mu += mu2;
                sum_mu2 += mu2 * mu2;
                sum_v2 += v2;
            }
            double inv = 1.0 / static_cast<double>(s_gp);
            f_std = sum_mu * inv;
            double var_means = std::max(sum_mu2 * inv - f_std * f_std, 0.0);
            ep_std = var_means + sum_v2 * inv;
        }
        out.f_hat[m] = f_std * gp.y_std + gp.y_mean;
        out.u_ep[m] = ep_std * gp.y_std * gp.y_std;
        out.u_al[m] = s2n * gp.y_std * gp.y_std;
    }
    return out;
}

ProxyPrediction SurrogateModel::proxy_predict(const Vec& x) const
{
    if (!fitted()) throw std::runtime_error("proxy_predict: surrogate not fitted");
    ProxyPrediction out;
    out.means.resize(objectives_.size());
    out.coarse_var = 0.0;
    Vec xn = normalize(x);
    for (std::size_t m = 0; m < objectives_.size(); ++m) {
        const auto& gp = objectives_[m];
        const std::size_t mi = gp.z_inducing.size();
        const std::size_t dim = gp.log_lengthscale.size();
        const double s2 = std::exp(2.0 * gp.log_signal[0]);
        Vec inv2l2(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double ell = std::exp(gp.log_lengthscale[d]);
            inv2l2[d] = 0.5 / (ell * ell);
        }
        Vec kx(mi), a(mi);
        for (std::size_t i = 0; i < mi; ++i)
            kx[i] = ard_kernel(xn, gp.z_inducing[i], inv2l2, s2);
        solve_lower(gp.l_chol, mi, kx.data(), a.data());
        double mu1 = neural::forward(gp.mean_net, xn)[0];
        double a_dot_a = 0.0, a2s = 0.0;
        for (std::size_t i = 0; i < mi; ++i) {
            mu1 += a[i] * gp.v_mean[i];
            a_dot_a += a[i] * a[i];
            a2s += a[i] * a[i] * std::exp(gp.v_log_var[i]);
        }
        double v1 = std::max(s2 - a_dot_a + a2s, kVarFloor);

        if (!cfg_.two_layer) {
            out.means[m] = mu1 * gp.y_std + gp.y_mean;
            out.coarse_var += v1 * gp.y_std * gp.y_std;
            continue;
        }
        const std::size_t d_rff = gp.omega.size();
        const double rff_scale = std::sqrt(2.0 / static_cast<double>(d_rff));
        double mu2 = 0.0;
        for (std::size_t i = 0; i < d_rff; ++i)
            mu2 += gp.w_mean[i] * rff_scale * std::cos(gp.omega[i] * mu1 + gp.phase[i]);
        out.means[m] = mu2 * gp.y_std + gp.y_mean;
        out.coarse_var += gp.slope2 * v1 * gp.y_std * gp.y_std;
    }
    return out;
}

std::vector<SurrogatePrediction> SurrogateModel::predict_batch(const std::vector<Vec>& xs,
                                                               std::size_t s_gp,
                                                               std::uint64_t seed) const
{
    std::vector<SurrogatePrediction> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) {
        std::uint64_t key = hash_doubles(xs[i].data(), xs[i].size(), seed);
        Rng stream(mix64(key));
        out[i] = predict(xs[i], s_gp, stream);
    });
    return out;
}

std::vector<ProxyPrediction> SurrogateModel::proxy_batch(const std::vector<Vec>& xs) const
{
    std::vector<ProxyPrediction> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = proxy_predict(xs[i]); });
    return out;
}

double SurrogateModel::nlpd(const std::vector<Sample>& holdout) const
{
    if (holdout.empty()) throw std::domain_error("nlpd: empty holdout");
    double acc = 0.0;
    std::size_t cnt = 0;
    for (const auto& s : holdout) {
        std::uint64_t key = hash_doubles(s.x.data(), s.x.size(), 0x6e6c7064ULL);
        Rng stream(mix64(key));
        auto pred = predict(s.x, cfg_.s_gp, stream);
        for (std::size_t m = 0; m < pred.f_hat.size(); ++m) {
            double var = pred.u_ep[m] + pred.u_al[m];
            double r = s.f[m] - pred.f_hat[m];
            acc += 0.5 * (kLog2Pi + std::log(var)) + r * r / (2.0 * var);
            ++cnt;
        }
    }
    return acc / static_cast<double>(cnt);
}

double SurrogateModel::predict_flop_estimate(const SurrogateConfig& cfg, std::size_t dim)
{
    const double trig = 15.0;  // cos/sin/exp weight in the cost model
    double mi = static_cast<double>(cfg.m_inducing);
    double rff = static_cast<double>(cfg.d_rff);
    double nets = 2.0 * (2.0 * (static_cast<double>(dim) * 32.0 + 32.0 * 16.0 + 16.0));
    double layer1 = mi * (3.0 * static_cast<double>(dim) + trig) + mi * mi + 6.0 * mi;
    double per_sample = rff * (2.0 + trig) + 4.0 * rff + 2.0 * trig;
    return nets + layer1 + static_cast<double>(cfg.s_gp) * per_sample;
}

double SurrogateModel::proxy_flop_estimate(const SurrogateConfig& cfg, std::size_t dim)
{
    const double trig = 15.0;
    double mi = static_cast<double>(cfg.m_inducing);
    double rff = static_cast<double>(cfg.d_rff);
    double net = 2.0 * (static_cast<double>(dim) * 32.0 + 32.0 * 16.0 + 16.0);  // mean net only
    double layer1 = mi * (3.0 * static_cast<double>(dim) + trig) + mi * mi + 6.0 * mi;
    double layer2 = rff * (2.0 + trig) + 2.0 * rff + 2.0;
    return net + layer1 + layer2;
}

std::string SurrogateModel::to_json() const
{
    nlohmann::json root;
    root["m_inducing"] = cfg_.m_inducing;
    root["d_rff"] = cfg_.d_rff;
    root["s_gp"] = cfg_.s_gp;
    root["lr"] = cfg_.lr;
    root["warm_epochs"] = cfg_.warm_epochs;
    root["full_epochs"] = cfg_.full_epochs;
    root["elbo_rel_tol"] = cfg_.elbo_rel_tol;
    root["elbo_drop_tol"] = cfg_.elbo_drop_tol;
    root["nlpd_patience"] = cfg_.nlpd_patience;
    root["gh_nodes"] = cfg_.gh_nodes;
    root["jitter"] = cfg_.jitter;
    root["two_layer"] = cfg_.two_layer;
    root["heteroscedastic"] = cfg_.heteroscedastic;
    root["lower"] = lower_;
    root["upper"] = upper_;
    root["fits_done"] = fits_done_;
    root["has_val_ell"] = has_val_ell_;
    root["last_val_ell"] = last_val_ell_;
    root["objectives"] = nlohmann::json::array();
    for (const auto& gp : objectives_) {
        nlohmann::json o;
        o["z_inducing"] = gp.z_inducing;
        o["log_lengthscale"] = gp.log_lengthscale;
        o["log_signal"] = gp.log_signal;
        o["v_mean"] = gp.v_mean;
        o["v_log_var"] = gp.v_log_var;
        o["mean_net"] = nlohmann::json::parse(neural::mlp_to_json(gp.mean_net));
        o["omega"] = gp.omega;
        o["phase"] = gp.phase;
        o["w_mean"] = gp.w_mean;
        o["w_log_var"] = gp.w_log_var;
        o["noise_net"] = nlohmann::json::parse(neural::mlp_to_json(gp.noise_net));
        o["const_log_noise"] = gp.const_log_noise;
        o["y_mean"] = gp.y_mean;
        o["y_std"] = gp.y_std;
        root["objectives"].push_back(std::move(o));
    }
    return root.dump();
}

SurrogateModel SurrogateModel::from_json(const std::string& text)
{
    nlohmann::json root = nlohmann::json::parse(text);
    SurrogateModel model;
    model.cfg_.m_inducing = root.at("m_inducing").get<std::size_t>();
    model.cfg_.d_rff = root.at("d_rff").get<std::size_t>();
    model.cfg_.s_gp = root.at("s_gp").get<std::size_t>();
    model.cfg_.lr = root.at("lr").get<double>();
    model.cfg_.warm_epochs = root.at("warm_epochs").get<std::size_t>();
    model.cfg_.full_epochs = root.at("full_epochs").get<std::size_t>();
    model.cfg_.elbo_rel_tol = root.at("elbo_rel_tol").get<double>();
    model.cfg_.elbo_drop_tol = root.at("elbo_drop_tol").get<double>();
    model.cfg_.nlpd_patience = root.at("nlpd_patience").get<std::size_t>();
    model.cfg_.gh_nodes = root.at("gh_nodes").get<std::size_t>();
    model.cfg_.jitter = root.at("jitter").get<double>();
    model.cfg_.two_layer = root.at("two_layer").get<bool>();
    model.cfg_.heteroscedastic = root.at("heteroscedastic").get<bool>();
    model.lower_ = root.at("lower").get<Vec>();
    model.upper_ = root.at("upper").get<Vec>();
    model.fits_done_ = root.at("fits_done").get<std::size_t>();
    model.has_val_ell_ = root.at("has_val_ell").get<bool>();
    model.last_val_ell_ = root.at("last_val_ell").get<double>();
    for (const auto& o : root.at("objectives")) {
        ObjectiveGP gp;
        gp.z_inducing = o.at("z_inducing").get<std::vector<Vec>>();
        gp.log_lengthscale = o.at("log_lengthscale").get<Vec>();
        gp.log_signal = o.at("log_signal").get<Vec>();
        gp.v_mean = o.at("v_mean").get<Vec>();
        gp.v_log_var = o.at("v_log_var").get<Vec>();
        gp.mean_net = neural::mlp_from_json(o.at("mean_net").dump());
        gp.omega = o.at("omega").get<Vec>();
        gp.phase = o.at("phase").get<Vec>();
        gp.w_mean = o.at("w_mean").get<Vec>();
        gp.w_log_var = o.at("w_log_var").get<Vec>();
        gp.noise_net = neural::mlp_from_json(o.at("noise_net").dump());
        gp.const_log_noise = o.at("const_log_noise").get<Vec>();
        gp.y_mean = o.at("y_mean").get<double>();
        gp.y_std = o.at("y_std").get<double>();
        model.objectives_.push_back(std::move(gp));
    }
    model.finalize();
    return model;
}

} // namespace np::deepgp
