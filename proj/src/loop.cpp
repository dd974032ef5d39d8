#include "np/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <cstdlib>
#include <cstdio>

#include "np/parallel.hpp"

namespace np::loop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Vec zscore(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / static_cast<double>(v.size()));
    Vec out(v.size());
    if (sd < 1e-12) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
    return out;
}

// greedy pick by descending score with an L-inf dedup in normalized space
std::vector<std::size_t> greedy_pick(const std::vector<Vec>& candidates,
                                     const std::vector<double>& scores, std::size_t q,
                                     const bench::ProblemSpec& problem)
{
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    auto normalized = [&](const Vec& x, std::size_t d) {
        double span = problem.upper[d] - problem.lower[d];
        return span > 0.0 ? (x[d] - problem.lower[d]) / span : 0.0;
    };
    std::vector<std::size_t> picked;
    for (std::size_t idx : order) {
        if (picked.size() == q) break;
        bool duplicate = false;
        for (std::size_t p : picked) {
            double linf = 0.0;
            for (std::size_t d = 0; d < candidates[idx].size(); ++d)
                linf = std::max(linf,
                                std::abs(normalized(candidates[idx], d) - normalized(candidates[p], d)));
            if (linf < 1e-6) { duplicate = true; break; }
        }
        if (!duplicate) picked.push_back(idx);
    }
    return picked;
}

struct RunModes {
    bool random = false;
    bool static_acq = false;
    std::set<Ablation> disable;
};

quality::HVConfig fix_reference(const pareto::Archive& archive, const std::vector<Vec>& front)
{
    const std::size_t m_obj = archive.samples().front().f.size();
    Vec z(m_obj, -std::numeric_limits<double>::infinity());
    auto fold = [&](const Vec& f) {
        for (std::size_t m = 0; m < m_obj; ++m) z[m] = std::max(z[m], f[m]);
    };
    for (const auto& s : archive.samples()) fold(s.f);
    for (const auto& f : front) fold(f);
    for (auto& v : z) v *= 1.1;
    quality::HVConfig cfg;
    cfg.ref_point = z;
    return cfg;
}

// stratified 80/20 split by label; the smaller side is the calibration set
void calibration_split(const std::vector<Vec>& xs, const std::vector<std::size_t>& labels,
                       std::size_t n_ranks, Rng& rng,
                       std::vector<Vec>& train_x, std::vector<std::size_t>& train_y,
                       std::vector<Vec>& cal_x, std::vector<std::size_t>& cal_y)
{
    train_x.clear(); train_y.clear(); cal_x.clear(); cal_y.clear();
    for (std::size_t lab = 1; lab <= n_ranks; ++lab) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == lab) idx.push_back(i);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        std::size_t n_cal = idx.size() / 5;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < n_cal) { cal_x.push_back(xs[idx[i]]); cal_y.push_back(lab); }
            else { train_x.push_back(xs[idx[i]]); train_y.push_back(lab); }
        }
    }
}

RunResult run_impl(const bench::ProblemSpec& problem, const LoopConfig& config,
                   std::uint64_t seed, const RunModes& modes,
                   const std::array<double, 6>& static_weights)
{
    config.validate(problem.dim);
    const std::size_t dim = problem.dim;
    const std::size_t m_obj = problem.n_obj;
    const std::size_t n_ranks = config.n_ranks;
    const bool ab_uncertainty = modes.disable.count(Ablation::uncertainty) > 0;
    const bool ab_deepgp = modes.disable.count(Ablation::deepgp) > 0;
    const bool ab_temp = modes.disable.count(Ablation::temp_scaling) > 0;
    const bool use_static = modes.static_acq || modes.disable.count(Ablation::learned_acq) > 0;
    const std::array<double, 6> weights =
        modes.disable.count(Ablation::learned_acq) ? std::array<double, 6>{1.0, 0.3, 0.0, 0.3, 0.0, 0.0}
                                                   : static_weights;

    rankclf::MCConfig mc = config.mc;
    if (ab_uncertainty) { mc.s0 = 1; mc.s_max = 1; }
    deepgp::SurrogateConfig surr_cfg = config.surrogate;
    if (ab_deepgp) { surr_cfg.two_layer = false; surr_cfg.heteroscedastic = false; }

    Rng root(seed);
    RunResult result;
    result.seed = seed;

    auto ref_front = bench::reference_front(problem, config.effective_front(m_obj));

    const std::size_t init_n = std::min(config.effective_init(dim), config.budget);
    Rng design_rng = root.split(0x6c687300ULL);
    auto xs = bench::latin_hypercube(init_n, dim, problem.lower, problem.upper, design_rng);
    auto fs = bench::evaluate_batch(problem, xs);
    std::vector<Sample> batch(init_n);
    for (std::size_t i = 0; i < init_n; ++i) batch[i] = {xs[i], fs[i], 0};
    result.archive.insert(std::move(batch));
    std::size_t evals = init_n;

    quality::HVConfig hv_cfg = fix_reference(result.archive, ref_front);
    result.hv_ref_point = hv_cfg.ref_point;

    auto metrics_row = [&](std::size_t iteration, double mean_s, const std::string& refit,
                           std::size_t epochs, double acq_loss, double secs) {
        IterationRow row;
        row.iteration = iteration;
        row.evals = evals;
        row.hv = quality::hypervolume(result.archive.pareto_front_objectives(), hv_cfg);
        row.igd = quality::igd(result.archive.pareto_front_objectives(), ref_front);
        row.mean_s_used = mean_s;
        row.refit = refit;
        row.epochs = epochs;
        row.acq_loss = acq_loss;
        row.seconds = secs;
        result.rows.push_back(row);
    };

    auto t0 = Clock::now();
    metrics_row(0, 0.0, "none", 0, 0.0, seconds_since(t0));

    if (modes.random) {
        result.mode = "random";
        std::size_t iteration = 0;
        Rng draw = root.split(0x72616e64ULL);
        while (evals < config.budget) {
            auto tic = Clock::now();
            ++iteration;
            std::size_t q_now = std::min(config.batch_q, config.budget - evals);
            std::vector<Vec> cand(q_now, Vec(dim));
            for (auto& c : cand)
                for (std::size_t d = 0; d < dim; ++d)
                    c[d] = draw.uniform(problem.lower[d], problem.upper[d]);
            auto cf = bench::evaluate_batch(problem, cand);
            std::vector<Sample> b(q_now);
            for (std::size_t i = 0; i < q_now; ++i) b[i] = {cand[i], cf[i], 0};
            result.archive.insert(std::move(b));
            evals += q_now;
            metrics_row(iteration, 0.0, "none", 0, 0.0, seconds_since(tic));
        }
        result.final_hv = result.rows.back().hv;
        result.final_igd = result.rows.back().igd;
        return result;
    }

    result.mode = use_static ? "static" : "neuropareto";
    if (!modes.disable.empty()) result.mode = "ablation";

    Rng clf_init_rng = root.split(0x636c66ULL);
    rankclf::ClassifierModel clf = rankclf::make_classifier(
        dim, n_ranks, problem.lower, problem.upper, config.classifier, clf_init_rng);
    Rng clf_rng = root.split(0x636c663200ULL);
    rankclf::PredictionCache cache;

    deepgp::SurrogateModel surrogate;
    Rng surr_rng = root.split(0x676175737300ULL);

    Rng acq_init_rng = root.split(0x61637100ULL);
    acq::AcqNet acq_net = acq::make_acq_net(acq::feature_width(m_obj, n_ranks),
                                            config.acquisition, acq_init_rng);
    Rng acq_rng = root.split(0x6163713200ULL);
    acq::HistoryBuffer buffer(config.acquisition.buffer_capacity, config.acquisition.window);

    double prev_nlpd = std::numeric_limits<double>::infinity();
    bool has_nlpd = false;
    std::size_t nlpd_streak = 0;

    std::size_t iteration = 0;
    while (evals < config.budget) {
        auto tic = Clock::now();
        ++iteration;
        std::size_t q_now = std::min(config.batch_q, config.budget - evals);

        // classifier refit on the full archive's rank labels, temperature on a
        // stratified held-out fifth
        auto labels = pareto::rank_labels(result.archive.ranks(), n_ranks);
        auto decisions = result.archive.decisions();
        std::vector<Vec> train_x, cal_x;
        std::vector<std::size_t> train_y, cal_y;
        Rng split_rng = clf_rng.split(iteration);
        calibration_split(decisions, labels, n_ranks, split_rng, train_x, train_y, cal_x, cal_y);
        if (train_x.size() < n_ranks) { train_x = decisions; train_y = labels; }
        rankclf::ClassifierConfig ccfg = config.classifier;
        fit_classifier(clf, train_x, train_y, config.clf_epochs, ccfg, clf_rng);
        if (!ab_temp && !cal_x.empty()) fit_temperature(clf, cal_x, cal_y);
        else clf.temperature = 1.0;

        // surrogate: full refit on the first fit and after a sustained NLPD
        // rise, bounded warm refit otherwise
        deepgp::FitMode fit_mode = deepgp::FitMode::warm_bounded;
        if (iteration == 1) {
            surrogate = deepgp::SurrogateModel::init(surr_cfg, problem.lower, problem.upper,
                                                     result.archive, surr_rng);
            fit_mode = deepgp::FitMode::full_refit;
        } else if (nlpd_streak >= 3) {
            fit_mode = deepgp::FitMode::full_refit;
            nlpd_streak = 0;
        }
        bool freeze = iteration <= config.freeze_aleatoric_iters;
        auto fit_report = surrogate.fit(result.archive, fit_mode, freeze, surr_rng);
        result.fit_reports.push_back(fit_report);

        const auto& samples = result.archive.samples();
        std::size_t n_val = std::max<std::size_t>(1, samples.size() / 5);
        std::vector<Sample> holdout(samples.end() - static_cast<std::ptrdiff_t>(n_val),
                                    samples.end());
        double nlpd_now = surrogate.nlpd(holdout);
        if (has_nlpd && nlpd_now > prev_nlpd) ++nlpd_streak;
        else nlpd_streak = 0;
        prev_nlpd = nlpd_now;
        has_nlpd = true;

        cache.next_iteration();
        std::uint64_t pred_seed = mix64(seed ^ mix64(iteration));

        // the initial design is optimization trace too: replay its second half
        // once to give the acquisition learner labeled records before the
        // first selection (targets are self-supervised gains, like any other
        // buffer entry)
        if (iteration == 1) {
            auto init_outputs = cache.predict_batch(clf, decisions, mc, pred_seed);
            if (ab_uncertainty)
                for (auto& o : init_outputs) o.u_ep = 0.0;
            auto init_preds = surrogate.predict_batch(decisions, surr_cfg.s_gp, pred_seed);
            std::size_t half = samples.size() / 2;
            pareto::Archive seed_archive;
            for (std::size_t i = 0; i < half; ++i)
                seed_archive.insert({Sample{samples[i].x, samples[i].f, 0}});
            for (std::size_t i = half; i < samples.size(); ++i) {
                double div_before = pareto::archive_diversity(seed_archive);
                double dhv = quality::delta_hv(seed_archive.pareto_front_objectives(),
                                               samples[i].f, hv_cfg);
                seed_archive.insert({Sample{samples[i].x, samples[i].f, 0}});
                acq::HistoryRecord rec;
                rec.feat = acq::build_features(init_preds[i], init_outputs[i], 0.0, 0.0);
                rec.delta_hv = dhv;
                rec.delta_div_norm = buffer.diversity_target(
                    div_before, pareto::archive_diversity(seed_archive));
                rec.eval_index = samples[i].eval_index;
                buffer.push(rec);
            }
        }

        double acq_loss = 0.0;
        if (!use_static && !buffer.empty())
            acq_loss = acq::train_acquisition(acq_net, buffer, config.acquisition, acq_rng);

        auto [mu_dhv, sigma_dhv] = buffer.window_stats();

        // candidate pool via rank-conditioned variation
        auto parent_outputs = cache.predict_batch(clf, decisions, mc, pred_seed);
        if (ab_uncertainty)
            for (auto& o : parent_outputs) o.u_ep = 0.0;
        Rng pool_rng = root.split(0x706f6f6cULL ^ iteration);
        auto pool = generate_candidates(result.archive, parent_outputs, problem,
                                        config.pool_size, n_ranks, pool_rng);

        auto pool_outputs = cache.predict_batch(clf, pool, mc, pred_seed);
        if (ab_uncertainty)
            for (auto& o : pool_outputs) o.u_ep = 0.0;
        double s_used_sum = 0.0;
        for (const auto& o : parent_outputs) s_used_sum += static_cast<double>(o.s_used);
        for (const auto& o : pool_outputs) s_used_sum += static_cast<double>(o.s_used);
        double mean_s = s_used_sum /
                        static_cast<double>(parent_outputs.size() + pool_outputs.size());

        auto front = result.archive.pareto_front_objectives();
        auto screened = screen(pool, pool_outputs, surrogate, config.n_screen, front, hv_cfg);
        std::size_t k_now = std::min(config.top_k, screened.size());

        CompositeInputs sel;
        sel.candidates.reserve(k_now);
        std::vector<acq::FeatureVector> feats(k_now);
        std::vector<Vec> top_xs(k_now);
        for (std::size_t i = 0; i < k_now; ++i) top_xs[i] = pool[screened[i].pool_index];
        if (config.log_topk) result.topk_log.push_back(top_xs);
        auto preds = surrogate.predict_batch(top_xs, surr_cfg.s_gp, pred_seed);
        for (std::size_t i = 0; i < k_now; ++i) {
            const auto& clf_out = pool_outputs[screened[i].pool_index];
            feats[i] = acq::build_features(preds[i], clf_out, mu_dhv, sigma_dhv);
            sel.candidates.push_back(top_xs[i]);
            sel.u_ep_clf.push_back(clf_out.u_ep);
            sel.s_hv_sur.push_back(quality::delta_hv(front, preds[i].f_hat, hv_cfg));
        }
        std::vector<std::size_t> picked;
        if (use_static) {
            std::vector<double> scores(k_now);
            for (std::size_t i = 0; i < k_now; ++i)
                scores[i] = acq::static_score(feats[i], m_obj, n_ranks, weights, sel.s_hv_sur[i]);
            picked = greedy_pick(sel.candidates, scores, q_now, problem);
        } else {
            for (std::size_t i = 0; i < k_now; ++i) {
                auto [s_hv, s_div] = acq::score(acq_net, feats[i]);
                sel.s_hv.push_back(s_hv);
                sel.s_div.push_back(s_div);
            }
            picked = composite_select(sel, q_now, config.selection, problem);
        }

        if (std::getenv("NP_ORACLE_SELECT")) {
            // diagnostic-only upper bound: rank the top-k by true gains
            auto top_f = bench::evaluate_batch(problem, top_xs);
            std::vector<double> truth(k_now);
            for (std::size_t i = 0; i < k_now; ++i)
                truth[i] = quality::delta_hv(front, top_f[i], hv_cfg);
            picked = greedy_pick(sel.candidates, truth, q_now, problem);
        }
        if (std::getenv("NP_TRACE")) {
            auto pool_f = bench::evaluate_batch(problem, pool);
            auto top_f = bench::evaluate_batch(problem, top_xs);
            double best_pool = 0, best_top = 0, best_picked = 0;
            std::size_t arg_top = 0;
            for (const auto& f : pool_f)
                best_pool = std::max(best_pool, quality::delta_hv(front, f, hv_cfg));
            for (std::size_t i = 0; i < k_now; ++i) {
                double g = quality::delta_hv(front, top_f[i], hv_cfg);
                if (g > best_top) { best_top = g; arg_top = i; }
            }
            for (std::size_t p : picked)
                best_picked = std::max(best_picked,
                                       quality::delta_hv(front, top_f[p], hv_cfg));
            // rank quality of each candidate statistic against the truth
            auto spearman = [&](const std::vector<double>& v) {
                auto rank_of = [&](const std::vector<double>& u) {
                    std::vector<std::size_t> ord(u.size());
                    std::iota(ord.begin(), ord.end(), 0);
                    std::sort(ord.begin(), ord.end(),
                              [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
                    std::vector<double> rk(u.size());
                    for (std::size_t i = 0; i < ord.size(); ++i) rk[ord[i]] = i;
                    return rk;
                };
                std::vector<double> truth(k_now);
                for (std::size_t i = 0; i < k_now; ++i)
                    truth[i] = quality::delta_hv(front, top_f[i], hv_cfg);
                auto ra = rank_of(truth);
                auto rb = rank_of(v);
                double ma = 0, mb = 0;
                for (std::size_t i = 0; i < k_now; ++i) { ma += ra[i]; mb += rb[i]; }
                ma /= k_now; mb /= k_now;
                double num = 0, va = 0, vb = 0;
                for (std::size_t i = 0; i < k_now; ++i) {
                    num += (ra[i]-ma)*(rb[i]-mb);
                    va += (ra[i]-ma)*(ra[i]-ma);
                    vb += (rb[i]-mb)*(rb[i]-mb);
                }
                return num / std::sqrt(va*vb + 1e-300);
            };
            std::vector<double> p1(k_now), nfd(k_now);
            for (std::size_t i = 0; i < k_now; ++i) {
                p1[i] = pool_outputs[screened[i].pool_index].p_bar[0];
                // negative Chebyshev distance of f_hat to the front staircase
                double best = 1e300;
                for (const auto& fp : front) {
                    double m = -1e300;
                    for (std::size_t mm = 0; mm < fp.size(); ++mm)
                        m = std::max(m, preds[i].f_hat[mm] - fp[mm]);
                    best = std::min(best, m);
                }
                nfd[i] = -best;
            }
            std::fprintf(stderr,
                         "iter %2zu: bestDHV pool %.4f top-k %.4f picked %.4f | rho: s_sur %.2f s_acq %.2f u_ep %.2f p1 %.2f -fdist %.2f\n",
                         iteration, best_pool, best_top, best_picked,
                         spearman(sel.s_hv_sur), sel.s_hv.empty() ? 0.0 : spearman(sel.s_hv),
                         spearman(sel.u_ep_clf), spearman(p1), spearman(nfd));
            (void)arg_top;
        }

        // true evaluation with sequential gain attribution
        std::vector<Vec> chosen;
        for (std::size_t idx : picked) chosen.push_back(sel.candidates[idx]);
        auto chosen_f = bench::evaluate_batch(problem, chosen);
        for (std::size_t i = 0; i < picked.size(); ++i) {
            double div_before = pareto::archive_diversity(result.archive);
            double dhv = quality::delta_hv(result.archive.pareto_front_objectives(),
                                           chosen_f[i], hv_cfg);
            result.archive.insert({Sample{chosen[i], chosen_f[i], 0}});
            double div_after = pareto::archive_diversity(result.archive);
            acq::HistoryRecord rec;
            rec.feat = feats[picked[i]];
            rec.delta_hv = dhv;
            rec.delta_div_norm = buffer.diversity_target(div_before, div_after);
            rec.eval_index = result.archive.samples().back().eval_index;
            buffer.push(rec);
            result.history.push_back(std::move(rec));
        }
        evals += picked.size();

        metrics_row(iteration, mean_s,
                    fit_mode == deepgp::FitMode::full_refit ? "full" : "warm",
                    fit_report.epochs_run, acq_loss, seconds_since(tic));
        if (picked.empty()) break;
    }

    result.final_hv = result.rows.back().hv;
    result.final_igd = result.rows.back().igd;
    return result;
}

} // namespace

void LoopConfig::validate(std::size_t dim) const
{
    if (batch_q > top_k)
        throw std::invalid_argument("config: q exceeds k (q=" + std::to_string(batch_q) +
                                    ", k=" + std::to_string(top_k) + ")");
    if (top_k > n_screen)
        throw std::invalid_argument("config: k exceeds N_screen (k=" + std::to_string(top_k) +
                                    ", N_screen=" + std::to_string(n_screen) + ")");
    if (n_screen > pool_size)
        throw std::invalid_argument("config: N_screen exceeds pool size (N_screen=" +
                                    std::to_string(n_screen) +
                                    ", pool=" + std::to_string(pool_size) + ")");
    if (effective_init(dim) >= budget)
        throw std::invalid_argument("config: initial design size (" +
                                    std::to_string(effective_init(dim)) +
                                    ") must be below the budget (" + std::to_string(budget) + ")");
    if (n_ranks < 2) throw std::invalid_argument("config: K >= 2 required");
    if (mc.s0 < 1 || mc.s0 > mc.s_max)
        throw std::invalid_argument("config: MC passes must satisfy 1 <= S0 <= S_max");
    if (!(mc.tau_mc > 0)) throw std::invalid_argument("config: tau_MC > 0 required");
}

double mutation_eta(double mean_rank, std::size_t n_ranks)
{
    double k = static_cast<double>(n_ranks);
    return 20.0 * (1.0 - (mean_rank - 1.0) / (k - 1.0)) + 5.0;
}

std::vector<Vec> generate_candidates(const pareto::Archive& archive,
                                     const std::vector<rankclf::ClassifierOutput>& parent_outputs,
                                     const bench::ProblemSpec& problem,
                                     std::size_t pool_size, std::size_t n_ranks, Rng& rng)
{
    const auto& samples = archive.samples();
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("generate_candidates: archive too small");
    const std::size_t dim = problem.dim;

    std::vector<double> cumulative(n, 0.0);
    std::vector<double> pred_rank(n, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        const auto& p = parent_outputs[i].p_bar;
        for (std::size_t c = 1; c < p.size(); ++c)
            if (p[c] > p[arg]) arg = c;
        pred_rank[i] = static_cast<double>(arg + 1);
        acc += std::pow(2.0, static_cast<double>(n_ranks) - pred_rank[i]);
        cumulative[i] = acc;
    }
    auto roulette = [&](double u) {
        double target = u * acc;
        return static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin());
    };

    const double eta_c = 15.0;
    const double cross_rate = 0.9;
    const double gene_rate = 1.0 / static_cast<double>(dim);

    std::vector<Vec> pool(pool_size, Vec(dim));
    const std::size_t n_pairs = (pool_size + 1) / 2;
    const std::uint64_t base = rng.next_u64();
    parallel_for(n_pairs, [&](std::size_t pair) {
        Rng local(mix64(base ^ mix64(pair + 1)));
        std::size_t pa = roulette(local.uniform());
        std::size_t pb = roulette(local.uniform());
        const Vec& x1 = samples[pa].x;
        const Vec& x2 = samples[pb].x;
        Vec c1 = x1, c2 = x2;
        if (local.uniform() < cross_rate) {
            for (std::size_t d = 0; d < dim; ++d) {
                if (local.uniform() >= 0.5) continue;
                double u = local.uniform();
                double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta_c + 1.0))
                                       : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta_c + 1.0));
                double v1 = 0.5 * ((1.0 + beta) * x1[d] + (1.0 - beta) * x2[d]);
                double v2 = 0.5 * ((1.0 - beta) * x1[d] + (1.0 + beta) * x2[d]);
                c1[d] = v1;
                c2[d] = v2;
            }
        }
        double mean_rank = 0.5 * (pred_rank[pa] + pred_rank[pb]);
        double eta_m = mutation_eta(mean_rank, n_ranks);
        auto mutate = [&](Vec& c) {
            for (std::size_t d = 0; d < dim; ++d) {
                if (local.uniform() >= gene_rate) continue;
                double u = local.uniform();
                double delta = u < 0.5 ? std::pow(2.0 * u, 1.0 / (eta_m + 1.0)) - 1.0
                                       : 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (eta_m + 1.0));
                c[d] += delta * (problem.upper[d] - problem.lower[d]);
            }
            for (std::size_t d = 0; d < dim; ++d)
                c[d] = std::clamp(c[d], problem.lower[d], problem.upper[d]);
        };
        mutate(c1);
        mutate(c2);
        pool[2 * pair] = std::move(c1);
        if (2 * pair + 1 < pool_size) pool[2 * pair + 1] = std::move(c2);
    });
    return pool;
}

std::vector<ScreenEntry> screen(const std::vector<Vec>& pool,
                                const std::vector<rankclf::ClassifierOutput>& clf_outputs,
                                const deepgp::SurrogateModel& surrogate,
                                std::size_t n_screen,
                                const std::vector<Vec>& front,
                                const quality::HVConfig& hv_cfg)
{
    auto proxies = surrogate.proxy_batch(pool);
    std::vector<ScreenEntry> entries(pool.size());
    parallel_for(pool.size(), [&](std::size_t i) {
        entries[i].pool_index = i;
        entries[i].proxy = proxies[i];
        double hvc = quality::delta_hv(front, proxies[i].means, hv_cfg);
        entries[i].proxy_score = hvc - 0.5 * proxies[i].coarse_var + 0.1 * clf_outputs[i].u_ep;
    });
    std::sort(entries.begin(), entries.end(), [](const ScreenEntry& a, const ScreenEntry& b) {
        if (a.proxy_score != b.proxy_score) return a.proxy_score > b.proxy_score;
        return a.pool_index < b.pool_index;
    });
    if (entries.size() > n_screen) entries.resize(n_screen);
    return entries;
}

std::vector<std::size_t> composite_select(const CompositeInputs& in, std::size_t q,
                                          const SelectionWeights& weights,
                                          const bench::ProblemSpec& problem)
{
    const std::size_t k = in.candidates.size();
    if (k == 0) return {};
    Vec z_hv = zscore(in.s_hv);
    Vec z_div = zscore(in.s_div);
    Vec z_clf = zscore(in.u_ep_clf);
    Vec z_sur = zscore(in.s_hv_sur);
    std::vector<double> total(k);
    for (std::size_t i = 0; i < k; ++i)
        total[i] = weights.alpha_hv * z_hv[i] + weights.alpha_div * z_div[i] +
                   weights.alpha_clf * z_clf[i] + z_sur[i];
    return greedy_pick(in.candidates, total, q, problem);
}

RunResult run(const bench::ProblemSpec& problem, const LoopConfig& config, std::uint64_t seed)
{
    return run_impl(problem, config, seed, RunModes{}, config.static_weights);
}

RunResult run_random_baseline(const bench::ProblemSpec& problem, const LoopConfig& config,
                              std::uint64_t seed)
{
    RunModes modes;
    modes.random = true;
    return run_impl(problem, config, seed, modes, config.static_weights);
}

RunResult run_static_baseline(const bench::ProblemSpec& problem, const LoopConfig& config,
                              const std::array<double, 6>& weights, std::uint64_t seed)
{
    RunModes modes;
    modes.static_acq = true;
    return run_impl(problem, config, seed, modes, weights);
}

RunResult run_ablation(const bench::ProblemSpec& problem, const LoopConfig& config,
                       const std::set<Ablation>& disable, std::uint64_t seed)
{
    RunModes modes;
    modes.disable = disable;
    return run_impl(problem, config, seed, modes, config.static_weights);
}

double replay_max_error(const RunResult& result, const quality::HVConfig& hv_cfg)
{
    std::vector<Sample> ordered = result.archive.samples();
    std::sort(ordered.begin(), ordered.end(),
              [](const Sample& a, const Sample& b) { return a.eval_index < b.eval_index; });
    std::unordered_map<std::size_t, double> logged;
    for (const auto& rec : result.history) logged[rec.eval_index] = rec.delta_hv;

    pareto::Archive replay;
    double max_err = 0.0;
    for (const auto& s : ordered) {
        auto it = logged.find(s.eval_index);
        if (it != logged.end()) {
            double dhv = quality::delta_hv(replay.pareto_front_objectives(), s.f, hv_cfg);
            max_err = std::max(max_err, std::abs(dhv - it->second));
        }
        replay.insert({Sample{s.x, s.f, 0}});
    }
    return max_err;
}

} // namespace np::loop
