#include "np/acq.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace np::acq {

namespace {
constexpr double kDivEps = 1e-8;
constexpr double kEmaDecay = 0.99;
}

std::size_t feature_width(std::size_t n_obj, std::size_t n_ranks)
{
    return 3 * n_obj + n_ranks + 2;
}

FeatureVector build_features(const deepgp::SurrogatePrediction& pred,
                             const rankclf::ClassifierOutput& clf,
                             double mu_dhv, double sigma_dhv)
{
    auto check = [](const Vec& v, const char* source) {
        for (double x : v)
            if (!std::isfinite(x))
                throw std::runtime_error(std::string("build_features: NaN from ") + source);
    };
    check(pred.f_hat, "surrogate means");
    check(pred.u_ep, "surrogate epistemic variances");
    check(pred.u_al, "surrogate aleatoric variances");
    check(clf.p_bar, "classifier distribution");
    if (!std::isfinite(mu_dhv) || !std::isfinite(sigma_dhv))
        throw std::runtime_error("build_features: NaN from window stats");

    FeatureVector feat;
    feat.reserve(feature_width(pred.f_hat.size(), clf.p_bar.size()));
    feat.insert(feat.end(), pred.f_hat.begin(), pred.f_hat.end());
    feat.insert(feat.end(), pred.u_ep.begin(), pred.u_ep.end());
    feat.insert(feat.end(), pred.u_al.begin(), pred.u_al.end());
    feat.insert(feat.end(), clf.p_bar.begin(), clf.p_bar.end());
    feat.push_back(mu_dhv);
    feat.push_back(sigma_dhv);
    return feat;
}

void HistoryBuffer::push(HistoryRecord rec)
{
    records_.push_back(std::move(rec));
    while (records_.size() > capacity_) records_.pop_front();
}

std::pair<double, double> HistoryBuffer::window_stats() const
{
    if (records_.empty()) return {0.0, 0.0};
    std::size_t w = std::min(window_, records_.size());
    double mean = 0.0;
    for (std::size_t i = records_.size() - w; i < records_.size(); ++i)
        mean += records_[i].delta_hv;
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t i = records_.size() - w; i < records_.size(); ++i) {
        double d = records_[i].delta_hv - mean;
        var += d * d;
    }
    var /= static_cast<double>(w);
    return {mean, std::sqrt(var)};
}

double HistoryBuffer::diversity_target(double div_before, double div_after)
{
    double delta = div_after - div_before;
    if (!seeded_) {
        running_abs_div_ = std::abs(delta);
        seeded_ = true;
    } else {
        running_abs_div_ = kEmaDecay * running_abs_div_ + (1.0 - kEmaDecay) * std::abs(delta);
    }
    return delta / (kDivEps + running_abs_div_);
}

std::string HistoryBuffer::to_json() const
{
    std::ostringstream os;
    os.precision(17);
    os << "[";
    bool first = true;
    for (const auto& r : records_) {
        os << (first ? "\n" : ",\n") << " {\"eval_index\":" << r.eval_index
           << ",\"delta_hv\":" << r.delta_hv << ",\"delta_div_norm\":" << r.delta_div_norm
           << ",\"feat\":[";
        for (std::size_t i = 0; i < r.feat.size(); ++i) os << (i ? "," : "") << r.feat[i];
        os << "]}";
        first = false;
    }
    os << "\n]\n";
    return os.str();
}

AcqNet make_acq_net(std::size_t feat_width, const AcqConfig& cfg, Rng& rng)
{
    AcqNet net;
    net.net = neural::make_mlp(feat_width, {{cfg.hidden, true, false, 0.0},
                                            {2, false, false, 0.0}}, rng);
    net.feat_mean.assign(feat_width, 0.0);
    net.feat_std.assign(feat_width, 1.0);
    return net;
}

namespace {

Vec apply_scaler(const AcqNet& net, const FeatureVector& feat)
{
    if (feat.size() != net.net.input_width())
        throw std::runtime_error("acq: feature width mismatch");
    // candidates far outside the buffer's feature distribution are clamped
    // into the trained regime instead of extrapolated
    Vec out(feat.size());
    for (std::size_t i = 0; i < feat.size(); ++i)
        out[i] = std::clamp((feat[i] - net.feat_mean[i]) / net.feat_std[i], -3.0, 3.0);
    return out;
}

} // namespace

std::pair<double, double> score(const AcqNet& net, const FeatureVector& feat)
{
    Vec out = neural::forward(net.net, apply_scaler(net, feat));
    // the HV head lives on a log1p scale; clamp before inverting so scores
    // on far out-of-distribution candidates stay finite
    return {std::expm1(std::clamp(out[0], -30.0, 30.0)), out[1]};
}

std::vector<std::pair<double, double>> score_batch(const AcqNet& net,
                                                   const std::vector<FeatureVector>& feats)
{
    std::vector<std::pair<double, double>> out(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) out[i] = score(net, feats[i]);
    return out;
}

double train_acquisition(AcqNet& net, const HistoryBuffer& buffer, const AcqConfig& cfg,
                         Rng& rng)
{
    if (buffer.empty()) return 0.0;
    const auto& recs = buffer.records();
    const std::size_t n = recs.size();
    const std::size_t width = net.net.input_width();

    // refresh the z-scoring transform from the buffer
    net.feat_mean.assign(width, 0.0);
    net.feat_std.assign(width, 0.0);
    for (const auto& r : recs)
        for (std::size_t i = 0; i < width; ++i) net.feat_mean[i] += r.feat[i];
    for (auto& v : net.feat_mean) v /= static_cast<double>(n);
    for (const auto& r : recs)
        for (std::size_t i = 0; i < width; ++i) {
            double d = r.feat[i] - net.feat_mean[i];
            net.feat_std[i] += d * d;
        }
    for (auto& v : net.feat_std) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-12);
    net.scaler_ready = true;

    auto params = neural::param_refs(net.net);
    std::vector<const Vec*> cparams(params.begin(), params.end());
    auto adam = neural::make_adam(cparams, cfg.lr);

    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
    double last_loss = 0.0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        auto grads = neural::zero_grads(net.net);
        double loss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const auto& rec = recs[rng.below(n)];
            Vec in = apply_scaler(net, rec.feat);
            neural::ForwardCache cache;
            Vec out = neural::forward(net.net, in, nullptr, &cache);
            double target_hv = std::log1p(rec.delta_hv);
            double r_hv = out[0] - target_hv;
            double r_div = out[1] - rec.delta_div_norm;
            loss += r_hv * r_hv + cfg.lambda_div * r_div * r_div;
            Vec up = {2.0 * r_hv, 2.0 * cfg.lambda_div * r_div};
            neural::backward(net.net, cache, nullptr, up, grads);
        }
        double inv_b = 1.0 / static_cast<double>(batch);
        double reg = 0.0;
        for (std::size_t l = 0; l < net.net.layers.size(); ++l) {
            for (std::size_t i = 0; i < grads.w[l].size(); ++i) {
                grads.w[l][i] = grads.w[l][i] * inv_b + 2.0 * cfg.lambda_reg * net.net.layers[l].w[i];
                reg += net.net.layers[l].w[i] * net.net.layers[l].w[i];
            }
            for (std::size_t i = 0; i < grads.b[l].size(); ++i) {
                grads.b[l][i] = grads.b[l][i] * inv_b + 2.0 * cfg.lambda_reg * net.net.layers[l].b[i];
                reg += net.net.layers[l].b[i] * net.net.layers[l].b[i];
            }
        }
        neural::adam_step(params, neural::grad_refs(grads), adam);
        last_loss = loss * inv_b + cfg.lambda_reg * reg;
    }
    return last_loss;
}

double static_score(const FeatureVector& feat, std::size_t n_obj, std::size_t n_ranks,
                    const std::array<double, 6>& weights, double proxy_hv_estimate)
{
    if (feat.size() != feature_width(n_obj, n_ranks))
        throw std::runtime_error("static_score: feature width mismatch");
    double ep1 = 0.0, al1 = 0.0;
    for (std::size_t m = 0; m < n_obj; ++m) {
        ep1 += std::abs(feat[n_obj + m]);
        al1 += std::abs(feat[2 * n_obj + m]);
    }
    double p1 = feat[3 * n_obj];  // probability of rank 1
    double mu = feat[3 * n_obj + n_ranks];
    double sigma = feat[3 * n_obj + n_ranks + 1];
    return weights[0] * proxy_hv_estimate + weights[1] * ep1 + weights[2] * al1 +
           weights[3] * p1 + weights[4] * mu + weights[5] * sigma;
}

} // namespace np::acq
