#include "np/rankclf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "np/parallel.hpp"

namespace np::rankclf {

namespace {

Vec scale_input(const ClassifierModel& model, const Vec& x)
{
    Vec out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        double span = model.upper[d] - model.lower[d];
        out[d] = span > 0.0 ? (x[d] - model.lower[d]) / span : 0.0;
    }
    return out;
}

} // namespace

double entropy(const Vec& p)
{
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

ClassifierModel make_classifier(std::size_t input_dim, std::size_t n_ranks,
                                const Vec& lower, const Vec& upper,
                                const ClassifierConfig& cfg, Rng& rng)
{
    ClassifierModel model;
    model.n_ranks = n_ranks;
    model.lower = lower;
    model.upper = upper;
    model.net = neural::make_mlp(input_dim, {
        {cfg.hidden1, true, true, cfg.dropout},
        {cfg.hidden2, true, true, 0.0},
        {n_ranks, false, false, 0.0},
    }, rng);
    return model;
}

double fit_classifier(ClassifierModel& model, const std::vector<Vec>& xs,
                      const std::vector<std::size_t>& labels, std::size_t epochs,
                      const ClassifierConfig& cfg, Rng& rng)
{
    const std::size_t n = xs.size();
    const std::size_t k = model.n_ranks;
    if (n < k)
        throw std::runtime_error("fit_classifier: archive smaller than rank count; "
                                 "add more initial samples");
    if (epochs < 1) throw std::invalid_argument("fit_classifier: epochs >= 1 required");
    if (labels.size() != n) throw std::invalid_argument("fit_classifier: label count mismatch");

    // inverse-frequency class weights keep shallow-rank labels from being
    // swamped by deep fronts
    std::vector<double> counts(k, 0.0);
    for (auto lab : labels) {
        if (lab < 1 || lab > k) throw std::invalid_argument("fit_classifier: label out of range");
        counts[lab - 1] += 1.0;
    }
    std::vector<double> class_w(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        class_w[c] = counts[c] > 0.0 ? static_cast<double>(n) / (static_cast<double>(k) * counts[c]) : 0.0;

    std::vector<Vec> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = scale_input(model, xs[i]);

    auto params = neural::param_refs(model.net);
    std::vector<const Vec*> cparams(params.begin(), params.end());
    auto adam = neural::make_adam(cparams, cfg.lr);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    double final_epoch_loss = 0.0;
    const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_size, n));
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t stop = std::min(n, start + batch);
            auto grads = neural::zero_grads(model.net);
            double batch_w = 0.0;
            for (std::size_t bi = start; bi < stop; ++bi) {
                std::size_t i = order[bi];
                auto mask = neural::make_mask(model.net, rng);
                neural::ForwardCache cache;
                Vec z = neural::forward(model.net, scaled[i], &mask, &cache);
                Vec p = neural::softmax_temperature(z, 1.0);
                std::size_t y = labels[i] - 1;
                double w = class_w[y];
                epoch_loss += -w * std::log(std::max(p[y], 1e-300));
                batch_w += w;
                Vec up(k);
                for (std::size_t c = 0; c < k; ++c) up[c] = w * (p[c] - (c == y ? 1.0 : 0.0));
                neural::backward(model.net, cache, &mask, up, grads);
            }
            for (auto& gw : grads.w) for (auto& g : gw) g /= batch_w;
            for (auto& gb : grads.b) for (auto& g : gb) g /= batch_w;
            neural::adam_step(params, neural::grad_refs(grads), adam);
        }
        final_epoch_loss = epoch_loss / static_cast<double>(n);
    }
    model.trained = true;
    return final_epoch_loss;
}

Vec logits(const ClassifierModel& model, const Vec& x)
{
    return neural::forward(model.net, scale_input(model, x));
}

double fit_temperature_grid(const std::vector<Vec>& logit_rows,
                            const std::vector<std::size_t>& labels)
{
    if (logit_rows.empty() || logit_rows.size() != labels.size())
        throw std::invalid_argument("fit_temperature_grid: empty or mismatched calibration set");
    const int grid = 200;
    const double lo = std::log(0.05), hi = std::log(20.0);
    double best_t = 1.0, best_nll = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
        double t = std::exp(lo + (hi - lo) * static_cast<double>(g) / (grid - 1));
        double nll = 0.0;
        for (std::size_t i = 0; i < logit_rows.size(); ++i) {
            Vec p = neural::softmax_temperature(logit_rows[i], t);
            nll -= std::log(std::max(p[labels[i] - 1], 1e-300));
        }
        nll /= static_cast<double>(logit_rows.size());
        if (nll < best_nll) {
            best_nll = nll;
            best_t = t;
        }
    }
    return best_t;
}

bool fit_temperature(ClassifierModel& model, const std::vector<Vec>& xs,
                     const std::vector<std::size_t>& labels)
{
    if (xs.empty()) {
        model.temperature = 1.0;
        return false;
    }
    std::vector<Vec> rows(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) rows[i] = logits(model, xs[i]);
    model.temperature = fit_temperature_grid(rows, labels);
    return true;
}

std::size_t adaptive_pass_count(double sigma2, const MCConfig& mc)
{
    if (sigma2 <= mc.tau_mc) return mc.s0;
    auto factor = static_cast<std::size_t>(std::ceil(sigma2 / mc.tau_mc));
    return std::min(mc.s_max, mc.s0 * factor);
}

ClassifierOutput predict_with_uncertainty(const ClassifierModel& model, const Vec& x,
                                          const MCConfig& mc, const Rng& stream)
{
    if (!model.trained)
        throw std::runtime_error("predict_with_uncertainty: classifier not trained");
    Vec scaled = scale_input(model, x);
    const std::size_t k = model.n_ranks;

    Rng local = stream;
    std::vector<Vec> passes;
    passes.reserve(mc.s0);
    auto run_pass = [&]() {
        auto mask = neural::make_mask(model.net, local);
        Vec z = neural::forward(model.net, scaled, &mask, nullptr);
        passes.push_back(neural::softmax_temperature(z, model.temperature));
    };
    for (std::size_t s = 0; s < mc.s0; ++s) run_pass();

    // escalation statistic: mean over classes of the across-pass variance
    double sigma2 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double mean = 0.0;
        for (const auto& p : passes) mean += p[c];
        mean /= static_cast<double>(passes.size());
        double var = 0.0;
        for (const auto& p : passes) var += (p[c] - mean) * (p[c] - mean);
        sigma2 += var / static_cast<double>(passes.size());
    }
    sigma2 /= static_cast<double>(k);

    std::size_t s_used = adaptive_pass_count(sigma2, mc);
    while (passes.size() < s_used) run_pass();

    ClassifierOutput out;
    out.s_used = passes.size();
    out.p_bar.assign(k, 0.0);
    double mean_h = 0.0;
    for (const auto& p : passes) {
        for (std::size_t c = 0; c < k; ++c) out.p_bar[c] += p[c];
        mean_h += entropy(p);
    }
    for (auto& v : out.p_bar) v /= static_cast<double>(passes.size());
    mean_h /= static_cast<double>(passes.size());
    out.u_ep = std::max(0.0, entropy(out.p_bar) - mean_h);
    return out;
}

std::vector<ClassifierOutput> PredictionCache::predict_batch(const ClassifierModel& model,
                                                             const std::vector<Vec>& pool,
                                                             const MCConfig& mc,
                                                             std::uint64_t seed)
{
    std::vector<ClassifierOutput> out(pool.size());
    std::vector<std::uint64_t> keys(pool.size());
    std::vector<char> hit(pool.size(), 0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        keys[i] = hash_doubles(pool[i].data(), pool[i].size(), mix64(iteration_ + 1));
        auto it = cache_.find(keys[i]);
        if (it != cache_.end()) {
            out[i] = it->second;
            hit[i] = 1;
        }
    }
    parallel_for(pool.size(), [&](std::size_t i) {
        if (hit[i]) return;
        Rng stream(mix64(seed ^ keys[i]));
        out[i] = predict_with_uncertainty(model, pool[i], mc, stream);
    });
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (!hit[i]) cache_.emplace(keys[i], out[i]);
    return out;
}

std::string to_json(const ClassifierModel& model)
{
    nlohmann::json root;
    root["net"] = nlohmann::json::parse(neural::mlp_to_json(model.net));
    root["temperature"] = model.temperature;
    root["n_ranks"] = model.n_ranks;
    root["lower"] = model.lower;
    root["upper"] = model.upper;
    root["trained"] = model.trained;
    return root.dump();
}

ClassifierModel classifier_from_json(const std::string& text)
{
    nlohmann::json root = nlohmann::json::parse(text);
    ClassifierModel model;
    model.net = neural::mlp_from_json(root.at("net").dump());
    model.temperature = root.at("temperature").get<double>();
    model.n_ranks = root.at("n_ranks").get<std::size_t>();
    model.lower = root.at("lower").get<Vec>();
    model.upper = root.at("upper").get<Vec>();
    model.trained = root.at("trained").get<bool>();
    if (model.net.output_width() != model.n_ranks)
        throw std::runtime_error("classifier_from_json: K does not match the net output");
    return model;
}

} // namespace np::rankclf
