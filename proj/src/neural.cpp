#include "np/neural.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace np::neural {

namespace {
constexpr double kLnEps = 1e-5;
}

MLP make_mlp(std::size_t input, const std::vector<LayerSpec>& specs, Rng& rng)
{
    MLP net;
    std::size_t in = input;
    for (const auto& s : specs) {
        Layer layer;
        layer.in = in;
        layer.out = s.out;
        layer.relu = s.relu;
        layer.layer_norm = s.layer_norm;
        layer.dropout_p = s.dropout_p;
        layer.w.resize(in * s.out);
        layer.b.assign(s.out, 0.0);
        double bound = std::sqrt(6.0 / static_cast<double>(in + s.out));
        for (auto& w : layer.w) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
        in = s.out;
    }
    return net;
}

DropoutMask make_mask(const MLP& net, Rng& rng)
{
    DropoutMask mask;
    mask.keep.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        if (layer.dropout_p <= 0.0) continue;
        mask.keep[l].resize(layer.out);
        for (std::size_t i = 0; i < layer.out; ++i)
            mask.keep[l][i] = rng.uniform() >= layer.dropout_p ? 1 : 0;
    }
    return mask;
}

Vec layer_norm(const Vec& v)
{
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    double inv = 1.0 / std::sqrt(var + kLnEps);
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv;
    return out;
}

Vec softmax_temperature(const Vec& z, double temperature)
{
    if (!(temperature > 0.0))
        throw std::domain_error("softmax_temperature: T > 0 required");
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp((z[i] - zmax) / temperature);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

Vec forward(const MLP& net, const Vec& x, const DropoutMask* mask, ForwardCache* cache)
{
    if (x.size() != net.input_width())
        throw std::logic_error("forward: input width mismatch");
    if (cache) {
        cache->input = x;
        cache->pre.assign(net.layers.size(), {});
        cache->act.assign(net.layers.size(), {});
        cache->normed.assign(net.layers.size(), {});
        cache->inv_std.assign(net.layers.size(), 0.0);
        cache->out.assign(net.layers.size(), {});
    }
    Vec cur = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Vec pre(layer.out, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            const double* wrow = layer.w.data() + r * layer.in;
            double acc = layer.b[r];
            for (std::size_t c = 0; c < layer.in; ++c) acc += wrow[c] * cur[c];
            pre[r] = acc;
        }
        Vec act = pre;
        if (layer.relu)
            for (auto& v : act) v = v > 0.0 ? v : 0.0;
        Vec normed = layer.layer_norm ? layer_norm(act) : act;
        double inv_std = 0.0;
        if (layer.layer_norm) {
            double mean = 0.0;
            for (double v : act) mean += v;
            mean /= static_cast<double>(act.size());
            double var = 0.0;
            for (double v : act) var += (v - mean) * (v - mean);
            var /= static_cast<double>(act.size());
            inv_std = 1.0 / std::sqrt(var + kLnEps);
        }
        Vec out = normed;
        if (mask && layer.dropout_p > 0.0) {
            double scale = 1.0 / (1.0 - layer.dropout_p);
            const auto& keep = mask->keep[l];
            if (keep.size() != layer.out)
                throw std::logic_error("forward: dropout mask shape mismatch");
            for (std::size_t i = 0; i < layer.out; ++i)
                out[i] = keep[i] ? out[i] * scale : 0.0;
        }
        if (cache) {
            cache->pre[l] = pre;
            cache->act[l] = act;
            cache->normed[l] = normed;
            cache->inv_std[l] = inv_std;
            cache->out[l] = out;
        }
        cur = std::move(out);
    }
    return cur;
}

Vec forward(const MLP& net, const Vec& x)
{
    return forward(net, x, nullptr, nullptr);
}

MLPGrads zero_grads(const MLP& net)
{
    MLPGrads g;
    for (const auto& layer : net.layers) {
        g.w.emplace_back(layer.w.size(), 0.0);
        g.b.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

Vec backward(const MLP& net, const ForwardCache& cache, const DropoutMask* mask,
             const Vec& upstream, MLPGrads& grads)
{
    if (cache.out.size() != net.layers.size())
        throw std::logic_error("backward: stale or mismatched cache");
    Vec g = upstream;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        if (mask && layer.dropout_p > 0.0) {
            double scale = 1.0 / (1.0 - layer.dropout_p);
            const auto& keep = mask->keep[li];
            for (std::size_t i = 0; i < layer.out; ++i)
                g[i] = keep[i] ? g[i] * scale : 0.0;
        }
        if (layer.layer_norm) {
            // y = (a - mu) * inv_std; da = inv_std * (g - mean(g) - y * mean(g*y))
            const Vec& y = cache.normed[li];
            double inv_std = cache.inv_std[li];
            double mg = 0.0, mgy = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                mg += g[i];
                mgy += g[i] * y[i];
            }
            mg /= static_cast<double>(g.size());
            mgy /= static_cast<double>(g.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = inv_std * (g[i] - mg - y[i] * mgy);
        }
        if (layer.relu) {
            const Vec& pre = cache.pre[li];
            for (std::size_t i = 0; i < g.size(); ++i)
                if (pre[i] <= 0.0) g[i] = 0.0;
        }
        const Vec& in = li == 0 ? cache.input : cache.out[li - 1];
        Vec g_prev(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            double gr = g[r];
            grads.b[li][r] += gr;
            double* gw = grads.w[li].data() + r * layer.in;
            const double* wrow = layer.w.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) {
                gw[c] += gr * in[c];
                g_prev[c] += gr * wrow[c];
            }
        }
        g = std::move(g_prev);
    }
    return g;
}

AdamState make_adam(const std::vector<const Vec*>& params, double lr)
{
    AdamState st;
    st.lr = lr;
    for (const auto* p : params) {
        st.m.emplace_back(p->size(), 0.0);
        st.v.emplace_back(p->size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<Vec*> params, const std::vector<const Vec*>& grads, AdamState& state)
{
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::logic_error("adam_step: parameter/gradient shape mismatch");
    state.step_count += 1;
    double t = static_cast<double>(state.step_count);
    double bc1 = 1.0 - std::pow(state.beta1, t);
    double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Vec& p = *params[k];
        const Vec& g = *grads[k];
        if (p.size() != g.size() || p.size() != state.m[k].size())
            throw std::logic_error("adam_step: tensor size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            state.m[k][i] = state.beta1 * state.m[k][i] + (1.0 - state.beta1) * g[i];
            state.v[k][i] = state.beta2 * state.v[k][i] + (1.0 - state.beta2) * g[i] * g[i];
            double mh = state.m[k][i] / bc1;
            double vh = state.v[k][i] / bc2;
            p[i] -= state.lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

std::vector<Vec*> param_refs(MLP& net)
{
    std::vector<Vec*> out;
    for (auto& layer : net.layers) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
    }
    return out;
}

std::vector<const Vec*> grad_refs(const MLPGrads& grads)
{
    std::vector<const Vec*> out;
    for (std::size_t l = 0; l < grads.w.size(); ++l) {
        out.push_back(&grads.w[l]);
        out.push_back(&grads.b[l]);
    }
    return out;
}

std::vector<Vec*> grad_refs_mut(MLPGrads& grads)
{
    std::vector<Vec*> out;
    for (std::size_t l = 0; l < grads.w.size(); ++l) {
        out.push_back(&grads.w[l]);
        out.push_back(&grads.b[l]);
    }
    return out;
}

std::string mlp_to_json(const MLP& net)
{
    nlohmann::json root;
    root["layers"] = nlohmann::json::array();
    for (const auto& layer : net.layers) {
        nlohmann::json l;
        l["in"] = layer.in;
        l["out"] = layer.out;
        l["relu"] = layer.relu;
        l["layer_norm"] = layer.layer_norm;
        l["dropout_p"] = layer.dropout_p;
        l["w"] = layer.w;
        l["b"] = layer.b;
        root["layers"].push_back(std::move(l));
    }
    return root.dump();
}

MLP mlp_from_json(const std::string& text)
{
    nlohmann::json root = nlohmann::json::parse(text);
    MLP net;
    for (const auto& l : root.at("layers")) {
        Layer layer;
        layer.in = l.at("in").get<std::size_t>();
        layer.out = l.at("out").get<std::size_t>();
        layer.relu = l.at("relu").get<bool>();
        layer.layer_norm = l.at("layer_norm").get<bool>();
        layer.dropout_p = l.at("dropout_p").get<double>();
        layer.w = l.at("w").get<Vec>();
        layer.b = l.at("b").get<Vec>();
        if (layer.w.size() != layer.in * layer.out || layer.b.size() != layer.out)
            throw std::runtime_error("mlp_from_json: parameter shape mismatch");
        net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw std::runtime_error("mlp_from_json: no layers");
    return net;
}

} // namespace np::neural
