#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "np/neural.hpp"
#include "oracles.hpp"

using namespace np;
using namespace np::neural;

TEST_CASE("layer_norm definition")
{
    CHECK(layer_norm({3, 3, 3}) == Vec{0, 0, 0});

    Vec v = {0.3, -1.2, 2.4, 0.0};
    Vec n = layer_norm(v);
    double mean = 0, var = 0;
    for (double x : n) mean += x;
    mean /= 4.0;
    for (double x : n) var += (x - mean) * (x - mean);
    var /= 4.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps shrinks variance slightly

    Vec shifted = v;
    for (auto& x : shifted) x += 5.0;
    auto ns = layer_norm(shifted);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(ns[i] == doctest::Approx(n[i]).epsilon(1e-12));
}

TEST_CASE("softmax with temperature")
{
    auto p = softmax_temperature({0, 0}, 1.0);
    CHECK(p[0] == doctest::Approx(0.5));
    auto q = softmax_temperature({3, -1, 0.5}, 1e6);
    for (double v : q) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
    auto r = softmax_temperature({10, 0}, 1.0);
    CHECK(r[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))));
    CHECK_THROWS_AS(softmax_temperature({1, 2}, 0.0), std::domain_error);
    CHECK_THROWS_AS(softmax_temperature({1, 2}, -1.0), std::domain_error);

    // invariance to constant shifts, strict positivity, normalization
    Rng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
        Vec z(5);
        for (auto& v : z) v = rng.uniform(-30, 30);
        double t = 0.05 + rng.uniform() * 5.0;
        auto a = softmax_temperature(z, t);
        Vec zc = z;
        for (auto& v : zc) v += 7.5;
        auto b = softmax_temperature(zc, t);
        double sum = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] > 0.0);
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
            sum += a[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("forward pass basics")
{
    Rng rng(1);
    MLP zero = make_mlp(3, {{4, true, true, 0.0}, {2, false, false, 0.0}}, rng);
    for (auto& l : zero.layers) std::fill(l.w.begin(), l.w.end(), 0.0);
    CHECK(forward(zero, {1.0, -2.0, 0.5}) == Vec{0, 0});

    MLP identity;
    Layer l;
    l.in = l.out = 3;
    l.w = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    l.b = {0, 0, 0};
    l.relu = true;
    identity.layers.push_back(l);
    CHECK(forward(identity, {1.5, -2.0, 0.25}) == Vec{1.5, 0.0, 0.25});

    // same mask twice: identical output
    MLP net = make_mlp(4, {{8, true, true, 0.5}, {3, false, false, 0.0}}, rng);
    Rng mrng(9);
    auto mask = make_mask(net, mrng);
    Vec x = {0.1, 0.2, 0.3, 0.4};
    CHECK(forward(net, x, &mask, nullptr) == forward(net, x, &mask, nullptr));

    // no mask: dropout layer acts as identity (no scaling at inference)
    MLP droponly = make_mlp(4, {{4, false, false, 0.9}}, rng);
    Vec y1 = forward(droponly, x);
    MLP clone = droponly;
    for (auto& layer : clone.layers) layer.dropout_p = 0.0;
    CHECK(y1 == forward(clone, x));
}

TEST_CASE("backward: linear net squared loss reproduces the outer-product rule")
{
    Rng rng(2);
    MLP net = make_mlp(3, {{2, false, false, 0.0}}, rng);
    Vec x = {0.5, -1.0, 2.0};
    Vec target = {1.0, -1.0};
    ForwardCache cache;
    Vec out = forward(net, x, nullptr, &cache);
    Vec up = {2.0 * (out[0] - target[0]), 2.0 * (out[1] - target[1])};
    auto grads = zero_grads(net);
    backward(net, cache, nullptr, up, grads);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(grads.w[0][r * 3 + c] == doctest::Approx(up[r] * x[c]));

    auto zg = zero_grads(net);
    backward(net, cache, nullptr, {0.0, 0.0}, zg);
    for (double g : zg.w[0]) CHECK(g == 0.0);
    for (double g : zg.b[0]) CHECK(g == 0.0);
}

namespace {

// scalar loss over a net with a fixed mask: sum of squared outputs
double net_loss(const MLP& net, const Vec& x, const DropoutMask* mask)
{
    Vec out = forward(net, x, mask, nullptr);
    double loss = 0.0;
    for (double v : out) loss += v * v;
    return loss;
}

double gradient_check(MLP& net, const Vec& x, const DropoutMask* mask)
{
    ForwardCache cache;
    Vec out = forward(net, x, mask, &cache);
    Vec up(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) up[i] = 2.0 * out[i];
    auto grads = zero_grads(net);
    backward(net, cache, mask, up, grads);
    return oracles::max_grad_rel_error(param_refs(net), grad_refs(grads),
                                       [&] { return net_loss(net, x, mask); });
}

} // namespace

TEST_CASE("finite-difference gradient check across architectures and seeds")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Vec x8(8), x13(13);
        for (auto& v : x8) v = rng.uniform(-1, 1);
        for (auto& v : x13) v = rng.uniform(-1, 1);

        // classifier-shaped block structure at test width
        MLP clf = make_mlp(8, {{16, true, true, 0.2}, {16, true, true, 0.0},
                               {5, false, false, 0.0}}, rng);
        auto mask = make_mask(clf, rng);
        CHECK(gradient_check(clf, x8, &mask) < 1e-4);

        // acquisition-shaped
        MLP acq = make_mlp(13, {{16, true, false, 0.0}, {2, false, false, 0.0}}, rng);
        CHECK(gradient_check(acq, x13, nullptr) < 1e-4);

        // surrogate mean/noise shape
        MLP mean = make_mlp(8, {{32, true, false, 0.0}, {16, false, false, 0.0},
                                {1, false, false, 0.0}}, rng);
        CHECK(gradient_check(mean, x8, nullptr) < 1e-4);
    }
}

TEST_CASE("adam behavior")
{
    Vec p = {1.0, -2.0};
    std::vector<Vec*> params = {&p};
    Vec g = {0.0, 0.0};
    std::vector<const Vec*> grads = {&g};
    auto st = make_adam(grads, 1e-3);

    adam_step(params, grads, st);
    CHECK(p == Vec{1.0, -2.0});
    CHECK(st.step_count == 1);

    g = {0.5, -0.25};
    Vec before = p;
    for (int i = 0; i < 100; ++i) adam_step(params, grads, st);
    CHECK(p[0] < before[0]);
    CHECK(p[1] > before[1]);
    CHECK(st.step_count == 101);
}

TEST_CASE("training a linearly separable toy task reaches full accuracy")
{
    Rng rng(6);
    MLP net = make_mlp(2, {{16, true, true, 0.0}, {2, false, false, 0.0}}, rng);
    std::vector<Vec> xs;
    std::vector<std::size_t> ys;
    for (int i = 0; i < 40; ++i) {
        double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
        xs.push_back({a, b});
        ys.push_back(a + b > 0 ? 0 : 1);
    }
    auto params = param_refs(net);
    std::vector<const Vec*> cp(params.begin(), params.end());
    auto adam = make_adam(cp, 1e-2);
    for (int step = 0; step < 500; ++step) {
        auto grads = zero_grads(net);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            ForwardCache cache;
            Vec z = forward(net, xs[i], nullptr, &cache);
            Vec p = softmax_temperature(z, 1.0);
            Vec up(2);
            for (std::size_t c = 0; c < 2; ++c) up[c] = p[c] - (c == ys[i] ? 1.0 : 0.0);
            backward(net, cache, nullptr, up, grads);
        }
        adam_step(params, grad_refs(grads), adam);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Vec z = forward(net, xs[i]);
        correct += (z[ys[i]] > z[1 - ys[i]]) ? 1 : 0;
    }
    CHECK(correct == xs.size());
}

TEST_CASE("checkpoint round trip reproduces the forward pass bit-exactly")
{
    Rng rng(44);
    MLP net = make_mlp(5, {{16, true, true, 0.3}, {8, true, false, 0.0},
                           {3, false, false, 0.0}}, rng);
    auto restored = mlp_from_json(mlp_to_json(net));
    Vec x = {0.1, -0.4, 0.9, 0.0, 2.5};
    CHECK(forward(net, x) == forward(restored, x));
    REQUIRE(restored.layers.size() == net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(restored.layers[l].w == net.layers[l].w);
        CHECK(restored.layers[l].dropout_p == net.layers[l].dropout_p);
    }
    CHECK_THROWS(mlp_from_json("{\"layers\": []}"));
}
