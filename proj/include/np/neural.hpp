#ifndef NP_NEURAL_HPP
#define NP_NEURAL_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::neural {

// one affine block: y = W x + b, optionally followed by ReLU, then
// parameter-free LayerNorm, then (in MC mode only) dropout on the block
// output. W is row-major (rows x cols = out x in).
struct Layer {
    std::size_t in = 0, out = 0;
    Vec w;  // out x in, row-major
    Vec b;  // out
    bool relu = false;
    bool layer_norm = false;
    double dropout_p = 0.0;
};

struct MLP {
    std::vector<Layer> layers;
    std::size_t input_width() const { return layers.front().in; }
    std::size_t output_width() const { return layers.back().out; }
};

struct LayerSpec {
    std::size_t out;
    bool relu = false;
    bool layer_norm = false;
    double dropout_p = 0.0;
};

// uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases
MLP make_mlp(std::size_t input, const std::vector<LayerSpec>& specs, Rng& rng);

// Bernoulli keep masks for every layer with dropout_p > 0. Inference runs
// without a mask and applies no dropout at all; MC mode supplies one and
// scales kept activations by 1/(1-p).
struct DropoutMask {
    std::vector<std::vector<char>> keep;  // one entry per layer, empty if p == 0
};

DropoutMask make_mask(const MLP& net, Rng& rng);

struct ForwardCache {
    Vec input;
    std::vector<Vec> pre;       // affine outputs per layer
    std::vector<Vec> act;       // after ReLU (alias of pre when no relu)
    std::vector<Vec> normed;    // after LayerNorm
    std::vector<double> inv_std;
    std::vector<Vec> out;       // block outputs (post-dropout)
};

Vec forward(const MLP& net, const Vec& x, const DropoutMask* mask, ForwardCache* cache);
Vec forward(const MLP& net, const Vec& x);  // deterministic inference pass

// gradients shaped like the parameters
struct MLPGrads {
    std::vector<Vec> w, b;
};
MLPGrads zero_grads(const MLP& net);

// exact reverse-mode gradients; accumulates into grads and returns dL/dx.
// cache must come from a matching forward call with the same mask.
Vec backward(const MLP& net, const ForwardCache& cache, const DropoutMask* mask,
             const Vec& upstream, MLPGrads& grads);

// (v - mean) / sqrt(var + 1e-5), no learned affine
Vec layer_norm(const Vec& v);

// max-subtracted softmax of z / T; throws std::domain_error for T <= 0
Vec softmax_temperature(const Vec& z, double temperature);

// bias-corrected Adam over a list of parameter tensors
struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t step_count = 0;
    std::vector<Vec> m, v;
};

AdamState make_adam(const std::vector<const Vec*>& params, double lr = 1e-3);
void adam_step(std::vector<Vec*> params, const std::vector<const Vec*>& grads, AdamState& state);

// flat views over an MLP's parameters, in a fixed order (W0,b0,W1,b1,...)
std::vector<Vec*> param_refs(MLP& net);
std::vector<const Vec*> grad_refs(const MLPGrads& grads);
std::vector<Vec*> grad_refs_mut(MLPGrads& grads);

// checkpoint format: layer shapes/flags plus flat parameter arrays (JSON)
std::string mlp_to_json(const MLP& net);
MLP mlp_from_json(const std::string& text);

} // namespace np::neural

#endif
