#ifndef NP_RANKCLF_HPP
#define NP_RANKCLF_HPP

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "np/neural.hpp"
#include "np/pareto.hpp"
#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::rankclf {

struct ClassifierConfig {
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 128;
    double dropout = 0.2;
    double lr = 1e-3;
    std::size_t batch_size = 32;
};

struct MCConfig {
    std::size_t s0 = 4;      // baseline stochastic passes
    std::size_t s_max = 32;  // escalation cap
    double tau_mc = 0.01;    // variance threshold
};

// input D -> h1 (ReLU+LN, dropout p) -> h2 (ReLU+LN) -> K logits;
// inputs are min-max scaled to [0,1] with the problem bounds
struct ClassifierModel {
    neural::MLP net;
    double temperature = 1.0;
    std::size_t n_ranks = 0;
    Vec lower, upper;  // input scaling
    bool trained = false;
};

struct ClassifierOutput {
    Vec p_bar;            // calibrated mean distribution over K ranks
    double u_ep = 0.0;    // epistemic information-gain score, clamped >= 0
    std::size_t s_used = 0;
};

ClassifierModel make_classifier(std::size_t input_dim, std::size_t n_ranks,
                                const Vec& lower, const Vec& upper,
                                const ClassifierConfig& cfg, Rng& rng);

// cross-entropy on (x, rank label) pairs with inverse-frequency class
// weights, dropout active; labels are 1-based rank labels. Returns the mean
// final-epoch loss.
double fit_classifier(ClassifierModel& model, const std::vector<Vec>& xs,
                      const std::vector<std::size_t>& labels, std::size_t epochs,
                      const ClassifierConfig& cfg, Rng& rng);

// single deterministic pass (no dropout), unscaled by temperature
Vec logits(const ClassifierModel& model, const Vec& x);

// NLL grid search core: T over a log-spaced grid [0.05, 20], 200 points.
// Exposed separately so synthetic logits can be calibrated directly.
double fit_temperature_grid(const std::vector<Vec>& logit_rows,
                            const std::vector<std::size_t>& labels);

// fits T on a held-out calibration set and stores it in the model.
// Empty set: T stays 1 and false is returned (caller may warn).
bool fit_temperature(ClassifierModel& model, const std::vector<Vec>& xs,
                     const std::vector<std::size_t>& labels);

// adaptive pass count of the escalation rule: S0 if sigma2 <= tau, else
// min(S_max, S0 * ceil(sigma2 / tau))
std::size_t adaptive_pass_count(double sigma2, const MCConfig& mc);

// S0 stochastic passes, temperature-scaled per pass; escalates by the
// adaptive rule appending further passes; u_ep = H[p_bar] - mean_s H[p_s]
ClassifierOutput predict_with_uncertainty(const ClassifierModel& model, const Vec& x,
                                          const MCConfig& mc, const Rng& stream);

// batched prediction with per-iteration cache. Stochastic streams derive
// from the candidate's value bits, so duplicates agree and results do not
// depend on batch order or thread count.
class PredictionCache {
public:
    void next_iteration() { ++iteration_; cache_.clear(); }
    std::size_t iteration() const { return iteration_; }

    std::vector<ClassifierOutput> predict_batch(const ClassifierModel& model,
                                                const std::vector<Vec>& pool,
                                                const MCConfig& mc, std::uint64_t seed);

private:
    std::size_t iteration_ = 0;
    std::unordered_map<std::uint64_t, ClassifierOutput> cache_;
};

double entropy(const Vec& p);

// checkpoint: neural module format plus temperature, K and input bounds
std::string to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const std::string& text);

} // namespace np::rankclf

#endif
