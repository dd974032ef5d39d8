#ifndef NP_DEEPGP_HPP
#define NP_DEEPGP_HPP

#include <cstdint>
#include <vector>

#include "np/bench.hpp"
#include "np/neural.hpp"
#include "np/pareto.hpp"
#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::deepgp {

struct SurrogateConfig {
    std::size_t m_inducing = 120;  // paper-scale 400 via config; capped at archive size
    std::size_t d_rff = 256;       // paper-scale 2048; must be even
    std::size_t s_gp = 8;          // latent propagation samples in predict
    double lr = 3e-2;
    std::size_t warm_epochs = 10;
    std::size_t full_epochs = 50;
    double elbo_rel_tol = 1e-3;    // early stop: relative improvement < 0.1%
    double elbo_drop_tol = 0.02;   // validation drop that doubles inducing count
    std::size_t nlpd_patience = 3; // early stop: val NLPD rising this many epochs
    std::size_t gh_nodes = 7;      // latent marginalization quadrature (training)
    double jitter = 1e-8;
    bool two_layer = true;         // false: single sparse GP (ablation)
    bool heteroscedastic = true;   // false: constant noise (ablation)
};

enum class FitMode { warm_bounded, full_refit };

struct FitReport {
    std::vector<double> elbo_trace;  // ELBO after each epoch's update
    std::size_t epochs_run = 0;
    FitMode refit_kind = FitMode::warm_bounded;
    std::size_t inducing_count = 0;
    double initial_elbo = 0.0;  // before the first update
    double final_elbo = 0.0;    // at the returned (best-so-far) parameters
    bool inducing_doubled = false;
};

struct SurrogatePrediction {
    Vec f_hat;    // M predictive means
    Vec u_ep;     // M epistemic variances (>= 0)
    Vec u_al;     // M aleatoric variances (> 0)
};

struct ProxyPrediction {
    Vec means;              // M approximate predictive means
    double coarse_var = 0;  // layer-1 variance mapped through the layer-2 mean weights
};

// one objective's two-layer stack: whitened sparse variational GP with a
// neural mean function, an RFF-linear second layer with a Gaussian weight
// posterior, and a heteroscedastic noise network. Inputs are normalized to
// the unit box; targets are standardized with the transform fixed at init.
struct ObjectiveGP {
    std::vector<Vec> z_inducing;  // M_ind x D, normalized space
    Vec log_lengthscale;          // D (ARD)
    Vec log_signal;               // size 1: log sigma_f
    Vec v_mean, v_log_var;        // whitened variational posterior, size M_ind
    neural::MLP mean_net;         // D -> 32 -> 16 -> 1
    Vec omega, phase;             // D_rff fixed spectral draws
    Vec w_mean, w_log_var;        // layer-2 weight posterior, size D_rff
    neural::MLP noise_net;        // D -> 32 -> 16 -> 1, exp() parameterization
    Vec const_log_noise;          // size 1, homoscedastic ablation path
    double y_mean = 0.0, y_std = 1.0;

    // read-only prediction caches, rebuilt by finalize()
    Vec l_chol;        // M_ind x M_ind lower triangular, row-major
    Vec whitened_mean; // L^{-T} v_mean
    double slope2 = 0.0;  // mean squared layer-2 slope, for the proxy variance
};

namespace detail {

struct Dataset {
    std::vector<Vec> x;  // normalized inputs
    Vec y;               // standardized targets
};

struct ObjectiveGrads {
    Vec log_lengthscale, log_signal;
    Vec v_mean, v_log_var;
    neural::MLPGrads mean_net;
    Vec w_mean, w_log_var;
    neural::MLPGrads noise_net;
    Vec const_log_noise;
};

ObjectiveGrads zero_grads(const ObjectiveGP& gp);
std::vector<Vec*> param_refs(ObjectiveGP& gp);
std::vector<Vec*> grad_refs(ObjectiveGrads& g);

// full ELBO (expected Gaussian log-likelihood with the latent layer
// marginalized by Gauss-Hermite quadrature, minus the two KL penalties);
// grads may be null. Throws std::runtime_error if the kernel factorization
// stays non-finite after jitter escalation.
double elbo(const ObjectiveGP& gp, const Dataset& data, const SurrogateConfig& cfg,
            ObjectiveGrads* grads);

// mean per-point expected log-likelihood on a holdout (monitoring signal
// for the inducing-doubling rule)
double validation_ell(const ObjectiveGP& gp, const Dataset& val, const SurrogateConfig& cfg);

// deterministic Gaussian predictive on the standardized scale (monitoring)
void monitor_predict(const ObjectiveGP& gp, const Vec& x, const SurrogateConfig& cfg,
                     double& mean, double& var);

double kl_diag_standard(const Vec& mean, const Vec& log_var);

} // namespace detail

class SurrogateModel {
public:
    static SurrogateModel init(const SurrogateConfig& cfg, const Vec& lower, const Vec& upper,
                               const pareto::Archive& archive, Rng& rng);

    FitReport fit(const pareto::Archive& archive, FitMode mode, bool freeze_aleatoric, Rng& rng);

    SurrogatePrediction predict(const Vec& x, std::size_t s_gp, const Rng& stream) const;
    ProxyPrediction proxy_predict(const Vec& x) const;

    // order-preserving batches, data-parallel across candidates; stochastic
    // streams derive from (seed, value bits of x)
    std::vector<SurrogatePrediction> predict_batch(const std::vector<Vec>& xs,
                                                   std::size_t s_gp, std::uint64_t seed) const;
    std::vector<ProxyPrediction> proxy_batch(const std::vector<Vec>& xs) const;

    // mean negative log predictive density under N(f_hat, u_ep + u_al)
    double nlpd(const std::vector<Sample>& holdout) const;

    bool fitted() const { return fits_done_ > 0; }
    std::size_t inducing_count() const { return cfg_.m_inducing; }
    std::size_t n_objectives() const { return objectives_.size(); }
    const SurrogateConfig& config() const { return cfg_; }
    const ObjectiveGP& objective(std::size_t m) const { return objectives_[m]; }
    ObjectiveGP& objective_mut(std::size_t m) { return objectives_[m]; }
    void finalize();  // rebuild prediction caches

    Vec normalize(const Vec& x) const;

    // per-candidate cost model used by the texture tests and the benchmark
    static double predict_flop_estimate(const SurrogateConfig& cfg, std::size_t dim);
    static double proxy_flop_estimate(const SurrogateConfig& cfg, std::size_t dim);

    // checkpoint of every parameter (JSON); prediction caches are rebuilt
    std::string to_json() const;
    static SurrogateModel from_json(const std::string& text);

private:
    SurrogateConfig cfg_;
    Vec lower_, upper_;
    std::vector<ObjectiveGP> objectives_;
    std::vector<neural::AdamState> adam_;  // persists across warm fits
    double last_val_ell_ = 0.0;
    bool has_val_ell_ = false;
    std::size_t fits_done_ = 0;

    detail::Dataset make_dataset(const pareto::Archive& archive, std::size_t m) const;
};

// seeded Lloyd iterations; ties and empty clusters resolved deterministically
std::vector<Vec> kmeans(const std::vector<Vec>& points, std::size_t k, Rng& rng,
                        std::size_t iters = 25);

} // namespace np::deepgp

#endif
