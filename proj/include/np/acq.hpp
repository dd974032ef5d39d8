#ifndef NP_ACQ_HPP
#define NP_ACQ_HPP

#include <array>
#include <deque>
#include <vector>

#include "np/deepgp.hpp"
#include "np/neural.hpp"
#include "np/rankclf.hpp"
#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::acq {

// acquisition input, fixed order:
//   f_hat (M), u_ep_gp (M), u_al_gp (M), p_bar (K), mu_dhv, sigma_dhv
// width 3M + K + 2
using FeatureVector = Vec;

std::size_t feature_width(std::size_t n_obj, std::size_t n_ranks);

// throws std::runtime_error naming the offending source on NaN input
FeatureVector build_features(const deepgp::SurrogatePrediction& pred,
                             const rankclf::ClassifierOutput& clf,
                             double mu_dhv, double sigma_dhv);

struct HistoryRecord {
    FeatureVector feat;          // as scored at selection time
    double delta_hv = 0.0;       // observed HV gain, >= 0
    double delta_div_norm = 0.0; // normalized diversity gain
    std::size_t eval_index = 0;
};

// bounded FIFO of selection outcomes plus the running magnitude estimate
// that normalizes diversity gains
class HistoryBuffer {
public:
    explicit HistoryBuffer(std::size_t capacity = 1000, std::size_t window = 20)
        : capacity_(capacity), window_(window) {}

    void push(HistoryRecord rec);
    const std::deque<HistoryRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t window() const { return window_; }
    double running_abs_div() const { return running_abs_div_; }

    // mean and population std of the most recent min(w, n) delta_hv values;
    // (0,0) when empty
    std::pair<double, double> window_stats() const;

    // normalized diversity gain (after - before) / (1e-8 + running mean of
    // |gain|); seeds and updates the running magnitude as a side effect
    double diversity_target(double div_before, double div_after);

    std::string to_json() const;

private:
    std::size_t capacity_;
    std::size_t window_;
    std::deque<HistoryRecord> records_;
    double running_abs_div_ = 0.0;
    bool seeded_ = false;
};

// two-headed scorer (s_hv, s_div); the HV head is trained on a log1p scale
// and inverted on output. Feature z-scoring uses buffer statistics refreshed
// by each train call.
struct AcqNet {
    neural::MLP net;
    Vec feat_mean, feat_std;  // z-scoring transform
    bool scaler_ready = false;
};

struct AcqConfig {
    std::size_t hidden = 64;
    double lambda_div = 0.5;
    double lambda_reg = 1e-4;
    std::size_t steps = 100;
    double lr = 3e-3;
    std::size_t batch_size = 64;
    std::size_t buffer_capacity = 1000;
    std::size_t window = 20;
};

AcqNet make_acq_net(std::size_t feat_width, const AcqConfig& cfg, Rng& rng);

// deterministic forward pass; HV head expm1-inverted back to the raw scale
std::pair<double, double> score(const AcqNet& net, const FeatureVector& feat);
std::vector<std::pair<double, double>> score_batch(const AcqNet& net,
                                                   const std::vector<FeatureVector>& feats);

// minimizes the composite squared loss over mini-batches; returns the final
// mini-batch loss. Empty buffer: returns 0 and leaves the net untouched.
double train_acquisition(AcqNet& net, const HistoryBuffer& buffer, const AcqConfig& cfg,
                         Rng& rng);

// fixed linear comparator over the same signals:
//   w1*hv_proxy + w2*|u_ep|_1 + w3*|u_al|_1 + w4*p_bar[0] + w5*mu + w6*sigma
double static_score(const FeatureVector& feat, std::size_t n_obj, std::size_t n_ranks,
                    const std::array<double, 6>& weights, double proxy_hv_estimate);

} // namespace np::acq

#endif
