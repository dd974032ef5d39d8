#ifndef NP_LOOP_HPP
#define NP_LOOP_HPP

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "np/acq.hpp"
#include "np/bench.hpp"
#include "np/deepgp.hpp"
#include "np/pareto.hpp"
#include "np/quality.hpp"
#include "np/rankclf.hpp"
#include "np/types.hpp"

namespace np::loop {

enum class Ablation { uncertainty, deepgp, learned_acq, temp_scaling };

struct SelectionWeights {
    double alpha_hv = 1.0;
    double alpha_div = 0.3;
    double alpha_clf = 0.3;
};

struct LoopConfig {
    std::size_t budget = 300;
    std::size_t batch_q = 5;
    std::size_t pool_size = 1000;    // |C_rank|
    std::size_t n_screen = 500;
    std::size_t top_k = 200;         // full-surrogate evaluations per iteration
    std::size_t init_size = 0;       // 0: 100 for D < 100, 200 otherwise
    std::size_t n_ranks = 5;         // K
    std::size_t clf_epochs = 80;
    std::size_t ref_front_size = 0;  // 0: 1000 for M=2, 5000 for M=3
    std::size_t freeze_aleatoric_iters = 3;
    rankclf::MCConfig mc;
    rankclf::ClassifierConfig classifier;
    deepgp::SurrogateConfig surrogate;
    acq::AcqConfig acquisition;
    SelectionWeights selection;
    std::array<double, 6> static_weights = {1.0, 0.3, 0.0, 0.3, 0.0, 0.0};
    bool log_topk = false;  // analysis mode: record the screened top-k per iteration

    std::size_t effective_init(std::size_t dim) const
    {
        if (init_size) return init_size;
        return dim < 100 ? 100 : 200;
    }
    std::size_t effective_front(std::size_t n_obj) const
    {
        if (ref_front_size) return ref_front_size;
        return n_obj == 2 ? 1000 : 5000;
    }
    void validate(std::size_t dim) const;  // throws std::invalid_argument
};

struct IterationRow {
    std::size_t iteration = 0;     // 0 = initial design
    std::size_t evals = 0;
    double hv = 0.0;
    double igd = 0.0;
    double mean_s_used = 0.0;
    std::string refit = "none";    // none | full | warm
    std::size_t epochs = 0;
    double acq_loss = 0.0;
    double seconds = 0.0;          // wall time; not part of the determinism contract
};

struct RunResult {
    pareto::Archive archive;
    std::vector<IterationRow> rows;
    std::vector<acq::HistoryRecord> history;
    Vec hv_ref_point;              // fixed at run start
    std::uint64_t seed = 0;
    std::string mode = "neuropareto";
    double final_hv = 0.0;
    double final_igd = 0.0;
    std::vector<std::vector<Vec>> topk_log;     // filled when config.log_topk
    std::vector<deepgp::FitReport> fit_reports;  // one per outer iteration
};

// rank-conditioned variation: rank-biased tournament parents (weight
// 2^(K - predicted rank)), SBX crossover (eta_c 15, rate 0.9), polynomial
// mutation with per-gene rate 1/D and eta_m = 20*(1-(rbar-1)/(K-1)) + 5
std::vector<Vec> generate_candidates(const pareto::Archive& archive,
                                     const std::vector<rankclf::ClassifierOutput>& parent_outputs,
                                     const bench::ProblemSpec& problem,
                                     std::size_t pool_size, std::size_t n_ranks, Rng& rng);

double mutation_eta(double mean_rank, std::size_t n_ranks);

struct ScreenEntry {
    std::size_t pool_index = 0;
    double proxy_score = 0.0;
    deepgp::ProxyPrediction proxy;
};

// proxy HV contribution - 0.5 * coarse variance + 0.1 * classifier epistemic
// bonus; descending, ties by pool index
std::vector<ScreenEntry> screen(const std::vector<Vec>& pool,
                                const std::vector<rankclf::ClassifierOutput>& clf_outputs,
                                const deepgp::SurrogateModel& surrogate,
                                std::size_t n_screen,
                                const std::vector<Vec>& front,
                                const quality::HVConfig& hv_cfg);

struct CompositeInputs {
    std::vector<Vec> candidates;          // the screened top-k decision vectors
    std::vector<double> s_hv;             // acquisition HV head
    std::vector<double> s_div;            // acquisition diversity head
    std::vector<double> u_ep_clf;
    std::vector<double> s_hv_sur;         // exact HV contribution of f_hat
};

// z-scored blend, greedy pick of q with an L-inf dedup in normalized space
std::vector<std::size_t> composite_select(const CompositeInputs& in, std::size_t q,
                                          const SelectionWeights& weights,
                                          const bench::ProblemSpec& problem);

RunResult run(const bench::ProblemSpec& problem, const LoopConfig& config, std::uint64_t seed);
RunResult run_random_baseline(const bench::ProblemSpec& problem, const LoopConfig& config,
                              std::uint64_t seed);
RunResult run_static_baseline(const bench::ProblemSpec& problem, const LoopConfig& config,
                              const std::array<double, 6>& weights, std::uint64_t seed);
RunResult run_ablation(const bench::ProblemSpec& problem, const LoopConfig& config,
                       const std::set<Ablation>& disable, std::uint64_t seed);

// recompute every logged delta_hv from the archive's evaluation order;
// returns the max absolute deviation (replay oracle for the history targets)
double replay_max_error(const RunResult& result, const quality::HVConfig& hv_cfg);

} // namespace np::loop

#endif
