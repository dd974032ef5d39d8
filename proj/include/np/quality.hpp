#ifndef NP_QUALITY_HPP
#define NP_QUALITY_HPP

#include <cstdint>
#include <vector>

#include "np/bench.hpp"
#include "np/pareto.hpp"
#include "np/rng.hpp"
#include "np/types.hpp"

namespace np::quality {

struct HVConfig {
    Vec ref_point;                 // reference point z; points beyond it contribute 0
    std::size_t mc_samples = 100000;  // used when M > 3
    std::uint64_t mc_seed = 0x9042e415c31ad1e2ULL;  // dedicated stream, not the optimizer RNG
};

// mean over reference points of Euclidean distance to the nearest solution
double igd(const std::vector<Vec>& solutions, const std::vector<Vec>& reference);

// exact for M <= 3 (recursive dimension sweep with 2-D staircase base case),
// Monte Carlo over [min-corner, z] otherwise
double hypervolume(const std::vector<Vec>& points, const HVConfig& cfg);
double hypervolume_exact(const std::vector<Vec>& points, const Vec& ref_point);
double hypervolume_mc(const std::vector<Vec>& points, const HVConfig& cfg);

// HV(points + {candidate}) - HV(points), clamped at 0
double delta_hv(const std::vector<Vec>& points, const Vec& candidate, const HVConfig& cfg);

struct CalibrationMetrics {
    double ece = 0.0;  // budget-weighted mean |acc - conf| over bins
    double mce = 0.0;  // max over nonempty bins
    double ace = 0.0;  // unweighted mean over nonempty bins
};

struct BinStat {
    double center = 0.0;
    double confidence = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

// confidences: (max predicted probability, prediction correct?) pairs
CalibrationMetrics calibration_metrics(const std::vector<std::pair<double, bool>>& confidences,
                                       std::size_t bins = 15);
std::vector<BinStat> reliability_bins(const std::vector<std::pair<double, bool>>& confidences,
                                      std::size_t bins = 15);

struct ConstantsEstimate {
    double l_h = 0.0;    // 95% quantile of |dHVC| / |dy|_1 under relative perturbation
    double h_max = 0.0;  // worst observed single-replacement HV loss
    double rho = 0.0;    // median realized/oracle gain ratio
    std::size_t l_h_samples = 0;
    std::size_t h_max_trials = 0;
    std::size_t rho_pairs = 0;
};

// 95% quantile of dHV-contribution ratios over n uniformly sampled decisions,
// perturbation y' = y*(1+delta); contributions measured against the archive's
// rank-1 set
double estimate_l_h(const bench::ProblemSpec& problem, const pareto::Archive& archive,
                    std::size_t n, double delta, const HVConfig& cfg, Rng& rng);

// max single-evaluation HV loss when one archive member is replaced by a
// zero-contribution candidate (the reference point)
double estimate_h_max(const std::vector<std::vector<Vec>>& archive_scenarios,
                      std::size_t trials, const HVConfig& cfg, Rng& rng);

// median of realized/oracle gain ratios; zero-oracle entries skipped
double estimate_rho(const std::vector<double>& oracle_gains,
                    const std::vector<double>& realized_gains);

// floor(budget / n_min): upper bound on usable rank class count
std::size_t suggest_k(std::size_t budget, std::size_t n_min);

} // namespace np::quality

#endif
