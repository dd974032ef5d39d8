#ifndef NP_PARETO_HPP
#define NP_PARETO_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "np/types.hpp"

namespace np::pareto {

// strict Pareto dominance, minimization: a <= b componentwise with at least
// one strict inequality. Throws std::domain_error on length mismatch.
bool dominates(const Vec& a, const Vec& b);

// 1-based front index per point (front 1 = nondominated set, front f =
// nondominated after removing fronts 1..f-1). Deb-style domination counts,
// data-parallel over the pairwise pass.
std::vector<std::size_t> nondominated_sort(const std::vector<Vec>& points);

// collapse fronts deeper than K into label K
std::vector<std::size_t> rank_labels(const std::vector<std::size_t>& fronts, std::size_t k);
std::vector<std::size_t> rank_labels(const std::vector<Vec>& points, std::size_t k);

// Per-point crowding distance over a mutually nondominated front (not
// enforced). Interior point: sum over objectives of (next - prev) / span.
// Boundary points (first/last in any objective's sort order) get the
// constant 2M; a degenerate objective (max == min) contributes 0.
std::vector<double> crowding_distance(const std::vector<Vec>& front);

// growing set of all true evaluations with cached nondomination ranks.
// Single-writer; reads between mutations see a consistent snapshot.
class Archive {
public:
    void insert(std::vector<Sample> batch);         // appends, re-sorts ranks
    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<std::size_t>& ranks() const { return ranks_; }
    std::vector<Vec> pareto_front_objectives() const;  // rank-1 subset, archive order
    std::vector<Vec> objectives() const;
    std::vector<Vec> decisions() const;
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

    std::string to_json() const;

private:
    std::vector<Sample> samples_;
    std::vector<std::size_t> ranks_;
};

// mean crowding distance over the archive's rank-1 subset
double archive_diversity(const Archive& archive);

} // namespace np::pareto

#endif
