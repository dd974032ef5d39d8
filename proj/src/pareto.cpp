#include "np/pareto.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "np/parallel.hpp"

namespace np::pareto {

bool dominates(const Vec& a, const Vec& b)
{
    if (a.size() != b.size())
        throw std::domain_error("dominates: objective length mismatch");
    bool strict = false;
    for (std::size_t m = 0; m < a.size(); ++m) {
        if (a[m] > b[m]) return false;
        if (a[m] < b[m]) strict = true;
    }
    return strict;
}

std::vector<std::size_t> nondominated_sort(const std::vector<Vec>& points)
{
    const std::size_t n = points.size();
    if (n == 0) throw std::domain_error("nondominated_sort: empty input");

    // per-point domination count and list of points it dominates; each index
    // fills only its own slots, so the pass parallelizes without races
    std::vector<std::size_t> dom_count(n, 0);
    std::vector<std::vector<std::size_t>> dominated(n);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(points[j], points[i])) ++dom_count[i];
            else if (dominates(points[i], points[j])) dominated[i].push_back(j);
        }
    });

    std::vector<std::size_t> front(n, 0);
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (dom_count[i] == 0) current.push_back(i);

    std::size_t level = 1;
    std::size_t assigned = 0;
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t i : current) {
            front[i] = level;
            ++assigned;
            for (std::size_t j : dominated[i]) {
                if (--dom_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
        ++level;
    }
    if (assigned != n) throw std::logic_error("nondominated_sort: cycle in dominance graph");
    return front;
}

std::vector<std::size_t> rank_labels(const std::vector<std::size_t>& fronts, std::size_t k)
{
    if (k < 2) throw std::invalid_argument("rank_labels: K >= 2 required");
    std::vector<std::size_t> labels(fronts.size());
    for (std::size_t i = 0; i < fronts.size(); ++i) labels[i] = std::min(fronts[i], k);
    return labels;
}

std::vector<std::size_t> rank_labels(const std::vector<Vec>& points, std::size_t k)
{
    return rank_labels(nondominated_sort(points), k);
}

std::vector<double> crowding_distance(const std::vector<Vec>& front)
{
    const std::size_t n = front.size();
    std::vector<double> cd(n, 0.0);
    if (n == 0) return cd;
    const std::size_t m_obj = front[0].size();
    const double boundary = 2.0 * static_cast<double>(m_obj);
    if (n <= 2) {
        std::fill(cd.begin(), cd.end(), boundary);
        return cd;
    }

    std::vector<char> is_boundary(n, 0);
    std::vector<std::size_t> order(n);
    for (std::size_t m = 0; m < m_obj; ++m) {
        std::iota(order.begin(), order.end(), 0);
        // ties broken by the remaining objectives lexicographically, then
        // input index, so the neighbor structure is deterministic
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (front[a][m] != front[b][m]) return front[a][m] < front[b][m];
            for (std::size_t mm = 0; mm < m_obj; ++mm) {
                if (mm == m) continue;
                if (front[a][mm] != front[b][mm]) return front[a][mm] < front[b][mm];
            }
            return a < b;
        });
        double span = front[order[n - 1]][m] - front[order[0]][m];
        is_boundary[order[0]] = 1;
        is_boundary[order[n - 1]] = 1;
        if (span <= 0.0) continue;  // degenerate objective contributes 0
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double gap = front[order[i + 1]][m] - front[order[i - 1]][m];
            cd[order[i]] += gap / span;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (is_boundary[i]) cd[i] = boundary;
    return cd;
}

void Archive::insert(std::vector<Sample> batch)
{
    for (auto& s : batch) {
        s.eval_index = samples_.size();
        samples_.push_back(std::move(s));
    }
    if (samples_.empty()) return;
    std::vector<Vec> objs = objectives();
    ranks_ = nondominated_sort(objs);
}

std::vector<Vec> Archive::pareto_front_objectives() const
{
    std::vector<Vec> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (ranks_[i] == 1) out.push_back(samples_[i].f);
    return out;
}

std::vector<Vec> Archive::objectives() const
{
    std::vector<Vec> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.f);
    return out;
}

std::vector<Vec> Archive::decisions() const
{
    std::vector<Vec> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.x);
    return out;
}

std::string Archive::to_json() const
{
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        os << (i ? ",\n" : "\n") << " {\"eval_index\":" << s.eval_index << ",\"x\":[";
        for (std::size_t d = 0; d < s.x.size(); ++d) os << (d ? "," : "") << s.x[d];
        os << "],\"f\":[";
        for (std::size_t m = 0; m < s.f.size(); ++m) os << (m ? "," : "") << s.f[m];
        os << "],\"rank\":" << ranks_[i] << "}";
    }
    os << "\n]\n";
    return os.str();
}

double archive_diversity(const Archive& archive)
{
    if (archive.empty()) throw std::domain_error("archive_diversity: empty archive");
    auto front = archive.pareto_front_objectives();
    auto cd = crowding_distance(front);
    double sum = 0.0;
    for (double v : cd) sum += v;
    return sum / static_cast<double>(cd.size());
}

} // namespace np::pareto
