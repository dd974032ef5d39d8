#ifndef NP_TYPES_HPP
#define NP_TYPES_HPP

#include <cstddef>
#include <vector>

namespace np {

using Vec = std::vector<double>;

// one evaluated decision vector. eval_index is the order of true evaluation,
// 0-based, unique within an archive.
struct Sample {
    Vec x;
    Vec f;
    std::size_t eval_index = 0;
};

} // namespace np

#endif
