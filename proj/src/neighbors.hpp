#pragma once
// Brute-force k-nearest-neighbor scan over a row-major standardized matrix.

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "epic/kernels.hpp"

namespace epic::detail {

inline std::vector<std::size_t> nearest_rows(const std::vector<double>& xs, std::size_t n,
                                             std::size_t p, std::span<const double> q,
                                             std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = {kernels::sq_dist(xs.data() + i * p, q.data(), p), i};
    k = std::min(k, n);
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = d[i].second;
    return idx;
}

} // namespace epic::detail
