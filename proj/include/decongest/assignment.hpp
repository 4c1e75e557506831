#pragma once

#include "decongest/types.hpp"

#include <limits>
#include <vector>

namespace decongest {

struct Matching {
    /// item_of_user[i] is the matched item of user i, or -1.
    std::vector<int> item_of_user;
    double objective = 0.0;
};

namespace detail {

/// Shortest-augmenting-path Hungarian method with row/column potentials on a
/// square cost matrix. Returns the row assigned to each column.
inline std::vector<int> hungarian_min_cost(const Matrix& cost)
{
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);

    for (int i = 1; i <= n; ++i) {
        row_of[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = row_of[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> out(n, -1);
    for (int j = 1; j <= n; ++j) out[j - 1] = row_of[j] - 1;
    return out;
}

}  // namespace detail

/// Welfare-maximizing matching of users (rows) to items (columns) for a
/// non-negative value matrix. Rectangular inputs are padded with zero-value
/// dummies which are stripped from the result.
inline Matching max_weight_matching(const Matrix& values)
{
    require(values.allFinite(), "assignment values must be finite");
    const int n = static_cast<int>(values.rows());
    const int m = static_cast<int>(values.cols());
    Matching out;
    out.item_of_user.assign(n, -1);
    if (n == 0 || m == 0) return out;

    const int size = std::max(n, m);
    Matrix cost = Matrix::Zero(size, size);
    cost.topLeftCorner(n, m) = -values;
    const std::vector<int> row_of_col = detail::hungarian_min_cost(cost);
    for (int j = 0; j < m; ++j) {
        const int i = row_of_col[j];
        if (i >= 0 && i < n) {
            out.item_of_user[i] = j;
            out.objective += values(i, j);
        }
    }
    return out;
}

inline double optimal_welfare(const Matrix& values) { return max_weight_matching(values).objective; }

}  // namespace decongest
