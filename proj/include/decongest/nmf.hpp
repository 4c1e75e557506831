#pragma once

#include "decongest/ratings.hpp"
#include "decongest/rng.hpp"
#include "decongest/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace decongest {

struct NmfOptions {
    int iterations = 500;
    std::uint64_t seed = 0;
};

struct NmfResult {
    Matrix left;   // rows x rank
    Matrix right;  // cols x rank
    std::vector<double> objective;  // 0.5 * squared error on observed entries, per iteration (index 0 = init)
};

namespace detail {

inline Matrix random_factor(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng)
{
    Matrix f(rows, cols);
    for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = scale * (0.05 + rng.uniform());
    return f;
}

inline double observed_loss(const std::vector<Rating>& obs, const Matrix& p, const Matrix& q)
{
    double s = 0.0;
    for (const Rating& r : obs) {
        const double e = r.value - p.row(r.user).dot(q.row(r.item));
        s += e * e;
    }
    return 0.5 * s;
}

/// One multiplicative update of `target` with `other` fixed, restricted to
/// observed entries. `transpose` swaps the roles of users and items.
inline void masked_update(const std::vector<Rating>& obs, Matrix& target, const Matrix& other, bool transpose)
{
    Matrix num = Matrix::Zero(target.rows(), target.cols());
    Matrix den = Matrix::Zero(target.rows(), target.cols());
    for (const Rating& r : obs) {
        const int a = transpose ? r.item : r.user;
        const int b = transpose ? r.user : r.item;
        const double pred = target.row(a).dot(other.row(b));
        num.row(a) += r.value * other.row(b);
        den.row(a) += pred * other.row(b);
    }
    for (Eigen::Index k = 0; k < target.size(); ++k) {
        if (den(k) > 0.0) target(k) *= num(k) / den(k);
    }
}

}  // namespace detail

/// Masked multiplicative-update NMF: R ~ L R^T on observed entries only.
inline NmfResult masked_nmf(const std::vector<Rating>& observed, int rows, int cols, int rank,
                            const NmfOptions& opt = {})
{
    require(rank > 0, "nmf: rank must be positive");
    require(rank <= std::min(rows, cols), "nmf: rank exceeds matrix dimensions");
    require(!observed.empty(), "nmf: no observed entries");
    double mean = 0.0;
    for (const Rating& r : observed) {
        require(r.value >= 0.0, "nmf: entries must be non-negative");
        mean += r.value;
    }
    mean /= static_cast<double>(observed.size());
    Rng rng(opt.seed);
    const double scale = std::sqrt(std::max(mean, 1e-12) / rank);
    NmfResult res;
    res.left = detail::random_factor(rows, rank, scale, rng);
    res.right = detail::random_factor(cols, rank, scale, rng);
    res.objective.push_back(detail::observed_loss(observed, res.left, res.right));
    for (int it = 0; it < opt.iterations; ++it) {
        detail::masked_update(observed, res.left, res.right, false);
        detail::masked_update(observed, res.right, res.left, true);
        res.objective.push_back(detail::observed_loss(observed, res.left, res.right));
    }
    return res;
}

/// Fully observed dense matrix as rating triples (for the second factorization).
inline std::vector<Rating> dense_entries(const Matrix& a)
{
    std::vector<Rating> out;
    out.reserve(a.size());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.push_back(Rating{static_cast<int>(i), static_cast<int>(j), a(i, j)});
    return out;
}

/// Item features X, user preferences B, user features U, and the map T with
/// U T^T ~ B.
struct FactorizedPool {
    Matrix item_features;     // m_total x d
    Matrix preferences;       // n_total x d
    Matrix user_features;     // n_total x d'
    Matrix feature_map;       // d x d'
    std::vector<double> rating_objective;
    std::vector<double> preference_objective;
};

struct FactorizeOptions {
    int d = 12;
    int d_user = 0;  // 0 means d / 2
    int iterations = 500;
    double preference_scale = 0.2;  // ratings are on 1..5
    std::uint64_t seed = 0;
};

inline FactorizedPool factorize(const RatingSet& ratings, const FactorizeOptions& opt)
{
    const int d_user = opt.d_user > 0 ? opt.d_user : std::max(1, opt.d / 2);
    require(opt.d <= std::min(ratings.num_users(), ratings.num_items()),
            "factorize: d exceeds the rating matrix dimensions");
    NmfResult first = masked_nmf(ratings.entries, ratings.num_users(), ratings.num_items(), opt.d,
                                 NmfOptions{opt.iterations, derive_seed(opt.seed, "nmf-ratings")});
    FactorizedPool pool;
    pool.item_features = first.right;
    pool.preferences = opt.preference_scale * first.left;
    // Keep every value inside [0, 1].
    const double vmax = (pool.preferences * pool.item_features.transpose()).maxCoeff();
    if (vmax > 1.0) pool.preferences /= vmax;
    pool.rating_objective = std::move(first.objective);

    NmfResult second = masked_nmf(dense_entries(pool.preferences), static_cast<int>(pool.preferences.rows()),
                                  opt.d, d_user, NmfOptions{opt.iterations, derive_seed(opt.seed, "nmf-preferences")});
    pool.user_features = second.left;
    pool.feature_map = second.right;
    pool.preference_objective = std::move(second.objective);
    return pool;
}

}  // namespace decongest
