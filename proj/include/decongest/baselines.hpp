#pragma once

#include "decongest/market.hpp"
#include "decongest/objectives.hpp"
#include "decongest/policy.hpp"
#include "decongest/predictor.hpp"
#include "decongest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace decongest {

enum class OrderingSource { lasso_path, choice_pred };

/// Features ranked most important first.
struct FeatureOrdering {
    std::vector<int> order;
    OrderingSource source = OrderingSource::lasso_path;

    Mask top(int k) const
    {
        require(k >= 0 && k <= static_cast<int>(order.size()), "ordering: k out of range");
        return Mask::from_indices(order.size(), std::vector<int>(order.begin(), order.begin() + k));
    }
};

struct LassoPath {
    std::vector<double> lambdas;
    std::vector<int> first_active;  // grid index of first activation, -1 if never
    Vector final_coef;              // at the smallest lambda (standardized scale)
};

/// Coordinate-descent Lasso path of y on standardized columns of X with
/// objective (1/2n)||y - Xb||^2 + lambda ||b||_1, on a geometric grid from
/// lambda_max down to ratio * lambda_max.
inline LassoPath lasso_path(const Matrix& x, const Vector& y, int grid = 100, double ratio = 1e-3, int max_sweeps = 10000,
                            double tol = 1e-10)
{
    const Eigen::Index n = x.rows(), d = x.cols();
    require(n >= 2 && x.rows() == y.size(), "lasso: need one response per row and at least two rows");
    require(grid >= 2 && ratio > 0.0 && ratio < 1.0, "lasso: invalid grid");
    Matrix z = x;
    for (Eigen::Index l = 0; l < d; ++l) {
        const double mu = z.col(l).mean();
        z.col(l).array() -= mu;
        const double sd = std::sqrt(z.col(l).squaredNorm() / n);
        if (sd > 0.0) z.col(l) /= sd;
    }
    const Vector yc = y.array() - y.mean();
    const Vector col_sq = z.colwise().squaredNorm().transpose() / static_cast<double>(n);
    const double lmax = (z.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(n);

    LassoPath path;
    path.first_active.assign(d, -1);
    Vector b = Vector::Zero(d);
    Vector r = yc;
    for (int g = 0; g < grid; ++g) {
        const double lam = lmax * std::pow(ratio, static_cast<double>(g) / (grid - 1));
        path.lambdas.push_back(lam);
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double delta = 0.0;
            for (Eigen::Index l = 0; l < d; ++l) {
                if (col_sq(l) == 0.0) continue;
                const double rho = z.col(l).dot(r) / static_cast<double>(n) + col_sq(l) * b(l);
                const double nb = std::copysign(std::max(std::abs(rho) - lam, 0.0), rho) / col_sq(l);
                if (nb != b(l)) {
                    r -= (nb - b(l)) * z.col(l);
                    delta = std::max(delta, std::abs(nb - b(l)));
                    b(l) = nb;
                }
            }
            if (delta < tol) break;
        }
        for (Eigen::Index l = 0; l < d; ++l)
            if (path.first_active[l] < 0 && b(l) != 0.0) path.first_active[l] = g;
    }
    path.final_coef = b;
    return path;
}

/// Features in order of first activation along the path; ties and never
/// active features by final |coefficient|, then index.
inline FeatureOrdering lasso_ordering(const LassoPath& path)
{
    const int d = static_cast<int>(path.first_active.size());
    FeatureOrdering out;
    out.source = OrderingSource::lasso_path;
    out.order.resize(d);
    std::iota(out.order.begin(), out.order.end(), 0);
    auto key = [&](int l) { return path.first_active[l] < 0 ? std::numeric_limits<int>::max() : path.first_active[l]; };
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
        if (key(a) != key(b)) return key(a) < key(b);
        return std::abs(path.final_coef(a)) > std::abs(path.final_coef(b));
    });
    return out;
}

/// Top-k features for predicting item prices from item features.
inline Mask price_pred_mask(const Matrix& item_features, const Vector& item_prices, int k)
{
    require(k >= 0 && k <= item_features.cols(), "price_pred_mask: k out of range");
    return lasso_ordering(lasso_path(item_features, item_prices)).top(k);
}

/// Mean price of each item across markets sharing one item set.
inline Vector mean_item_prices(const std::vector<Market>& markets)
{
    require(!markets.empty(), "mean_item_prices: no markets");
    Vector p = Vector::Zero(markets.front().num_items());
    for (const Market& mk : markets) p += mk.prices;
    return p / static_cast<double>(markets.size());
}

/// Mean estimated preference u_i W over users, most preferred features first.
inline FeatureOrdering choice_pred_ordering(const PredictorWeights& w, const Matrix& user_features)
{
    require(user_features.rows() > 0 && user_features.cols() == w.W.rows(), "choice_pred: shape mismatch");
    const Vector mean_pref = (user_features * w.W).colwise().mean().transpose();
    FeatureOrdering out;
    out.source = OrderingSource::choice_pred;
    out.order.resize(mean_pref.size());
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) { return mean_pref(a) > mean_pref(b); });
    return out;
}

inline Mask choice_pred_mask(const PredictorWeights& w, const Matrix& user_features, int k)
{
    return choice_pred_ordering(w, user_features).top(k);
}

struct RandomBaseline {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_draw;  // mean welfare over markets, per mask draw
};

/// Welfare of uniformly random k-masks; statistics over draws x markets.
inline RandomBaseline random_baseline(const std::vector<Market>& markets, int k, int draws, std::uint64_t seed,
                                      Imputation mode = Imputation::zero)
{
    require(!markets.empty() && draws > 0, "random_baseline: need markets and draws");
    const int d = static_cast<int>(markets.front().num_features());
    Rng rng(seed);
    RandomBaseline out;
    double s = 0.0, s2 = 0.0;
    long count = 0;
    for (int t = 0; t < draws; ++t) {
        const Mask mask = uniform_mask(d, k, rng);
        double per = 0.0;
        for (const Market& mk : markets) {
            const double w = mask_welfare(mk, mask, mode);
            per += w;
            s += w;
            s2 += w * w;
            ++count;
        }
        out.per_draw.push_back(per / static_cast<double>(markets.size()));
    }
    out.mean = s / count;
    out.std = count > 1 ? std::sqrt(std::max(0.0, (s2 - count * out.mean * out.mean) / (count - 1))) : 0.0;
    return out;
}

}  // namespace decongest
