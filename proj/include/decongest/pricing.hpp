#pragma once

#include "decongest/assignment.hpp"
#include "decongest/rng.hpp"
#include "decongest/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

namespace decongest {

/// Optimal assignment together with a competitive-equilibrium dual (p, pi).
struct PricingSolution {
    Matrix assignment;              // n x m, integral
    std::vector<int> item_of_user;  // -1 for unassigned users
    Vector prices;                  // length m
    Vector profits;                 // length n
    double objective = 0.0;         // optimal welfare
};

/// Buyer-optimal (minimal), seller-optimal (maximal) and mid-range CE prices.
struct CorePrices {
    Vector buyer;
    Vector seller;
    Vector mid;
    Matching matching;
};

namespace detail {

inline Matrix drop_row(const Matrix& a, Eigen::Index r)
{
    Matrix out(a.rows() - 1, a.cols());
    out.topRows(r) = a.topRows(r);
    out.bottomRows(a.rows() - r - 1) = a.bottomRows(a.rows() - r - 1);
    return out;
}

inline Matrix drop_col(const Matrix& a, Eigen::Index c)
{
    Matrix out(a.rows(), a.cols() - 1);
    out.leftCols(c) = a.leftCols(c);
    out.rightCols(a.cols() - c - 1) = a.rightCols(a.cols() - c - 1);
    return out;
}

inline void check_values(const Matrix& values)
{
    require(values.allFinite(), "pricing: values must be finite");
    require(values.size() == 0 || values.minCoeff() >= 0.0, "pricing: values must be non-negative");
}

inline double tolerance_for(double objective) { return 1e-9 * std::max(1.0, std::abs(objective)); }

}  // namespace detail

/// pi_i = max(0, max_j v_ij - p_j): the cheapest profits completing a dual.
inline Vector completion_profits(const Matrix& values, const Vector& prices)
{
    Vector profits = Vector::Zero(values.rows());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            profits(i) = std::max(profits(i), values(i, j) - prices(j));
        }
    }
    return profits;
}

/// Worst violation of the dual constraints and the duality gap of (p, pi).
struct DualResidual {
    double feasibility = 0.0;  // max(0, max_ij v_ij - p_j - pi_i, -min p, -min pi)
    double gap = 0.0;          // |sum p + sum pi - objective|
};

inline DualResidual dual_residual(const Matrix& values, const Vector& prices, const Vector& profits,
                                  double objective)
{
    DualResidual r;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            r.feasibility = std::max(r.feasibility, values(i, j) - prices(j) - profits(i));
        }
    }
    if (prices.size() > 0) r.feasibility = std::max(r.feasibility, -prices.minCoeff());
    if (profits.size() > 0) r.feasibility = std::max(r.feasibility, -profits.minCoeff());
    r.gap = std::abs(prices.sum() + profits.sum() - objective);
    return r;
}

namespace detail {

inline PricingSolution finish(const Matrix& values, const Matching& matching, Vector prices,
                              const char* which)
{
    PricingSolution sol;
    const auto n = values.rows();
    const auto m = values.cols();
    sol.item_of_user = matching.item_of_user;
    sol.objective = matching.objective;
    sol.assignment = Matrix::Zero(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (sol.item_of_user[i] >= 0) sol.assignment(i, sol.item_of_user[i]) = 1.0;
    }
    sol.prices = std::move(prices);
    sol.profits = completion_profits(values, sol.prices);
    const DualResidual r = dual_residual(values, sol.prices, sol.profits, sol.objective);
    const double tol = tolerance_for(sol.objective) * 10.0;
    if (r.feasibility > tol || r.gap > tol) {
        std::ostringstream os;
        os << which << " prices failed the dual check: feasibility residual " << r.feasibility
           << ", duality gap " << r.gap;
        throw Error(os.str());
    }
    return sol;
}

}  // namespace detail

/// Extremal points of the CE price lattice via marginal contributions:
/// the seller-optimal price of item j is V - V(without j); the buyer-optimal
/// profit of user i is V - V(without i), which pins the price of i's item.
inline CorePrices core_prices(const Matrix& values)
{
    detail::check_values(values);
    const auto n = values.rows();
    const auto m = values.cols();
    CorePrices core;
    core.matching = max_weight_matching(values);
    const double total = core.matching.objective;
    const double tol = detail::tolerance_for(total);

    core.seller = Vector::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double without = optimal_welfare(detail::drop_col(values, j));
        core.seller(j) = std::max(0.0, total - without);
        if (core.seller(j) < tol) core.seller(j) = 0.0;
    }

    core.buyer = Vector::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int j = core.matching.item_of_user[i];
        if (j < 0) continue;
        const double surplus = total - optimal_welfare(detail::drop_row(values, i));
        double p = values(i, j) - surplus;
        if (p < tol) p = 0.0;
        core.buyer(j) = p;
    }
    core.mid = 0.5 * (core.buyer + core.seller);
    return core;
}

inline PricingSolution buyer_optimal_prices(const Matrix& values)
{
    CorePrices core = core_prices(values);
    return detail::finish(values, core.matching, core.buyer, "buyer-optimal");
}

inline PricingSolution seller_optimal_prices(const Matrix& values)
{
    CorePrices core = core_prices(values);
    return detail::finish(values, core.matching, core.seller, "seller-optimal");
}

/// Optimal assignment with mid-range CE prices (midpoint of the buyer- and
/// seller-optimal vectors, itself a core point).
inline PricingSolution solve_assignment(const Matrix& values)
{
    CorePrices core = core_prices(values);
    return detail::finish(values, core.matching, core.mid, "mid-range");
}

inline Vector mid_prices(const Matrix& values) { return core_prices(values).mid; }

/// gamma in [0, 0.5] moves buyer-optimal -> mid, (0.5, 1] moves mid -> seller-optimal.
inline Vector interpolate_ce(const CorePrices& core, double gamma)
{
    require(gamma >= 0.0 && gamma <= 1.0, "interpolate_ce: gamma must lie in [0, 1]");
    // Grid endpoints return the stored vectors exactly.
    if (gamma == 0.0) return core.buyer;
    if (gamma == 0.5) return core.mid;
    if (gamma == 1.0) return core.seller;
    if (gamma < 0.5) {
        const double t = gamma / 0.5;
        return core.buyer + t * (core.mid - core.buyer);
    }
    const double t = (gamma - 0.5) / 0.5;
    return core.mid + t * (core.seller - core.mid);
}

inline Vector interpolate_ce(const Matrix& values, double gamma)
{
    require(gamma >= 0.0 && gamma <= 1.0, "interpolate_ce: gamma must lie in [0, 1]");
    return interpolate_ce(core_prices(values), gamma);
}

/// p_j = (1/n) sum_i v_ij.
inline Vector heuristic_average_prices(const Matrix& values)
{
    if (values.rows() == 0) return Vector::Zero(values.cols());
    return values.colwise().mean().transpose();
}

struct PriceScheme {
    enum class Kind { ce_mid, ce_interpolated, ce_noisy_values, ce_noisy_prices, heuristic_avg_value, interpolate_to_heuristic };

    Kind kind = Kind::ce_mid;
    double gamma = 0.5;        // ce_interpolated
    double noise = 0.0;        // ce_noisy_values / ce_noisy_prices
    double weight = 0.0;       // interpolate_to_heuristic
    std::uint64_t seed = 0;    // noise stream

    static PriceScheme mid() { return {}; }
    static PriceScheme interpolated(double g) { PriceScheme s; s.kind = Kind::ce_interpolated; s.gamma = g; return s; }
    static PriceScheme noisy_values(double eps, std::uint64_t seed) { PriceScheme s; s.kind = Kind::ce_noisy_values; s.noise = eps; s.seed = seed; return s; }
    static PriceScheme noisy_prices(double eps, std::uint64_t seed) { PriceScheme s; s.kind = Kind::ce_noisy_prices; s.noise = eps; s.seed = seed; return s; }
    static PriceScheme heuristic() { PriceScheme s; s.kind = Kind::heuristic_avg_value; return s; }
    static PriceScheme toward_heuristic(double w) { PriceScheme s; s.kind = Kind::interpolate_to_heuristic; s.weight = w; return s; }

    void validate() const
    {
        require(gamma >= 0.0 && gamma <= 1.0, "price scheme: gamma must lie in [0, 1]");
        require(noise >= 0.0, "price scheme: noise magnitude must be non-negative");
        require(weight >= 0.0 && weight <= 1.0, "price scheme: weight must lie in [0, 1]");
    }
};

inline std::string to_string(PriceScheme::Kind kind)
{
    switch (kind) {
    case PriceScheme::Kind::ce_mid: return "ce_mid";
    case PriceScheme::Kind::ce_interpolated: return "ce_interpolated";
    case PriceScheme::Kind::ce_noisy_values: return "ce_noisy_values";
    case PriceScheme::Kind::ce_noisy_prices: return "ce_noisy_prices";
    case PriceScheme::Kind::heuristic_avg_value: return "heuristic_avg_value";
    case PriceScheme::Kind::interpolate_to_heuristic: return "interpolate_to_heuristic";
    }
    return "unknown";
}

inline PriceScheme::Kind price_scheme_kind(const std::string& name)
{
    using K = PriceScheme::Kind;
    for (K k : {K::ce_mid, K::ce_interpolated, K::ce_noisy_values, K::ce_noisy_prices, K::heuristic_avg_value,
                K::interpolate_to_heuristic}) {
        if (to_string(k) == name) return k;
    }
    throw Error("unknown price scheme '" + name + "'");
}

/// Prices for a value matrix under the given scheme; outputs are clipped at 0.
inline Vector apply_scheme(const Matrix& values, const PriceScheme& scheme)
{
    scheme.validate();
    using K = PriceScheme::Kind;
    Vector prices;
    switch (scheme.kind) {
    case K::ce_mid:
        prices = mid_prices(values);
        break;
    case K::ce_interpolated:
        prices = interpolate_ce(values, scheme.gamma);
        break;
    case K::ce_noisy_values: {
        Matrix noisy = values;
        if (scheme.noise > 0.0) {
            Rng rng(scheme.seed);
            for (Eigen::Index i = 0; i < noisy.rows(); ++i)
                for (Eigen::Index j = 0; j < noisy.cols(); ++j) noisy(i, j) += rng.uniform(0.0, scheme.noise);
        }
        prices = mid_prices(noisy);
        break;
    }
    case K::ce_noisy_prices: {
        prices = mid_prices(values);
        if (scheme.noise > 0.0) {
            Rng rng(scheme.seed);
            for (Eigen::Index j = 0; j < prices.size(); ++j) prices(j) += rng.uniform(0.0, scheme.noise);
        }
        break;
    }
    case K::heuristic_avg_value:
        prices = heuristic_average_prices(values);
        break;
    case K::interpolate_to_heuristic:
        prices = (1.0 - scheme.weight) * mid_prices(values) + scheme.weight * heuristic_average_prices(values);
        break;
    }
    return prices.cwiseMax(0.0);
}

}  // namespace decongest
