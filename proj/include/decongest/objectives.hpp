#pragma once

#include "decongest/market.hpp"
#include "decongest/types.hpp"

#include <vector>

namespace decongest {

/// Expected welfare split into the unconstrained choice value (term I) and the
/// supply correction (term II).
struct WelfareDecomposition {
    double term_i = 0.0;
    double term_ii = 0.0;
    double total = 0.0;
};

inline WelfareDecomposition welfare_decomposition(const ChoiceProfile& choices, const Matrix& true_values)
{
    WelfareDecomposition out;
    std::vector<double> per_item(choices.num_items(), 0.0);
    for (std::size_t i = 0; i < choices.choices.size(); ++i) {
        const int c = choices.choices[i];
        if (c > 0) per_item[c - 1] += true_values(i, c - 1);
    }
    for (std::size_t j = 0; j < per_item.size(); ++j) {
        out.term_i += per_item[j];
        if (choices.demand[j] > 0) out.term_ii += (1.0 / choices.demand[j] - 1.0) * per_item[j];
    }
    out.total = out.term_i + out.term_ii;
    return out;
}

struct ProxyBreakdown {
    double selection = 0.0;          // sum_ij y_ij p_j
    double decongestion = 0.0;       // sum_j max(0, n_j - c_j)
    double no_choice_penalty = 0.0;  // #{i : y_i = 0}
    double lambda = 0.5;
    double combined = 0.0;           // (1-lambda) selection - lambda (decongestion + penalty)

    /// selection - decongestion: the value-free lower bound on expected welfare.
    double lower_bound() const { return selection - decongestion; }
};

inline ProxyBreakdown proxy_welfare(const ChoiceProfile& choices, const Vector& prices, double lambda,
                                    bool with_no_choice_penalty, const std::vector<int>& supply = {})
{
    require(lambda >= 0.0 && lambda <= 1.0, "proxy_welfare: lambda must lie in [0, 1]");
    require(prices.size() == choices.num_items(), "proxy_welfare: price vector length must equal item count");
    ProxyBreakdown out;
    out.lambda = lambda;
    for (int c : choices.choices) {
        if (c > 0) out.selection += prices(c - 1);
    }
    out.decongestion = congestion_count(choices, supply);
    out.no_choice_penalty = with_no_choice_penalty ? choices.no_choice_count() : 0.0;
    out.combined = (1.0 - lambda) * out.selection - lambda * (out.decongestion + out.no_choice_penalty);
    return out;
}

/// W_M - W~_M for the choices the mask induces. Non-negative under zero
/// imputation; mean imputation can make it negative.
inline double lower_bound_gap(const Market& market, const Mask& mask, Imputation mode = Imputation::zero)
{
    const ValueView view = perceived_values(market, mask, mode);
    const ChoiceProfile y = choose_from_values(view.perceived, market.prices);
    const double w = expected_welfare(y, view.true_values);
    return w - proxy_welfare(y, market.prices, 0.5, false).lower_bound();
}

/// Expected true welfare of the choices a mask induces in one market.
inline double mask_welfare(const Market& market, const Mask& mask, Imputation mode = Imputation::zero)
{
    const ValueView view = perceived_values(market, mask, mode);
    return expected_welfare(choose_from_values(view.perceived, market.prices), view.true_values);
}

inline double mean_mask_welfare(const std::vector<Market>& markets, const Mask& mask, Imputation mode = Imputation::zero)
{
    require(!markets.empty(), "mean_mask_welfare: no markets");
    double total = 0.0;
    for (const Market& mk : markets) total += mask_welfare(mk, mask, mode);
    return total / static_cast<double>(markets.size());
}

/// lambda = 1 - k / (2d).
inline double default_lambda(int k, int d)
{
    require(d > 0 && k >= 0 && k <= d, "default_lambda: need 0 <= k <= d, d > 0");
    return 1.0 - static_cast<double>(k) / (2.0 * d);
}

}  // namespace decongest
