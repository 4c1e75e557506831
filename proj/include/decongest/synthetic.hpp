#pragma once

#include "decongest/market.hpp"
#include "decongest/nnls.hpp"
#include "decongest/pricing.hpp"
#include "decongest/rng.hpp"

#include <cstdint>
#include <sstream>

namespace decongest {

/// Parameters of a mixture market: alpha blends heterogeneous (0) and
/// homogeneous (1) preferences; rho < 1 compresses values toward 1.
struct MixtureSpec {
    int n = 8;
    int m = 8;
    int d = 14;
    double alpha = 0.0;
    double rho = 1.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(n > 0 && m > 0 && d > 0, "mixture: dimensions must be positive");
        require(alpha >= 0.0 && alpha <= 1.0, "mixture: alpha must lie in [0, 1]");
        require(rho > 0.0 && rho <= 1.0, "mixture: rho must lie in (0, 1]");
    }
};

/// Base preference vector (m, m-1, ..., 1) / m.
inline Vector descending_preference(int m)
{
    Vector base(m);
    for (int j = 0; j < m; ++j) base(j) = static_cast<double>(m - j) / m;
    return base;
}

/// Circulant target: user i ranks item i first, then i+1, ... (mod m).
inline Matrix heterogeneous_values(int n, int m)
{
    const Vector base = descending_preference(m);
    Matrix v(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) v(i, j) = base(((j - i) % m + m) % m);
    return v;
}

/// Every user shares the same ranking of items.
inline Matrix homogeneous_values(int n, int m)
{
    const Vector base = descending_preference(m);
    Matrix v(n, m);
    for (int i = 0; i < n; ++i) v.row(i) = base.transpose();
    return v;
}

struct MixtureComponents {
    Matrix item_features;     // X = X1 + X2
    Matrix het_preferences;   // B_het
    Matrix hom_preferences;   // B_hom
    NnlsResult het_fit;
    NnlsResult hom_fit;
};

inline MixtureComponents mixture_components(const MixtureSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    Matrix x1(spec.m, spec.d), x2(spec.m, spec.d);
    for (Eigen::Index k = 0; k < x1.size(); ++k) x1(k) = rng.uniform();
    for (Eigen::Index k = 0; k < x2.size(); ++k) x2(k) = rng.uniform();

    MixtureComponents c;
    c.item_features = x1 + x2;
    c.het_fit = nnls(c.item_features, heterogeneous_values(spec.n, spec.m));
    c.hom_fit = nnls(c.item_features, homogeneous_values(spec.n, spec.m));
    for (const NnlsResult* fit : {&c.het_fit, &c.hom_fit}) {
        if (!fit->converged) {
            std::ostringstream os;
            os << "mixture: NNLS did not converge after " << fit->iterations << " iterations (residual "
               << fit->residual << ", projected gradient " << fit->projected_gradient << ")";
            throw Error(os.str());
        }
    }
    c.het_preferences = c.het_fit.solution;
    c.hom_preferences = c.hom_fit.solution;
    return c;
}

/// Sets v <- v^rho (rho = 1 leaves the market unchanged). Prices are kept.
inline Market apply_dispersion(Market market, double rho)
{
    require(rho > 0.0 && rho <= 1.0, "dispersion: rho must lie in (0, 1]");
    market.dispersion *= rho;
    return market;
}

/// Mixture market with B_alpha = (1-alpha) B_het + alpha B_hom, values
/// rescaled into [0, 1] when needed and prices from the pricer.
inline Market make_mixture_market(const MixtureSpec& spec, const Pricer& pricer = mid_pricer())
{
    const MixtureComponents c = mixture_components(spec);
    Market market;
    market.item_features = c.item_features;
    Matrix b = (1.0 - spec.alpha) * c.het_preferences + spec.alpha * c.hom_preferences;
    const double vmax = (b * market.item_features.transpose()).maxCoeff();
    if (vmax > 1.0) b /= vmax;
    market.preferences = b;
    market.user_features = b;
    market = apply_dispersion(std::move(market), spec.rho);
    market.prices = pricer(true_values(market));
    return market;
}

}  // namespace decongest
