#pragma once

#include "decongest/market.hpp"
#include "decongest/types.hpp"

#include <cmath>
#include <vector>

namespace decongest {

struct Summary {
    double mean = 0.0;
    double std = 0.0;       // sample standard deviation
    double se = 0.0;        // standard error of the mean
    double ci95 = 0.0;      // 1.96 * se
    std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& xs)
{
    Summary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        s.se = s.std / std::sqrt(static_cast<double>(xs.size()));
    }
    s.ci95 = 1.96 * s.se;
    return s;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    require(a.size() == b.size() && a.size() >= 2, "pearson: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    return pearson(average_ranks(a), average_ranks(b));
}

}  // namespace decongest
