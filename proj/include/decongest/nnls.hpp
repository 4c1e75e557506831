#pragma once

#include "decongest/types.hpp"

#include <algorithm>
#include <cmath>

namespace decongest {

struct NnlsOptions {
    double gradient_tolerance = 1e-8;  // relative to the projected gradient at B = 0
    int max_iterations = 5000;
    double armijo = 1e-4;
};

struct NnlsResult {
    Matrix solution;
    double residual = 0.0;  // ||B X^T - V||_F at the solution
    double residual_at_zero = 0.0;
    double projected_gradient = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// min_{B >= 0} ||B X^T - V||_F by projected gradient with Barzilai-Borwein
/// trial steps and Armijo backtracking.
inline NnlsResult nnls(const Matrix& x, const Matrix& v, const NnlsOptions& opt = {})
{
    require(x.rows() == v.cols(), "nnls: X must have one row per column of V");
    const Matrix gram = x.transpose() * x;  // d x d
    const Matrix vx = v * x;                // n x d
    auto objective = [&](const Matrix& b) { return 0.5 * (b * x.transpose() - v).squaredNorm(); };
    auto gradient = [&](const Matrix& b) -> Matrix { return b * gram - vx; };
    auto projected_norm = [](const Matrix& b, const Matrix& g) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < b.size(); ++k) {
            const double pg = b(k) > 0.0 ? g(k) : std::min(0.0, g(k));
            s += pg * pg;
        }
        return std::sqrt(s);
    };

    NnlsResult res;
    res.residual_at_zero = v.norm();
    Matrix b = Matrix::Zero(v.rows(), x.cols());
    Matrix g = gradient(b);
    double f = objective(b);
    const double lipschitz = std::max(gram.norm(), 1e-12);
    const double tol = opt.gradient_tolerance * std::max(1.0, projected_norm(b, g));
    double step = 1.0 / lipschitz;

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        res.projected_gradient = projected_norm(b, g);
        if (res.projected_gradient <= tol) {
            res.converged = true;
            break;
        }
        double t = step;
        Matrix candidate;
        double fc = 0.0;
        for (int back = 0; back < 60; ++back) {
            candidate = (b - t * g).cwiseMax(0.0);
            fc = objective(candidate);
            if (fc <= f + opt.armijo * g.cwiseProduct(candidate - b).sum()) break;
            t *= 0.5;
        }
        const Matrix s = candidate - b;
        const Matrix gc = gradient(candidate);
        const Matrix y = gc - g;
        const double sy = s.cwiseProduct(y).sum();
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : 1.0 / lipschitz;
        b = candidate;
        g = gc;
        f = fc;
    }
    if (!res.converged) {
        res.projected_gradient = projected_norm(b, g);
        res.converged = res.projected_gradient <= tol;
    }
    res.solution = std::move(b);
    res.residual = (res.solution * x.transpose() - v).norm();
    return res;
}

}  // namespace decongest
