#pragma once

#include "decongest/types.hpp"

#include <cmath>

namespace decongest {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. step() descends; pass -grad to ascend.
class Adam {
public:
    Adam(Eigen::Index rows, Eigen::Index cols, AdamConfig config = {})
        : config_(config), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols))
    {
    }

    void step(Matrix& params, const Matrix& grad)
    {
        ++t_;
        m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
        v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        params.array() -= config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
    }

    long steps() const { return t_; }

private:
    AdamConfig config_;
    Matrix m_;
    Matrix v_;
    long t_ = 0;
};

}  // namespace decongest
