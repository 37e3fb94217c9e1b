#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "uamil/errors.hpp"

namespace uamil {

/// Adaptive moment estimation with bias correction. One instance per
/// parameter block; blocks updated in lockstep share the step counter
/// semantics of a single flat update.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
        : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {
        if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
            throw ConfigError("adam: decay rates must lie in [0,1)");
    }

    void update(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw ShapeError("adam: parameter/gradient length mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i] * grads[i];
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }

    long step_count() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

} // namespace uamil
