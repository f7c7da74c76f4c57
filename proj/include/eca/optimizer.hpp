#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

#include "eca/errors.hpp"
#include "eca/linalg.hpp"

namespace eca {

/// Adam with bias correction. State is a plain value; stepping mutates the
/// state and the parameter span it is given.
struct AdamState {
    Vector m;  // first-moment estimate
    Vector v;  // second-moment estimate
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState adam_init(std::size_t dim, double lr,
                           std::pair<double, double> betas = {0.9, 0.999},
                           double eps = 1e-8) {
    if (dim < 1) throw ConfigError("adam: dim must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("adam: lr must be > 0");
    if (!(betas.first >= 0.0 && betas.first < 1.0))
        throw ConfigError("adam: beta1 must be in [0, 1)");
    if (!(betas.second >= 0.0 && betas.second < 1.0))
        throw ConfigError("adam: beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
    AdamState s;
    s.m.assign(dim, 0.0);
    s.v.assign(dim, 0.0);
    s.lr = lr;
    s.beta1 = betas.first;
    s.beta2 = betas.second;
    s.eps = eps;
    return s;
}

/// params <- params - lr * m_hat / (sqrt(v_hat) + eps)
inline void adam_step(AdamState& s, std::span<double> params,
                      std::span<const double> grad) {
    if (params.size() != s.m.size() || grad.size() != s.m.size())
        throw DimensionError("adam_step: dims disagree with state");
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericsError("adam_step: non-finite gradient");

    s.step_count += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = s.m[i] / bc1;
        const double v_hat = s.v[i] / bc2;
        params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
}

}  // namespace eca
