#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sseg/tensor.hpp"

namespace sseg {

// AdaDelta with a decaying global multiplier:
//   E[g2]  <- rho E[g2]  + (1-rho) g^2
//   dx      = -(RMS(E[dx2]) / RMS(E[g2])) * g        RMS(v) = sqrt(v + eps)
//   E[dx2] <- rho E[dx2] + (1-rho) dx^2
//   param  += lr_multiplier * dx
// lr_multiplier scales by decay_factor after every decay_interval steps.
template <typename T>
struct AdaDeltaState {
    T rho = T(0.95);
    T epsilon = T(1e-6);
    T lr_multiplier = T(0.1);
    T decay_factor = T(0.1);
    std::int64_t decay_interval = 2000;
    std::int64_t step_count = 0;

    std::vector<std::vector<T>> avg_sq_grad;    // E[g^2]
    std::vector<std::vector<T>> avg_sq_update;  // E[dx^2]

    void attach(const std::vector<TensorPtr<T>>& params) {
        avg_sq_grad.clear();
        avg_sq_update.clear();
        for (const auto& p : params) {
            avg_sq_grad.emplace_back(p->values.size(), T(0));
            avg_sq_update.emplace_back(p->values.size(), T(0));
        }
    }

    // Consumes the accumulated grads on the params; caller zeroes them.
    void step(const std::vector<TensorPtr<T>>& params) {
        if (params.size() != avg_sq_grad.size()) {
            throw std::runtime_error("adadelta: not attached to this parameter set");
        }
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = *params[pi];
            if (p.grad.empty()) continue;
            auto& eg2 = avg_sq_grad[pi];
            auto& edx2 = avg_sq_update[pi];
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                const T g = p.grad[i];
                eg2[i] = rho * eg2[i] + (T(1) - rho) * g * g;
                const T dx = -std::sqrt(edx2[i] + epsilon) / std::sqrt(eg2[i] + epsilon) * g;
                edx2[i] = rho * edx2[i] + (T(1) - rho) * dx * dx;
                p.values[i] += lr_multiplier * dx;
            }
        }
        ++step_count;
        if (decay_interval > 0 && step_count % decay_interval == 0) {
            lr_multiplier *= decay_factor;
        }
    }
};

}  // namespace sseg
