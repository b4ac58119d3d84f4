#pragma once

// Central finite-difference oracle for the autodiff suite. Lives in test
// code only; the implementation path never sees it.

#include <cmath>
#include <functional>
#include <vector>

#include "sseg/tensor.hpp"

namespace ssegtest {

struct FdReport {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
};

// f() must rebuild the graph from the current parameter values and return
// the scalar loss node. Every element of every tensor in `inputs` is
// perturbed by +-step; the analytic gradient left on the tensors after one
// backward() call is compared against (f(x+h) - f(x-h)) / (2h).
inline FdReport fd_check(const std::function<sseg::TensorPtr<double>()>& f,
                         const std::vector<sseg::TensorPtr<double>>& inputs, double step = 1e-3) {
    for (const auto& t : inputs) {
        t->ensure_grad();
        t->zero_grad();
    }
    auto loss = f();
    sseg::backward(loss);

    FdReport report;
    for (const auto& t : inputs) {
        for (std::size_t i = 0; i < t->values.size(); ++i) {
            const double saved = t->values[i];
            t->values[i] = saved + step;
            const double up = f()->item();
            t->values[i] = saved - step;
            const double down = f()->item();
            t->values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = t->grad[i];
            const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            const double rel = std::abs(numeric - analytic) / denom;
            report.max_rel_err = std::max(report.max_rel_err, rel);
            ++report.checked;
        }
    }
    return report;
}

}  // namespace ssegtest
