#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimdm/tensor.hpp"

namespace testutil {

// Central finite-difference gradient oracle. Rebuilds the loss from scratch
// for every probe, so it stays independent of the tape's backward pass.
//
// loss_fn(store)      -> scalar loss from the store's current values
// compute_grads(store) -> populate store gradients via the implementation
//
// Returns the max relative error over every parameter scalar, with
// rel = |a - f| / max(1e-6, |a|, |f|).
inline double fd_max_rel_err(mimdm::ParamStore& store,
                             const std::function<double(mimdm::ParamStore&)>& loss_fn,
                             const std::function<void(mimdm::ParamStore&)>& compute_grads,
                             double h = 1e-4) {
    store.zero_grad();
    compute_grads(store);

    std::unordered_map<std::string, std::vector<double>> analytic;
    for (const auto& name : store.names()) analytic[name] = store[name].grad;

    double worst = 0.0;
    for (const auto& name : store.names()) {
        auto& t = store[name];
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double v = t.values[i];
            t.values[i] = v + h;
            const double fp = loss_fn(store);
            t.values[i] = v - h;
            const double fm = loss_fn(store);
            t.values[i] = v;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[name][i];
            const double rel =
                std::fabs(a - fd) / std::max({1e-6, std::fabs(a), std::fabs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace testutil
