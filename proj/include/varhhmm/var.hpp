#pragma once

#include <span>
#include <vector>

#include "varhhmm/errors.hpp"
#include "varhhmm/types.hpp"

namespace varhhmm {

/// One linear dynamics regime: y_t = mu + sum_p A_p y_{t-p} + noise, noise ~ N(0, sigma).
struct VarModel {
    Vec mu;
    std::vector<Mat> lag_mats;  // A_1 .. A_tau
    Mat sigma;

    int dim() const { return static_cast<int>(mu.size()); }
    int lag_order() const { return static_cast<int>(lag_mats.size()); }
};

/// mu + sum_p A_p * history[p-1]; history is ordered most-recent-first.
inline Vec var_predict(const VarModel& model, std::span<const Vec> history) {
    const int tau = model.lag_order();
    if (static_cast<int>(history.size()) < tau)
        throw InsufficientHistoryError("var_predict: need " + std::to_string(tau) +
                                       " lagged observations, got " + std::to_string(history.size()));
    Vec pred = model.mu;
    for (int p = 0; p < tau; ++p) pred.noalias() += model.lag_mats[static_cast<size_t>(p)] * history[static_cast<size_t>(p)];
    return pred;
}

}  // namespace varhhmm
