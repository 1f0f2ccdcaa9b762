#pragma once

#include <span>
#include <vector>

#include "varhhmm/var.hpp"

namespace varhhmm {

/// One movement class: K piecewise-linear segments with a segment Markov chain.
/// seg_trans(j, i) = p(S_t = i | S_{t-1} = j) within the movement (row-stochastic),
/// seg_prior(i) = entry probability of segment i when the movement is entered.
struct MovementModel {
    std::vector<VarModel> segments;
    Mat seg_trans;
    Vec seg_prior;

    int n_segments() const { return static_cast<int>(segments.size()); }
};

/// Full two-layer model: a movement chain whose states carry their own segment
/// chains with VAR emissions. mov_trans(n, m) = p(M_t = m | M_{t-1} = n).
struct HhmmSpec {
    std::vector<MovementModel> movements;
    Mat mov_trans;
    Vec mov_prior;
    int tau = 1;
    int d = 6;
    double rho = 0.999;

    int n_movements() const { return static_cast<int>(movements.size()); }
    int n_segments() const { return movements.empty() ? 0 : movements.front().n_segments(); }

    /// Throws ParameterError on any structural violation (non-stochastic rows,
    /// asymmetric or non-PD covariances, mismatched tau/d across movements).
    void validate() const;
};

/// Sticky movement chain where every movement is entered from and leaves to
/// the rest state (index 0):
///   row 0:   rho on the diagonal, (1-rho)/(n-1) to each movement,
///   row i>0: rho on the diagonal, 1-rho back to rest, 0 elsewhere.
Mat build_movement_transition(double rho, int n);

/// Entry (m, i) = log N(y; mu^(i,m) + sum_p A_p^(i,m) h_p, sigma^(i,m)).
/// history is the tau most recent observations, most-recent-first.
Mat obs_log_likelihood(const HhmmSpec& spec, std::span<const Vec> history, const Vec& y);

}  // namespace varhhmm
