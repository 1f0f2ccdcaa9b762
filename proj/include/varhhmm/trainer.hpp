#ifndef VARHHMM_TRAINER_HPP
#define VARHHMM_TRAINER_HPP

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "varhhmm/dataset.hpp"
#include "varhhmm/model.hpp"

namespace varhhmm {

/// One observed run of a single movement, as 6-vectors in time order.
using Sequence = std::vector<Vec>;

struct TrainConfig {
    int n_restarts = 50;
    int max_iters = 200;
    double ftol = 1e-10;
    int k_segments = 5;
    std::vector<int> tau_candidates = {1};
    std::uint64_t seed = 0;
    double rho = 0.999;
    int n_threads = 1;
};

struct TrainReport {
    double best_objective = 0.0;
    int best_restart = -1;
    std::vector<double> per_restart_objectives;
    std::vector<int> iterations_used;
    std::vector<std::vector<double>> objective_traces;
};

/// Best segment path per sequence under the current movement model, via the
/// max-product recursion. Paths are 0-based and aligned with the regression
/// targets, so each has length sequence_length - tau.
std::vector<std::vector<int>> viterbi_segment(std::span<const Sequence> data,
                                              const MovementModel& model, int tau);

/// Closed-form parameter update given fixed segment paths: per-segment least
/// squares for (mu, A, sigma) and pseudo-count-smoothed transition/initial
/// estimates. Segments with no samples are redrawn from the standard-normal
/// initializer; segments with fewer samples than d*(tau+1)+1 keep their
/// previous parameters, since a populated segment contributes emission terms
/// and redrawing it could lower the objective.
MovementModel m_step(std::span<const Sequence> data,
                     const std::vector<std::vector<int>>& paths, int k_segments, int tau,
                     std::mt19937_64& rng, const MovementModel* previous = nullptr);

/// Smoothed complete-data objective: emission log likelihood along the paths
/// plus (count + 1/K)-weighted log transition and initial terms. This is the
/// quantity each m_step maximizes exactly, so it is monotone over iterations.
double training_objective(std::span<const Sequence> data,
                          const std::vector<std::vector<int>>& paths,
                          const MovementModel& model, int tau);

/// Segmental EM for one movement: alternate viterbi_segment and m_step from
/// n_restarts random starts, stop when the path is unchanged or the objective
/// moves by less than ftol, keep the restart with the best final objective
/// (ties to the lowest restart index). Deterministic for a fixed config
/// regardless of n_threads.
std::pair<MovementModel, TrainReport> viterbi_em(std::span<const Sequence> data,
                                                 const TrainConfig& config, int tau);

/// BIC = objective - 0.5 * n_params * log(n_targets) with
/// n_params = K (d + tau d^2 + d(d+1)/2) + K^2 + K.
double bic_score(double objective, int k_segments, int d, int tau, long n_targets);

struct LagSelection {
    int tau = 1;
    std::map<int, double> bic_by_tau;
    MovementModel model;  // refit at the chosen lag
    TrainReport report;
};

/// Fits each candidate lag order and keeps the one with the highest BIC
/// (ties to the smaller lag).
LagSelection select_lag_bic(std::span<const Sequence> data, const TrainConfig& config);

struct FullTrainResult {
    HhmmSpec spec;
    int chosen_tau = 1;
    std::map<int, double> bic_totals;             // summed over movements
    std::vector<TrainReport> reports;             // one per movement, chosen lag
    long skipped_runs = 0;                        // runs too short for regression
};

/// Trains every movement from a labeled recording: contiguous same-label runs
/// become that movement's sequences, a shared lag order is chosen by summing
/// per-movement BIC over tau_candidates, and the movement layer is assembled
/// with the sticky rest-hub transition matrix and a rest-certain prior.
FullTrainResult train_full_spec(const Dataset& dataset, const TrainConfig& config);

/// Splits one labeled recording into per-movement lists of contiguous runs.
/// Runs shorter than min_len are dropped and counted in skipped.
std::vector<std::vector<Sequence>> runs_by_movement(const Dataset& dataset, int n_movements,
                                                    long min_len, long* skipped = nullptr);

}  // namespace varhhmm

#endif
