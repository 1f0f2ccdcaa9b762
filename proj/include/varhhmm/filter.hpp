#pragma once

#include <vector>

#include "varhhmm/frame.hpp"
#include "varhhmm/model.hpp"

namespace varhhmm {

/// Per-step classifier output.
struct StepOutput {
    int label = 1;                   // 1-based movement index, argmax of the posterior
    Vec movement_posterior;          // p(M_t = m | y_{t:0}), sums to 1
    double log_evidence_increment = 0.0;  // log p(y_t | y_{t-1:0}); 0 during warm-up
};

/// Running joint posterior over (movement, segment) plus the lag buffer.
/// Single-owner mutable; independent states may share one immutable HhmmSpec.
class FilterState {
public:
    /// Joint posterior at t=0: p(M,S) = mov_prior(m) * seg_prior(i|m).
    /// Zero-probability states stay at -inf in log space.
    static FilterState init(const HhmmSpec& spec);

    /// One Bayes update: propagate through the transition model, weight by the
    /// observation likelihood, renormalize. The first tau frames are buffered
    /// as regressors only; during that warm-up the posterior stays at the
    /// prior and the label is the prior argmax. Throws InvalidFrameError on
    /// non-finite input, leaving the state unchanged.
    StepOutput step(const HhmmSpec& spec, const ObservationFrame& frame);

    /// log p(S_t, M_t | y_{t-1:0}): previous posterior pushed through the
    /// movement chain and the two-case segment transition (the within-movement
    /// matrix on a self-transition, the entry prior on a movement change).
    Mat predict_log_prior(const HhmmSpec& spec) const;

    const Mat& log_posterior() const { return log_post_; }
    Vec movement_posterior() const;
    std::int64_t t() const { return t_; }
    int frames_buffered() const { return static_cast<int>(history_.size()); }

private:
    Mat log_post_;                // N x K
    std::vector<Vec> history_;    // most-recent-first, at most tau entries
    std::int64_t t_ = 0;
};

/// Runs the filter over a whole recording. One label per frame; the first tau
/// frames carry the movement-prior argmax. Also reports the total log-evidence
/// sum_t log p(y_t | y_{t-1:0}) over the scored frames.
struct SequenceResult {
    LabelSequence labels;
    std::vector<Vec> posteriors;  // per frame, length N each
    double total_log_evidence = 0.0;
};

SequenceResult classify_sequence(const HhmmSpec& spec, const std::vector<ObservationFrame>& frames);

}  // namespace varhhmm
