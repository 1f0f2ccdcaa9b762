#include "varhhmm/filter.hpp"

#include <string>
#include <vector>

#include "varhhmm/gaussian.hpp"

namespace varhhmm {

namespace {

int argmax_lowest(const Vec& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

}  // namespace

FilterState FilterState::init(const HhmmSpec& spec) {
    spec.validate();
    if (spec.d != 6)
        throw ConfigError("filter requires 6-D observation models to match the IMU frame layout; got d=" +
                          std::to_string(spec.d));
    const int n = spec.n_movements();
    const int k = spec.n_segments();
    FilterState state;
    state.log_post_.resize(n, k);
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < k; ++i)
            state.log_post_(m, i) =
                safe_log(spec.mov_prior(m)) + safe_log(spec.movements[static_cast<size_t>(m)].seg_prior(i));
    return state;
}

Mat FilterState::predict_log_prior(const HhmmSpec& spec) const {
    const int n = spec.n_movements();
    const int k = spec.n_segments();

    Vec log_mov_marg(n);
    for (int m = 0; m < n; ++m) log_mov_marg(m) = log_sum_exp(log_post_.row(m));

    Mat log_prior(n, k);
    Vec terms(n - 1 > 0 ? n - 1 : 1);
    for (int m = 0; m < n; ++m) {
        const MovementModel& mov = spec.movements[static_cast<size_t>(m)];

        // Self-transition: previous segment chain pushed through T^(m).
        const double log_stay = safe_log(spec.mov_trans(m, m));
        Vec same(k);
        Vec col(k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) col(j) = log_post_(m, j) + safe_log(mov.seg_trans(j, i));
            same(i) = log_sum_exp(col);
        }

        // Movement change: mass from every other movement enters via seg_prior.
        double cross = kNegInf;
        if (n > 1) {
            int idx = 0;
            for (int mp = 0; mp < n; ++mp) {
                if (mp == m) continue;
                terms(idx++) = log_mov_marg(mp) + safe_log(spec.mov_trans(mp, m));
            }
            cross = log_sum_exp(terms.head(idx));
        }

        for (int i = 0; i < k; ++i)
            log_prior(m, i) = log_sum_exp(log_stay + same(i), cross + safe_log(mov.seg_prior(i)));
    }
    return log_prior;
}

Vec FilterState::movement_posterior() const {
    const int n = static_cast<int>(log_post_.rows());
    Vec pm(n);
    for (int m = 0; m < n; ++m) {
        const double lm = log_sum_exp(log_post_.row(m));
        pm(m) = lm == kNegInf ? 0.0 : std::exp(lm);
    }
    const double total = pm.sum();
    if (total > 0.0) pm /= total;
    return pm;
}

StepOutput FilterState::step(const HhmmSpec& spec, const ObservationFrame& frame) {
    require_finite(frame);
    const int tau = spec.tau;

    StepOutput out;
    if (static_cast<int>(history_.size()) < tau) {
        // Warm-up: buffer the frame as a regressor, keep the prior posterior.
        history_.insert(history_.begin(), frame.vec());
        ++t_;
        out.movement_posterior = movement_posterior();
        out.label = argmax_lowest(out.movement_posterior) + 1;
        out.log_evidence_increment = 0.0;
        return out;
    }

    const Mat log_prior = predict_log_prior(spec);
    const Mat log_lik = obs_log_likelihood(spec, history_, frame.vec());
    Mat unnorm = log_lik + log_prior;
    const double log_z = log_sum_exp(unnorm);
    if (log_z == kNegInf)
        throw ParameterError("filter: zero evidence at t=" + std::to_string(frame.t) +
                             " (all joint states impossible)");
    log_post_ = unnorm.array() - log_z;

    history_.insert(history_.begin(), frame.vec());
    history_.resize(static_cast<size_t>(tau));
    ++t_;

    out.movement_posterior = movement_posterior();
    out.label = argmax_lowest(out.movement_posterior) + 1;
    out.log_evidence_increment = log_z;
    return out;
}

SequenceResult classify_sequence(const HhmmSpec& spec, const std::vector<ObservationFrame>& frames) {
    if (frames.empty()) throw ParameterError("classify_sequence: no frames");
    FilterState state = FilterState::init(spec);
    SequenceResult result;
    result.labels.provenance = LabelSequence::Provenance::VarHhmm;
    result.labels.labels.reserve(frames.size());
    result.posteriors.reserve(frames.size());
    for (size_t idx = 0; idx < frames.size(); ++idx) {
        StepOutput out;
        try {
            out = state.step(spec, frames[idx]);
        } catch (const InvalidFrameError& e) {
            throw InvalidFrameError("classify_sequence: frame " + std::to_string(idx) + ": " + e.what());
        }
        result.labels.labels.push_back(out.label);
        result.posteriors.push_back(std::move(out.movement_posterior));
        result.total_log_evidence += out.log_evidence_increment;
    }
    return result;
}

}  // namespace varhhmm
