#ifndef VARHHMM_EVAL_HPP
#define VARHHMM_EVAL_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "varhhmm/frame.hpp"
#include "varhhmm/types.hpp"

namespace varhhmm {

/// Paper-calibrated acceptable-latency window around the reference onset,
/// in milliseconds (negative = early).
inline constexpr double kAcceptWindowLowMs = -48.0;
inline constexpr double kAcceptWindowHighMs = 208.0;
inline constexpr int kAcceptWindowLowFrames = -3;
inline constexpr int kAcceptWindowHighFrames = 13;

/// How far before a reference onset the prediction may start and still be
/// matched to that event, in samples.
inline constexpr long kLagSearchBackSamples = 50;

struct ConfusionMatrix {
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;  // rows true, cols predicted
    long n_classes() const { return counts.rows(); }
    long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          int n_classes = 0);

struct PrecisionRecall {
    Vec precision;
    Vec recall;
    std::vector<bool> precision_defined;  // false when a column/row is empty
    std::vector<bool> recall_defined;
    double macro_precision = 0.0;  // over defined classes
    double macro_recall = 0.0;
    double accuracy = 0.0;
};

PrecisionRecall precision_recall(const ConfusionMatrix& cm);

/// Lag of one reference event against a per-sample label sequence. The
/// prediction matches if its label appears within
/// [onset - kLagSearchBackSamples, end]; the predicted end is the end of the
/// contiguous run of that label containing the match.
struct LagRecord {
    MovementEvent reference;
    bool matched = false;
    long predicted_onset = 0;
    long predicted_end = 0;
    long onset_lag = 0;  // samples, negative = early
    long end_lag = 0;
};

std::vector<LagRecord> event_lags(std::span<const MovementEvent> reference,
                                  std::span<const int> predicted);

/// Lengths of maximal runs where predicted != truth, in time order.
std::vector<long> misclassified_blocks(std::span<const int> truth, std::span<const int> predicted);

/// One perception-experiment response: did this subject notice the visual
/// delay at this lag (in display frames) on this repetition.
struct SmtscRow {
    int subject = 0;
    int lag = 0;        // display frames, in [-10, 40]
    int response = 0;   // 0 or 1
    int repetition = 0; // 1..3
};

struct SmtscResponseTable {
    std::vector<SmtscRow> rows;
};

SmtscResponseTable load_smtsc_csv(const std::string& path);
void save_smtsc_csv(const SmtscResponseTable& table, const std::string& path);

inline constexpr double kDisplayFramePeriodMs = 1000.0 / 60.0;

struct SmtscWindow {
    double mean_frames = 0.0;
    double stddev_frames = 0.0;
    long n_positive = 0;
    double frame_period_ms = kDisplayFramePeriodMs;
    double window_low_ms = 0.0;   // (mean - stddev) * frame period
    double window_high_ms = 0.0;  // (mean + stddev) * frame period
    std::vector<int> excluded_subjects;
};

/// Population window of unnoticed lags: drop subjects whose three repetitions
/// disagree on more than half of their lags, pool positive responses of the
/// rest, and report mean +/- stddev of the lag weighted by positive counts.
SmtscWindow smtsc_window(const SmtscResponseTable& table,
                         double frame_period_ms = kDisplayFramePeriodMs);

struct LatencyProfile {
    std::string name;
    double hardware_lag_ms = 0.0;
};

/// Measured end-to-end budgets: a desktop setup, an iOS display pipeline, and
/// a slow Android path.
std::vector<LatencyProfile> default_latency_profiles();

struct LatencyBudget {
    struct PerProfile {
        std::string name;
        double hardware_lag_ms = 0.0;
        double residual_allowance_ms = 0.0;  // window high minus hardware lag
        long delayed = 0;                    // events past the window, unmatched included
    };
    std::vector<PerProfile> per_profile;
    double window_high_ms = kAcceptWindowHighMs;
    double ms_per_sample = kMsPerSample;
    long n_events = 0;
    long n_unmatched = 0;
    /// delayed-event count if the hardware lag were exactly the threshold:
    /// (hardware lag ms, resulting delayed count), sampled at the breakpoints.
    std::vector<std::pair<double, long>> delayed_curve;
};

LatencyBudget latency_budget(std::span<const LagRecord> lags,
                             std::span<const LatencyProfile> profiles,
                             double window_high_ms = kAcceptWindowHighMs,
                             double ms_per_sample = kMsPerSample);

/// Two-sided F test for equal variances of two samples. Returns the p-value.
double variance_ratio_p_value(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta function I_x(a, b), used by the F test.
double regularized_incomplete_beta(double a, double b, double x);

std::string confusion_to_csv(const ConfusionMatrix& cm);
std::string metrics_to_json(const ConfusionMatrix& cm, const PrecisionRecall& pr);
std::string lags_to_csv(std::span<const LagRecord> lags);
std::string blocks_to_csv(std::span<const long> blocks);
std::string latency_budget_to_json(const LatencyBudget& budget);
std::string smtsc_window_to_json(const SmtscWindow& window);

/// Bins values into [k*bin_width, (k+1)*bin_width) buckets and emits a dense
/// bin,count table from the smallest to the largest occupied bin. Empty input
/// yields the header only.
std::string histogram_to_csv(std::span<const double> values, double bin_width);

/// threshold_ms,delayed table of the budget's cumulative delayed-count curve.
std::string delayed_curve_to_csv(const LatencyBudget& budget);

}  // namespace varhhmm

#endif
