#ifndef VARHHMM_BASELINES_HPP
#define VARHHMM_BASELINES_HPP

#include <span>
#include <vector>

#include "varhhmm/frame.hpp"
#include "varhhmm/types.hpp"

namespace varhhmm {

struct EcConfig {
    double upper_frac = 0.30;    // fraction of the per-axis maximum
    double lower_divisor = 20.0; // lower threshold = upper / lower_divisor
};

/// One per-axis detection: the sample that first exceeded the upper
/// threshold plus the interval found by extending to the lower threshold.
struct AxisDetection {
    int axis = 0;  // 0..2 over gyroscope axes
    long onset = 0;
    long crossing = 0;
    long end = 0;
};

/// Two-threshold scan of one rectified gyroscope axis. Thresholds come from
/// the axis maximum over the whole recording, so the result is invariant to
/// positive rescaling of the signal.
std::vector<AxisDetection> ec_axis_detections(std::span<const ObservationFrame> frames, int axis,
                                              const EcConfig& config = {});

/// Amplitude-threshold event detector: per-axis detections merged by interval
/// union. Events carry label 0 because this detector does not classify.
std::vector<MovementEvent> ec_segment(std::span<const ObservationFrame> frames,
                                      const EcConfig& config = {});

/// Per-sample labels implied by EC events: event samples get the given label,
/// everything else the rest label 1.
LabelSequence ec_labels(std::span<const ObservationFrame> frames,
                        std::span<const MovementEvent> events, int event_label = 2);

struct KnnConfig {
    int k = 29;
    int window = 1;  // frames per feature vector, most recent first
};

/// Stored training set with per-dimension standardization statistics.
struct KnnModel {
    Mat features;  // n x (d * window), already standardized
    std::vector<int> labels;
    Vec mean;
    Vec stddev;
    KnnConfig config;
};

KnnModel knn_train(std::span<const ObservationFrame> frames, std::span<const int> labels,
                   const KnnConfig& config = {});

/// Inverse-distance-weighted vote over the k nearest training points.
/// Neighbour selection orders by (distance, label) and class-score ties break
/// to the lowest label, so the result does not depend on training-set order.
int knn_classify_window(const KnnModel& model, std::span<const ObservationFrame> recent);

/// Labels every sample of a recording; for the first window-1 samples the
/// missing history is padded by repeating the first frame.
LabelSequence knn_classify_sequence(const KnnModel& model,
                                    std::span<const ObservationFrame> frames);

}  // namespace varhhmm

#endif
