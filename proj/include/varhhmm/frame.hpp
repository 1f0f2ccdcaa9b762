#pragma once

#include <cmath>
#include <cstdint>

#include "varhhmm/errors.hpp"
#include "varhhmm/types.hpp"

namespace varhhmm {

inline constexpr double kAccRangeG = 2.0;      // accelerometer full scale, [-2, 2] g
inline constexpr double kGyrRangeDps = 500.0;  // gyroscope full scale, [-500, 500] deg/s
inline constexpr double kSampleRateHz = 100.0;
inline constexpr double kMsPerSample = 1000.0 / kSampleRateHz;

/// One IMU sample: 3-axis accelerometer (g) and 3-axis gyroscope (deg/s).
struct ObservationFrame {
    std::int64_t t = 0;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    Eigen::Vector3d gyr = Eigen::Vector3d::Zero();

    /// Concatenated 6-D observation vector, accelerometer first.
    Vec vec() const {
        Vec y(6);
        y << acc(0), acc(1), acc(2), gyr(0), gyr(1), gyr(2);
        return y;
    }
};

/// Clamps the frame to the sensor ranges in place. Returns true if any
/// component was out of range (a data warning, not an error).
inline bool clamp_to_sensor_range(ObservationFrame& f) {
    bool clipped = false;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(f.acc(i)) > kAccRangeG) {
            f.acc(i) = f.acc(i) > 0 ? kAccRangeG : -kAccRangeG;
            clipped = true;
        }
        if (std::abs(f.gyr(i)) > kGyrRangeDps) {
            f.gyr(i) = f.gyr(i) > 0 ? kGyrRangeDps : -kGyrRangeDps;
            clipped = true;
        }
    }
    return clipped;
}

inline void require_finite(const ObservationFrame& f) {
    if (!f.acc.allFinite() || !f.gyr.allFinite())
        throw InvalidFrameError("observation at t=" + std::to_string(f.t) + " has non-finite components");
}

/// One detected or ground-truth movement occurrence. onset/end are inclusive
/// row positions into the owning frame list; label 0 means not yet assigned.
struct MovementEvent {
    long onset = 0;
    long end = 0;
    int movement_label = 0;
};

/// Per-sample movement labels (1-based) with the classifier that produced them.
struct LabelSequence {
    enum class Provenance { Generator, Ec, Knn, VarHhmm };

    std::vector<int> labels;
    Provenance provenance = Provenance::Generator;

    std::size_t size() const { return labels.size(); }
};

}  // namespace varhhmm
