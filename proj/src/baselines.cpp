#include "varhhmm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varhhmm/errors.hpp"

namespace varhhmm {

std::vector<AxisDetection> ec_axis_detections(std::span<const ObservationFrame> frames, int axis,
                                              const EcConfig& config) {
    if (axis < 0 || axis > 2) throw ParameterError("gyroscope axis must be 0, 1 or 2");
    if (!(config.upper_frac > 0.0 && config.upper_frac <= 1.0))
        throw ParameterError("upper_frac must lie in (0, 1]");
    if (config.lower_divisor < 1.0) throw ParameterError("lower_divisor must be >= 1");
    const long n = static_cast<long>(frames.size());
    std::vector<AxisDetection> out;
    if (n == 0) return out;

    std::vector<double> mag(static_cast<size_t>(n));
    for (long t = 0; t < n; ++t) mag[static_cast<size_t>(t)] = std::abs(frames[static_cast<size_t>(t)].gyr(axis));
    double peak = *std::max_element(mag.begin(), mag.end());
    double upper = config.upper_frac * peak;
    double lower = upper / config.lower_divisor;

    long t = 0;
    while (t < n) {
        if (mag[static_cast<size_t>(t)] > upper) {
            AxisDetection det;
            det.axis = axis;
            det.crossing = t;
            det.onset = 0;
            for (long b = t - 1; b >= 0; --b)
                if (mag[static_cast<size_t>(b)] < lower) {
                    det.onset = b;
                    break;
                }
            det.end = n - 1;
            for (long f = t + 1; f < n; ++f)
                if (mag[static_cast<size_t>(f)] < lower) {
                    det.end = f;
                    break;
                }
            out.push_back(det);
            t = det.end + 1;
        } else {
            ++t;
        }
    }
    return out;
}

std::vector<MovementEvent> ec_segment(std::span<const ObservationFrame> frames,
                                      const EcConfig& config) {
    std::vector<AxisDetection> all;
    for (int axis = 0; axis < 3; ++axis) {
        auto dets = ec_axis_detections(frames, axis, config);
        all.insert(all.end(), dets.begin(), dets.end());
    }
    std::sort(all.begin(), all.end(),
              [](const AxisDetection& a, const AxisDetection& b) { return a.onset < b.onset; });

    std::vector<MovementEvent> events;
    for (const auto& det : all) {
        if (!events.empty() && det.onset <= events.back().end) {
            events.back().end = std::max(events.back().end, det.end);
        } else {
            events.push_back({det.onset, det.end, 0});
        }
    }
    return events;
}

LabelSequence ec_labels(std::span<const ObservationFrame> frames,
                        std::span<const MovementEvent> events, int event_label) {
    LabelSequence seq;
    seq.provenance = LabelSequence::Provenance::Ec;
    seq.labels.assign(frames.size(), 1);
    for (const auto& ev : events)
        for (long t = std::max(0l, ev.onset); t <= ev.end && t < static_cast<long>(frames.size()); ++t)
            seq.labels[static_cast<size_t>(t)] = ev.movement_label > 0 ? ev.movement_label : event_label;
    return seq;
}

namespace {

Vec window_feature(std::span<const ObservationFrame> frames, long t, int window) {
    const int d = 6;
    Vec f(static_cast<long>(d) * window);
    for (int j = 0; j < window; ++j) {
        long idx = std::max(0l, t - j);
        f.segment(static_cast<long>(d) * j, d) = frames[static_cast<size_t>(idx)].vec();
    }
    return f;
}

}  // namespace

KnnModel knn_train(std::span<const ObservationFrame> frames, std::span<const int> labels,
                   const KnnConfig& config) {
    if (frames.empty()) throw ParameterError("KNN training set must not be empty");
    if (frames.size() != labels.size())
        throw ParameterError("KNN needs one label per training frame");
    if (config.k < 1) throw ParameterError("k must be >= 1");
    if (frames.size() < static_cast<size_t>(config.k))
        throw ConfigError("KNN needs at least k training samples; got " +
                          std::to_string(frames.size()) + " with k=" + std::to_string(config.k));
    if (config.window < 1) throw ParameterError("window must be >= 1");
    for (int lab : labels)
        if (lab < 1) throw ParameterError("labels must be 1-based positive movement indices");

    const long n = static_cast<long>(frames.size());
    const long dim = 6l * config.window;
    Mat feats(n, dim);
    for (long t = 0; t < n; ++t) feats.row(t) = window_feature(frames, t, config.window).transpose();

    KnnModel model;
    model.config = config;
    model.labels.assign(labels.begin(), labels.end());
    model.mean = feats.colwise().mean().transpose();
    Mat centered = feats.rowwise() - model.mean.transpose();
    model.stddev = (centered.array().square().colwise().sum() / static_cast<double>(n))
                       .sqrt()
                       .transpose()
                       .matrix();
    for (long j = 0; j < dim; ++j)
        if (model.stddev(j) <= 1e-12) model.stddev(j) = 1.0;
    model.features = centered * model.stddev.cwiseInverse().asDiagonal();
    return model;
}

int knn_classify_window(const KnnModel& model, std::span<const ObservationFrame> recent) {
    if (static_cast<int>(recent.size()) < 1)
        throw ParameterError("KNN query needs at least one frame");
    const long n = model.features.rows();
    Vec raw = window_feature(recent, static_cast<long>(recent.size()) - 1, model.config.window);
    Vec q = ((raw - model.mean).array() / model.stddev.array()).matrix();

    Vec dists = (model.features.rowwise() - q.transpose()).rowwise().norm();
    std::vector<long> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0l);
    long k = std::min<long>(model.config.k, n);
    auto cmp = [&](long a, long b) {
        if (dists(a) != dists(b)) return dists(a) < dists(b);
        return model.labels[static_cast<size_t>(a)] < model.labels[static_cast<size_t>(b)];
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), cmp);

    int max_label = *std::max_element(model.labels.begin(), model.labels.end());
    Vec score = Vec::Zero(max_label);
    for (long r = 0; r < k; ++r) {
        long idx = order[static_cast<size_t>(r)];
        double w = 1.0 / (dists(idx) + 1e-12);
        score(model.labels[static_cast<size_t>(idx)] - 1) += w;
    }
    int best = 0;
    for (int c = 1; c < max_label; ++c)
        if (score(c) > score(best)) best = c;
    return best + 1;
}

LabelSequence knn_classify_sequence(const KnnModel& model,
                                    std::span<const ObservationFrame> frames) {
    LabelSequence seq;
    seq.provenance = LabelSequence::Provenance::Knn;
    seq.labels.reserve(frames.size());
    for (size_t t = 0; t < frames.size(); ++t)
        seq.labels.push_back(knn_classify_window(model, frames.subspan(0, t + 1)));
    return seq;
}

}  // namespace varhhmm
