#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "varhhmm/baselines.hpp"
#include "varhhmm/errors.hpp"
#include "ec_corpus.hpp"
#include "test_util.hpp"

using varhhmm::AxisDetection;
using varhhmm::EcConfig;
using varhhmm::KnnConfig;
using varhhmm::KnnModel;
using varhhmm::LabelSequence;
using varhhmm::MovementEvent;
using varhhmm::ObservationFrame;
using varhhmm::Vec;

TEST_CASE("threshold segmentation reproduces the hand-traced corpus exactly") {
    for (const auto& c : ec_corpus::corpus()) {
        CAPTURE(c.name);
        auto events = varhhmm::ec_segment(c.frames);
        REQUIRE(events.size() == c.expected.size());
        for (size_t i = 0; i < events.size(); ++i) {
            CHECK(events[i].onset == c.expected[i].first);
            CHECK(events[i].end == c.expected[i].second);
            CHECK(events[i].movement_label == 0);
        }
    }
}

TEST_CASE("per-axis detection reports onset, crossing and end") {
    // triangle on gyro x: 0 at t=10, rises by 5 per sample to 100 at t=30,
    // falls back to 0 at t=50; upper = 30, lower = 1.5
    auto frames = ec_corpus::zero_frames(60);
    ec_corpus::ramp_up(frames, 0, 10, 30, 5.0);
    ec_corpus::ramp_down(frames, 0, 30, 50, 100.0, 5.0);

    auto dets = varhhmm::ec_axis_detections(frames, 0);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].axis == 0);
    CHECK(dets[0].onset == 10);    // last sample strictly below the lower threshold
    CHECK(dets[0].crossing == 17); // 35 is the first value strictly above 30
    CHECK(dets[0].end == 50);

    // quiet axes see a zero peak and therefore nothing above it
    CHECK(varhhmm::ec_axis_detections(frames, 1).empty());
    CHECK(varhhmm::ec_axis_detections(frames, 2).empty());
}

TEST_CASE("detections from different axes merge when they touch") {
    auto frames = ec_corpus::zero_frames(60);
    // axis 0 active on [5, 20], axis 1 on [15, 30]; both plateaus at full scale
    for (int t = 6; t <= 19; ++t) frames[static_cast<size_t>(t)].gyr(0) = 80.0;
    for (int t = 16; t <= 29; ++t) frames[static_cast<size_t>(t)].gyr(1) = 120.0;

    auto d0 = varhhmm::ec_axis_detections(frames, 0);
    auto d1 = varhhmm::ec_axis_detections(frames, 1);
    REQUIRE(d0.size() == 1);
    REQUIRE(d1.size() == 1);
    CHECK(d0[0].onset == 5);
    CHECK(d0[0].end == 20);
    CHECK(d1[0].onset == 15);
    CHECK(d1[0].end == 30);

    auto events = varhhmm::ec_segment(frames);
    REQUIRE(events.size() == 1);
    CHECK(events[0].onset == 5);
    CHECK(events[0].end == 30);
}

TEST_CASE("the accelerometer never influences segmentation") {
    auto base = ec_corpus::corpus()[0];  // triangle
    auto loud = base.frames;
    for (auto& fr : loud) fr.acc = Eigen::Vector3d::Constant(1.9);
    auto ev_base = varhhmm::ec_segment(base.frames);
    auto ev_loud = varhhmm::ec_segment(loud);
    REQUIRE(ev_base.size() == ev_loud.size());
    for (size_t i = 0; i < ev_base.size(); ++i) {
        CHECK(ev_base[i].onset == ev_loud[i].onset);
        CHECK(ev_base[i].end == ev_loud[i].end);
    }
}

TEST_CASE("degenerate segmentation inputs") {
    std::vector<ObservationFrame> empty;
    CHECK(varhhmm::ec_segment(empty).empty());
    CHECK(varhhmm::ec_segment(ec_corpus::zero_frames(40)).empty());

    auto frames = ec_corpus::zero_frames(10);
    CHECK_THROWS_AS(varhhmm::ec_axis_detections(frames, 3), varhhmm::ParameterError);
    CHECK_THROWS_AS(varhhmm::ec_axis_detections(frames, -1), varhhmm::ParameterError);
    EcConfig bad;
    bad.upper_frac = 0.0;
    CHECK_THROWS_AS(varhhmm::ec_axis_detections(frames, 0, bad), varhhmm::ParameterError);
    bad.upper_frac = 1.5;
    CHECK_THROWS_AS(varhhmm::ec_axis_detections(frames, 0, bad), varhhmm::ParameterError);
    bad = EcConfig{};
    bad.lower_divisor = 0.5;
    CHECK_THROWS_AS(varhhmm::ec_axis_detections(frames, 0, bad), varhhmm::ParameterError);
}

TEST_CASE("detection intervals are ordered and bracket their crossing") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> burst(50.0, 400.0);
    for (int rep = 0; rep < 20; ++rep) {
        auto frames = ec_corpus::zero_frames(300);
        for (auto& fr : frames)
            for (int a = 0; a < 3; ++a) fr.gyr(a) = noise(rng);
        // a few random bursts
        std::uniform_int_distribution<int> pos(0, 289);
        for (int b = 0; b < 4; ++b) {
            int start = pos(rng);
            double amp = burst(rng);
            for (int t = start; t < start + 10; ++t)
                frames[static_cast<size_t>(t)].gyr(rep % 3) += amp;
        }
        for (int axis = 0; axis < 3; ++axis) {
            auto dets = varhhmm::ec_axis_detections(frames, axis);
            long prev_end = -1;
            for (const auto& det : dets) {
                CHECK(det.onset <= det.crossing);
                CHECK(det.crossing <= det.end);
                // backtracking may reuse the previous interval's final
                // below-threshold sample, but never reach past it
                CHECK(det.onset >= prev_end);
                CHECK(det.crossing > prev_end);
                prev_end = det.end;
            }
        }
        auto events = varhhmm::ec_segment(frames);
        long prev_end = -1;
        for (const auto& ev : events) {
            CHECK(ev.onset > prev_end);
            CHECK(ev.onset <= ev.end);
            prev_end = ev.end;
        }
    }
}

TEST_CASE("event labels paint the per-sample track") {
    auto frames = ec_corpus::zero_frames(8);
    std::vector<MovementEvent> events = {{2, 4, 0}};
    LabelSequence seq = varhhmm::ec_labels(frames, events, 2);
    CHECK(seq.provenance == LabelSequence::Provenance::Ec);
    CHECK(seq.labels == std::vector<int>({1, 1, 2, 2, 2, 1, 1, 1}));

    // an event that already carries a label keeps it
    std::vector<MovementEvent> labeled = {{0, 1, 4}, {6, 7, 3}};
    LabelSequence seq2 = varhhmm::ec_labels(frames, labeled, 2);
    CHECK(seq2.labels == std::vector<int>({4, 4, 1, 1, 1, 1, 3, 3}));
}

namespace {

std::vector<ObservationFrame> random_frames(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<ObservationFrame> frames(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        frames[static_cast<size_t>(t)].t = t;
        for (int i = 0; i < 3; ++i) {
            frames[static_cast<size_t>(t)].acc(i) = 0.5 * g(rng);
            frames[static_cast<size_t>(t)].gyr(i) = 40.0 * g(rng);
        }
    }
    return frames;
}

// Straight-line reference classifier working from the stored standardized
// training matrix: full sort by (distance, label), inverse-distance vote,
// lowest label on tied scores.
int knn_oracle(const KnnModel& model, const Vec& query_std) {
    const long n = model.features.rows();
    std::vector<std::pair<double, long>> byd;
    for (long r = 0; r < n; ++r) {
        double s = 0.0;
        for (long j = 0; j < model.features.cols(); ++j) {
            double diff = model.features(r, j) - query_std(j);
            s += diff * diff;
        }
        byd.push_back({std::sqrt(s), r});
    }
    std::sort(byd.begin(), byd.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return model.labels[static_cast<size_t>(a.second)] < model.labels[static_cast<size_t>(b.second)];
    });
    long k = std::min<long>(model.config.k, n);
    int max_label = *std::max_element(model.labels.begin(), model.labels.end());
    std::vector<double> score(static_cast<size_t>(max_label), 0.0);
    for (long r = 0; r < k; ++r) {
        double w = 1.0 / (byd[static_cast<size_t>(r)].first + 1e-12);
        score[static_cast<size_t>(model.labels[static_cast<size_t>(byd[static_cast<size_t>(r)].second)] - 1)] += w;
    }
    int best = 0;
    for (int c = 1; c < max_label; ++c)
        if (score[static_cast<size_t>(c)] > score[static_cast<size_t>(best)]) best = c;
    return best + 1;
}

}  // namespace

TEST_CASE("nearest-neighbour training set size bounds") {
    std::mt19937_64 rng(62);
    KnnConfig config;  // k = 29
    auto ok = random_frames(rng, 30);
    std::vector<int> ok_labels(30, 1);
    ok_labels[5] = 2;
    CHECK_NOTHROW(varhhmm::knn_train(ok, ok_labels, config));

    auto small = random_frames(rng, 28);
    std::vector<int> small_labels(28, 1);
    CHECK_THROWS_AS(varhhmm::knn_train(small, small_labels, config), varhhmm::ConfigError);
}

TEST_CASE("training inputs are validated") {
    std::mt19937_64 rng(63);
    auto frames = random_frames(rng, 10);
    std::vector<int> labels(10, 1);
    KnnConfig config;
    config.k = 3;

    SUBCASE("empty set") {
        std::vector<ObservationFrame> none;
        std::vector<int> nolab;
        CHECK_THROWS_AS(varhhmm::knn_train(none, nolab, config), varhhmm::ParameterError);
    }
    SUBCASE("label count mismatch") {
        labels.pop_back();
        CHECK_THROWS_AS(varhhmm::knn_train(frames, labels, config), varhhmm::ParameterError);
    }
    SUBCASE("non-positive k") {
        config.k = 0;
        CHECK_THROWS_AS(varhhmm::knn_train(frames, labels, config), varhhmm::ParameterError);
    }
    SUBCASE("non-positive window") {
        config.window = 0;
        CHECK_THROWS_AS(varhhmm::knn_train(frames, labels, config), varhhmm::ParameterError);
    }
    SUBCASE("zero label") {
        labels[3] = 0;
        CHECK_THROWS_AS(varhhmm::knn_train(frames, labels, config), varhhmm::ParameterError);
    }
}

TEST_CASE("feature standardization uses population moments with a constant-column guard") {
    std::vector<ObservationFrame> frames(4);
    for (int t = 0; t < 4; ++t) {
        frames[static_cast<size_t>(t)].t = t;
        frames[static_cast<size_t>(t)].acc(0) = 1.0 + t;  // 1, 2, 3, 4
    }
    std::vector<int> labels = {1, 1, 2, 2};
    KnnConfig config;
    config.k = 1;
    KnnModel model = varhhmm::knn_train(frames, labels, config);

    CHECK(model.mean(0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(model.stddev(0) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
    // constant columns keep a unit divisor instead of blowing up
    for (int j = 1; j < 6; ++j) {
        CHECK(model.stddev(j) == 1.0);
        for (int r = 0; r < 4; ++r) CHECK(model.features(r, j) == 0.0);
    }
    CHECK(model.features(0, 0) == doctest::Approx(-1.5 / std::sqrt(1.25)).epsilon(1e-14));
    CHECK(model.features(3, 0) == doctest::Approx(1.5 / std::sqrt(1.25)).epsilon(1e-14));
}

TEST_CASE("a training point queries back to its own label at k = 1") {
    std::mt19937_64 rng(64);
    auto frames = random_frames(rng, 40);
    std::vector<int> labels;
    for (int t = 0; t < 40; ++t) labels.push_back(1 + t % 3);
    KnnConfig config;
    config.k = 1;
    KnnModel model = varhhmm::knn_train(frames, labels, config);

    for (int t = 0; t < 40; ++t) {
        std::vector<ObservationFrame> query = {frames[static_cast<size_t>(t)]};
        CHECK(varhhmm::knn_classify_window(model, query) == labels[static_cast<size_t>(t)]);
    }
}

TEST_CASE("equidistant neighbours of different classes resolve to the lower label") {
    std::vector<ObservationFrame> frames(2);
    frames[0].t = 0;
    frames[0].acc(0) = -1.0;
    frames[1].t = 1;
    frames[1].acc(0) = 1.0;
    std::vector<int> labels = {2, 1};  // order must not matter
    KnnConfig config;
    config.k = 2;
    KnnModel model = varhhmm::knn_train(frames, labels, config);

    ObservationFrame middle;  // equidistant from both training points
    middle.acc(0) = 0.0;
    std::vector<ObservationFrame> query = {middle};
    CHECK(varhhmm::knn_classify_window(model, query) == 1);
}

TEST_CASE("classification matches a straight-line reference on random data") {
    std::mt19937_64 rng(65);
    auto frames = random_frames(rng, 200);
    std::vector<int> labels;
    std::uniform_int_distribution<int> lab(1, 4);
    for (int t = 0; t < 200; ++t) labels.push_back(lab(rng));

    for (int window : {1, 3}) {
        KnnConfig config;
        config.k = 7;
        config.window = window;
        KnnModel model = varhhmm::knn_train(frames, labels, config);

        auto queries = random_frames(rng, 50);
        for (int q = 0; q < 50; ++q) {
            // the oracle standardizes the same raw window feature
            std::vector<ObservationFrame> hist;
            for (int j = std::max(0, q - window + 1); j <= q; ++j)
                hist.push_back(queries[static_cast<size_t>(j)]);
            Vec raw(6 * window);
            for (int j = 0; j < window; ++j) {
                int idx = std::max(0, static_cast<int>(hist.size()) - 1 - j);
                raw.segment(6 * j, 6) = hist[static_cast<size_t>(idx)].vec();
            }
            Vec std_q = ((raw - model.mean).array() / model.stddev.array()).matrix();
            CHECK(varhhmm::knn_classify_window(model, hist) == knn_oracle(model, std_q));
        }
    }
}

TEST_CASE("predictions are invariant to training-set permutation") {
    std::mt19937_64 rng(66);
    auto frames = random_frames(rng, 60);
    std::vector<int> labels;
    for (int t = 0; t < 60; ++t) labels.push_back(1 + t % 3);

    KnnConfig config;
    config.k = 5;
    KnnModel base = varhhmm::knn_train(frames, labels, config);

    std::vector<size_t> perm(60);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ObservationFrame> shuffled;
    std::vector<int> shuffled_labels;
    for (size_t idx : perm) {
        shuffled.push_back(frames[idx]);
        shuffled_labels.push_back(labels[idx]);
    }
    // window 1 features carry no cross-frame context, so reordering the
    // training rows must not change any prediction
    KnnModel permuted = varhhmm::knn_train(shuffled, shuffled_labels, config);

    auto queries = random_frames(rng, 25);
    for (int q = 0; q < 25; ++q) {
        std::vector<ObservationFrame> one = {queries[static_cast<size_t>(q)]};
        CHECK(varhhmm::knn_classify_window(base, one) == varhhmm::knn_classify_window(permuted, one));
    }
}

TEST_CASE("an exact duplicate in the training set dominates the vote") {
    std::mt19937_64 rng(67);
    auto frames = random_frames(rng, 20);
    std::vector<int> labels(20, 1);
    // plant the query twice with the competing label
    frames[7] = frames[3];
    labels[3] = 2;
    labels[7] = 2;

    KnnConfig config;
    config.k = 5;
    KnnModel model = varhhmm::knn_train(frames, labels, config);
    std::vector<ObservationFrame> query = {frames[3]};
    // two zero-distance votes at weight 1e12 swamp three finite ones
    CHECK(varhhmm::knn_classify_window(model, query) == 2);
}

TEST_CASE("sequence classification pads early history with the first frame") {
    std::mt19937_64 rng(68);
    auto frames = random_frames(rng, 30);
    std::vector<int> labels;
    for (int t = 0; t < 30; ++t) labels.push_back(1 + (t / 10));

    KnnConfig config;
    config.k = 1;
    config.window = 3;
    KnnModel model = varhhmm::knn_train(frames, labels, config);
    LabelSequence seq = varhhmm::knn_classify_sequence(model, frames);

    CHECK(seq.provenance == LabelSequence::Provenance::Knn);
    REQUIRE(seq.labels.size() == 30);
    // training features use the same padding, so every sample finds itself
    for (int t = 0; t < 30; ++t) CHECK(seq.labels[static_cast<size_t>(t)] == labels[static_cast<size_t>(t)]);
}
