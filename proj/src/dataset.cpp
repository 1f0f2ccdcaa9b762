#include "varhhmm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "varhhmm/errors.hpp"
#include "varhhmm/model_io.hpp"
#include "varhhmm/text.hpp"

namespace varhhmm {

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return in;
}

}  // namespace

void Dataset::validate() const {
    if (labels) {
        if (labels->size() != frames.size())
            throw ParameterError("labels length " + std::to_string(labels->size()) +
                                 " does not match frame count " + std::to_string(frames.size()));
        for (int lab : *labels)
            if (lab < 1) throw ParameterError("labels must be 1-based positive movement indices");
    }
    long n = n_samples();
    long prev_end = -1;
    for (const auto& ev : events) {
        if (ev.onset < 0 || ev.end >= n || ev.onset >= ev.end)
            throw ParameterError("event [" + std::to_string(ev.onset) + "," + std::to_string(ev.end) +
                                 "] out of range for " + std::to_string(n) + " samples");
        if (ev.onset <= prev_end)
            throw ParameterError("events must be sorted by onset and non-overlapping");
        prev_end = ev.end;
        if (labels && ev.movement_label > 0)
            for (long t = ev.onset; t <= ev.end; ++t)
                if ((*labels)[static_cast<size_t>(t)] != ev.movement_label)
                    throw ParameterError("label at sample " + std::to_string(t) +
                                         " disagrees with event label " +
                                         std::to_string(ev.movement_label));
    }
    for (size_t i = 1; i < frames.size(); ++i)
        if (frames[i].t <= frames[i - 1].t)
            throw ParameterError("frame timestamps must be strictly increasing");
}

Dataset load_dataset_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    size_t lineno = 0;

    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    ++lineno;
    auto header = split_csv(line);
    static const char* base[] = {"t", "ax", "ay", "az", "gx", "gy", "gz"};
    bool has_label = header.size() == 8 && header[7] == "label";
    if (!(header.size() == 7 || has_label))
        throw ParseError(path, 1, "expected header t,ax,ay,az,gx,gy,gz[,label]");
    for (int i = 0; i < 7; ++i)
        if (header[static_cast<size_t>(i)] != base[i])
            throw ParseError(path, 1, "expected header t,ax,ay,az,gx,gy,gz[,label]");

    Dataset ds;
    if (has_label) ds.labels.emplace();
    long clipped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_ws(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != (has_label ? 8u : 7u))
            throw ParseError(path, lineno, "expected " + std::to_string(has_label ? 8 : 7) +
                                               " fields, got " + std::to_string(f.size()));
        ObservationFrame fr;
        fr.t = parse_ll_field(f[0], path, lineno);
        for (int i = 0; i < 3; ++i) fr.acc(i) = parse_double_field(f[static_cast<size_t>(1 + i)], path, lineno);
        for (int i = 0; i < 3; ++i) fr.gyr(i) = parse_double_field(f[static_cast<size_t>(4 + i)], path, lineno);
        if (!ds.frames.empty() && fr.t <= ds.frames.back().t)
            throw ParseError(path, lineno, "timestamps must be strictly increasing");
        if (clamp_to_sensor_range(fr)) ++clipped;
        ds.frames.push_back(fr);
        if (has_label) {
            long long lab = parse_ll_field(f[7], path, lineno);
            if (lab < 1) throw ParseError(path, lineno, "labels must be positive movement indices");
            ds.labels->push_back(static_cast<int>(lab));
        }
    }
    if (clipped > 0)
        std::fprintf(stderr, "warning: %s: clamped %ld samples to sensor range\n", path.c_str(), clipped);
    return ds;
}

void save_dataset_csv(const Dataset& dataset, const std::string& path) {
    if (dataset.labels && dataset.labels->size() != dataset.frames.size())
        throw ParameterError("labels length does not match frame count");
    std::ostringstream out;
    out << "t,ax,ay,az,gx,gy,gz";
    if (dataset.labels) out << ",label";
    out << '\n';
    for (size_t r = 0; r < dataset.frames.size(); ++r) {
        const auto& fr = dataset.frames[r];
        out << fr.t;
        for (int i = 0; i < 3; ++i) out << ',' << fmt_g17(fr.acc(i));
        for (int i = 0; i < 3; ++i) out << ',' << fmt_g17(fr.gyr(i));
        if (dataset.labels) out << ',' << (*dataset.labels)[r];
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<MovementEvent> load_events_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    ++lineno;
    auto header = split_csv(line);
    if (header.size() != 3 || header[0] != "onset" || header[1] != "end" || header[2] != "label")
        throw ParseError(path, 1, "expected header onset,end,label");
    std::vector<MovementEvent> events;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_ws(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 3) throw ParseError(path, lineno, "expected 3 fields");
        MovementEvent ev;
        ev.onset = static_cast<long>(parse_ll_field(f[0], path, lineno));
        ev.end = static_cast<long>(parse_ll_field(f[1], path, lineno));
        ev.movement_label = static_cast<int>(parse_ll_field(f[2], path, lineno));
        if (ev.onset < 0 || ev.end <= ev.onset)
            throw ParseError(path, lineno, "event must satisfy 0 <= onset < end");
        events.push_back(ev);
    }
    return events;
}

void save_events_csv(const std::vector<MovementEvent>& events, const std::string& path) {
    std::ostringstream out;
    out << "onset,end,label\n";
    for (const auto& ev : events)
        out << ev.onset << ',' << ev.end << ',' << ev.movement_label << '\n';
    write_file_atomic(path, out.str());
}

std::vector<int> load_labels_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    ++lineno;
    auto header = split_csv(line);
    if (header.size() != 2 || header[0] != "t" || header[1] != "label")
        throw ParseError(path, 1, "expected header t,label");
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_ws(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 2) throw ParseError(path, lineno, "expected 2 fields");
        labels.push_back(static_cast<int>(parse_ll_field(f[1], path, lineno)));
    }
    return labels;
}

void save_labels_csv(const std::vector<ObservationFrame>& frames,
                     const std::vector<int>& labels, const std::string& path) {
    if (frames.size() != labels.size())
        throw ParameterError("labels length does not match frame count");
    std::ostringstream out;
    out << "t,label\n";
    for (size_t r = 0; r < frames.size(); ++r)
        out << frames[r].t << ',' << labels[r] << '\n';
    write_file_atomic(path, out.str());
}

namespace {

int sample_categorical(const Vec& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        acc += p(i);
        if (u < acc) return i;
    }
    return static_cast<int>(p.size()) - 1;
}

}  // namespace

Dataset generate(const GeneratorConfig& config, GeneratorReport* report) {
    const HhmmSpec& spec = config.spec;
    spec.validate();
    const int n_mov = spec.n_movements();
    const int tau = spec.tau;
    const int d = spec.d;
    if (config.n_movement_events < 0) throw ParameterError("n_movement_events must be >= 0");
    if (config.n_movement_events > 0 && n_mov < 2)
        throw ParameterError("movement events need at least one non-rest movement");
    auto check_range = [](std::pair<int, int> r, const char* what) {
        if (r.first < 1 || r.second < r.first)
            throw ParameterError(std::string(what) + " duration range must satisfy 1 <= lo <= hi");
    };
    check_range(config.rest_duration_range, "rest");
    check_range(config.movement_duration_range, "movement");
    if (config.movement_duration_range.first < 2)
        throw ParameterError("movement durations must span at least 2 samples per event");
    if (config.noise_scale < 0.0) throw ParameterError("noise_scale must be >= 0");

    GeneratorReport local;
    GeneratorReport& rep = report ? *report : local;
    rep = GeneratorReport{};

    // Cholesky factors of noise_scale * sigma, plus a lag-one stability scan.
    std::vector<std::vector<Mat>> chol(static_cast<size_t>(n_mov));
    for (int m = 0; m < n_mov; ++m) {
        for (int i = 0; i < spec.n_segments(); ++i) {
            const VarModel& seg = spec.movements[static_cast<size_t>(m)].segments[static_cast<size_t>(i)];
            Mat L = seg.sigma.llt().matrixL();
            chol[static_cast<size_t>(m)].push_back(std::sqrt(config.noise_scale) * L);
            if (tau >= 1) {
                double radius = seg.lag_mats[0].eigenvalues().cwiseAbs().maxCoeff();
                if (radius > 1.05) {
                    rep.unstable_warning = true;
                    rep.unstable_segments.push_back(m * spec.n_segments() + i);
                }
            }
        }
    }
    if (rep.unstable_warning)
        std::fprintf(stderr, "warning: %zu generator segments have lag-one spectral radius > 1.05\n",
                     rep.unstable_segments.size());

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::uniform_int_distribution<int> rest_dur(config.rest_duration_range.first,
                                                config.rest_duration_range.second);
    std::uniform_int_distribution<int> mov_dur(config.movement_duration_range.first,
                                               config.movement_duration_range.second);

    Dataset ds;
    ds.labels.emplace();
    ds.meta.sample_rate_hz = kSampleRateHz;
    ds.meta.name = "synthetic";

    std::vector<Vec> history;  // most recent first
    long clipped = 0;
    long t = 0;

    auto emit_block = [&](int movement, int duration) {
        const MovementModel& mm = spec.movements[static_cast<size_t>(movement)];
        int seg = sample_categorical(mm.seg_prior, rng);
        for (int k = 0; k < duration; ++k) {
            if (k > 0) seg = sample_categorical(mm.seg_trans.row(seg).transpose(), rng);
            const VarModel& vm = mm.segments[static_cast<size_t>(seg)];
            Vec y;
            if (static_cast<int>(history.size()) < tau)
                y = vm.mu;
            else
                y = var_predict(vm, std::span<const Vec>(history.data(), history.size()));
            Vec z(d);
            for (int j = 0; j < d; ++j) z(j) = stdnorm(rng);
            y += chol[static_cast<size_t>(movement)][static_cast<size_t>(seg)] * z;

            ObservationFrame fr;
            fr.t = t++;
            fr.acc = y.head<3>();
            fr.gyr = y.tail<3>();
            if (clamp_to_sensor_range(fr)) ++clipped;
            ds.frames.push_back(fr);
            ds.labels->push_back(movement + 1);

            history.insert(history.begin(), fr.vec());
            if (static_cast<int>(history.size()) > tau) history.resize(static_cast<size_t>(tau));
        }
    };

    emit_block(0, rest_dur(rng));
    for (int e = 0; e < config.n_movement_events; ++e) {
        int movement = n_mov == 2 ? 1 : 1 + e % (n_mov - 1);
        int duration = mov_dur(rng);
        long onset = t;
        emit_block(movement, duration);
        ds.events.push_back({onset, t - 1, movement + 1});
        emit_block(0, rest_dur(rng));
    }

    rep.clip_fraction = ds.frames.empty() ? 0.0 : static_cast<double>(clipped) / static_cast<double>(ds.n_samples());
    if (rep.clip_fraction > 0.5)
        throw ParameterError("more than half of the generated samples hit the sensor range; "
                             "reduce noise_scale or rescale the model");
    ds.validate();
    return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ParameterError("split fraction must lie strictly between 0 and 1");
    const long n = dataset.n_samples();
    if (n < 2) throw ParameterError("need at least 2 samples to split");

    double target = fraction * static_cast<double>(n);
    long cut;
    if (dataset.events.empty()) {
        cut = std::clamp(std::lround(target), 1l, n - 1);
    } else {
        std::vector<long> candidates;
        for (const auto& ev : dataset.events) candidates.push_back(ev.onset);
        candidates.push_back(n);
        cut = candidates.front();
        for (long c : candidates)
            if (std::abs(static_cast<double>(c) - target) < std::abs(static_cast<double>(cut) - target)) cut = c;
    }

    auto slice = [&](long lo, long hi, const char* suffix) {
        Dataset part;
        part.meta = dataset.meta;
        if (!part.meta.name.empty()) part.meta.name += suffix;
        int64_t t0 = dataset.frames[static_cast<size_t>(lo)].t;
        for (long r = lo; r < hi; ++r) {
            ObservationFrame fr = dataset.frames[static_cast<size_t>(r)];
            fr.t -= t0;
            part.frames.push_back(fr);
        }
        if (dataset.labels)
            part.labels.emplace(dataset.labels->begin() + lo, dataset.labels->begin() + hi);
        for (const auto& ev : dataset.events)
            if (ev.onset >= lo && ev.end < hi)
                part.events.push_back({ev.onset - lo, ev.end - lo, ev.movement_label});
        return part;
    };
    Dataset train = slice(0, cut, "/train");
    Dataset test = slice(cut, n, "/test");
    return {std::move(train), std::move(test)};
}

HhmmSpec demo_spec() {
    const int d = 6;
    auto rotation6 = [&](double theta, double radius) {
        Mat a = Mat::Zero(d, d);
        double c = radius * std::cos(theta), s = radius * std::sin(theta);
        for (int b = 0; b < 3; ++b) {
            a(2 * b, 2 * b) = c;
            a(2 * b, 2 * b + 1) = -s;
            a(2 * b + 1, 2 * b) = s;
            a(2 * b + 1, 2 * b + 1) = c;
        }
        return a;
    };
    auto segment = [&](const Mat& a, double noise_std) {
        VarModel vm;
        vm.mu = Vec::Zero(d);
        vm.lag_mats = {a};
        vm.sigma = noise_std * noise_std * Mat::Identity(d, d);
        return vm;
    };
    auto movement = [&](VarModel s0, VarModel s1) {
        MovementModel mm;
        mm.segments = {std::move(s0), std::move(s1)};
        mm.seg_trans = Mat(2, 2);
        mm.seg_trans << 0.98, 0.02, 0.02, 0.98;
        mm.seg_prior = Vec(2);
        mm.seg_prior << 0.9, 0.1;
        return mm;
    };

    HhmmSpec spec;
    spec.tau = 1;
    spec.d = d;
    spec.rho = 0.999;
    // Rest: weakly damped noise. The two oscillatory movements share the
    // stationary covariance q^2/(1-r^2) I, so per-frame amplitudes carry no
    // class information and only the lag-one dynamics separate them.
    spec.movements.push_back(movement(segment(0.5 * Mat::Identity(d, d), 0.02),
                                      segment(0.55 * Mat::Identity(d, d), 0.02)));
    spec.movements.push_back(movement(segment(rotation6(0.35, 0.95), 0.05),
                                      segment(rotation6(0.55, 0.95), 0.05)));
    spec.movements.push_back(movement(segment(rotation6(0.95, 0.95), 0.05),
                                      segment(rotation6(1.35, 0.95), 0.05)));
    spec.mov_trans = build_movement_transition(spec.rho, 3);
    spec.mov_prior = Vec::Zero(3);
    spec.mov_prior(0) = 1.0;
    spec.validate();
    return spec;
}

}  // namespace varhhmm
