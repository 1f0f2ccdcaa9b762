#ifndef VARHHMM_DATASET_HPP
#define VARHHMM_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varhhmm/frame.hpp"
#include "varhhmm/model.hpp"

namespace varhhmm {

struct DatasetMeta {
    double sample_rate_hz = kSampleRateHz;
    std::string name;
    std::vector<std::string> movement_names;
};

/// A contiguous recording. Labels, when present, are per-sample 1-based
/// movement indices aligned with frames. Events, when present, are sorted by
/// onset and non-overlapping.
struct Dataset {
    std::vector<ObservationFrame> frames;
    std::optional<std::vector<int>> labels;
    std::vector<MovementEvent> events;
    DatasetMeta meta;

    long n_samples() const { return static_cast<long>(frames.size()); }
    void validate() const;
};

/// Dataset CSV: header "t,ax,ay,az,gx,gy,gz" with an optional trailing
/// ",label" column. Numeric output uses shortest round-trip formatting so a
/// save/load cycle is bit-exact.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& dataset, const std::string& path);

/// Events CSV: header "onset,end,label", one row per movement event.
std::vector<MovementEvent> load_events_csv(const std::string& path);
void save_events_csv(const std::vector<MovementEvent>& events, const std::string& path);

/// Labels CSV: header "t,label". Used for classifier outputs.
std::vector<int> load_labels_csv(const std::string& path);
void save_labels_csv(const std::vector<ObservationFrame>& frames,
                     const std::vector<int>& labels, const std::string& path);

struct GeneratorConfig {
    HhmmSpec spec;
    int n_movement_events = 10;
    std::pair<int, int> rest_duration_range = {50, 150};
    std::pair<int, int> movement_duration_range = {60, 120};
    double noise_scale = 1.0;
    std::uint64_t seed = 0;
};

struct GeneratorReport {
    double clip_fraction = 0.0;  // fraction of samples clamped to sensor range
    bool unstable_warning = false;
    std::vector<int> unstable_segments;  // flattened (movement * K + segment)
};

/// Samples a labeled recording from a piecewise VAR process: rest and
/// movement events alternate, non-rest movements cycle round robin, and the
/// segment index follows each movement's internal chain. Frames outside the
/// sensor range are clamped; more than 50% clamped samples is an error.
Dataset generate(const GeneratorConfig& config, GeneratorReport* report = nullptr);

/// Splits at the event boundary nearest to fraction * n_samples so no event
/// is bisected. Both halves keep aligned labels/events with positions rebased
/// to their own start.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double fraction);

/// Small three-movement model (rest plus two oscillatory movements) used by
/// the CLI demo preset. The movements share per-frame amplitude statistics
/// and differ mainly in their lag-one dynamics.
HhmmSpec demo_spec();

}  // namespace varhhmm

#endif
