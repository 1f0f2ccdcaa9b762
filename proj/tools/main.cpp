#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "varhhmm/baselines.hpp"
#include "varhhmm/dataset.hpp"
#include "varhhmm/errors.hpp"
#include "varhhmm/eval.hpp"
#include "varhhmm/filter.hpp"
#include "varhhmm/model_io.hpp"
#include "varhhmm/text.hpp"
#include "varhhmm/trainer.hpp"

namespace {

using nlohmann::json;

std::uint64_t env_seed_default() {
    const char* env = std::getenv("GESTUREHMM_SEED");
    if (!env || !*env) return 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
        throw varhhmm::ConfigError("GESTUREHMM_SEED must be a non-negative integer");
    return v;
}

struct GenerateArgs {
    std::string model_path;
    std::string preset;
    std::string out;
    std::string events_out;
    int n_events = 10;
    std::pair<int, int> rest_range = {50, 150};
    std::pair<int, int> mov_range = {60, 120};
    double noise_scale = 1.0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double split_fraction = 0.0;
    std::string train_out;
    std::string test_out;
};

void run_generate(const GenerateArgs& args) {
    varhhmm::HhmmSpec spec;
    if (!args.model_path.empty())
        spec = varhhmm::load_spec(args.model_path);
    else if (args.preset == "demo")
        spec = varhhmm::demo_spec();
    else
        throw varhhmm::ConfigError("generate needs --model or --preset demo");

    varhhmm::GeneratorConfig config;
    config.spec = spec;
    config.n_movement_events = args.n_events;
    config.rest_duration_range = args.rest_range;
    config.movement_duration_range = args.mov_range;
    config.noise_scale = args.noise_scale;
    config.seed = args.seed_given ? args.seed : env_seed_default();

    varhhmm::GeneratorReport report;
    varhhmm::Dataset ds = varhhmm::generate(config, &report);
    varhhmm::save_dataset_csv(ds, args.out);
    if (!args.events_out.empty()) varhhmm::save_events_csv(ds.events, args.events_out);

    json summary;
    summary["n_samples"] = ds.n_samples();
    summary["n_events"] = ds.events.size();
    summary["clip_fraction"] = report.clip_fraction;
    summary["unstable_warning"] = report.unstable_warning;
    summary["out"] = args.out;

    if (args.split_fraction > 0.0) {
        if (args.train_out.empty() || args.test_out.empty())
            throw varhhmm::ConfigError("--split-fraction needs --train-out and --test-out");
        auto [train, test] = varhhmm::split_train_test(ds, args.split_fraction);
        varhhmm::save_dataset_csv(train, args.train_out);
        varhhmm::save_dataset_csv(test, args.test_out);
        summary["train_samples"] = train.n_samples();
        summary["test_samples"] = test.n_samples();
    }
    std::cout << summary.dump(2) << '\n';
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string report_out;
    int restarts = 50;
    int max_iters = 200;
    double ftol = 1e-10;
    int segments = 5;
    std::vector<int> taus;
    double rho = 0.999;
    int threads = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void run_train(const TrainArgs& args) {
    varhhmm::Dataset ds = varhhmm::load_dataset_csv(args.data);
    if (!ds.labels) throw varhhmm::ConfigError("training data must carry a label column");

    varhhmm::TrainConfig config;
    config.n_restarts = args.restarts;
    config.max_iters = args.max_iters;
    config.ftol = args.ftol;
    config.k_segments = args.segments;
    config.tau_candidates = args.taus.empty() ? std::vector<int>{1} : args.taus;
    config.rho = args.rho;
    config.n_threads = args.threads;
    config.seed = args.seed_given ? args.seed : env_seed_default();

    varhhmm::FullTrainResult result = varhhmm::train_full_spec(ds, config);
    varhhmm::save_spec(result.spec, args.out);

    json summary;
    summary["tau"] = result.chosen_tau;
    summary["n_movements"] = result.spec.n_movements();
    summary["skipped_runs"] = result.skipped_runs;
    for (const auto& [tau, bic] : result.bic_totals) summary["bic"][std::to_string(tau)] = bic;
    for (const auto& rep : result.reports) {
        summary["objective_per_movement"].push_back(rep.best_objective);
        summary["best_restart_per_movement"].push_back(rep.best_restart);
    }
    summary["out"] = args.out;
    std::cout << summary.dump(2) << '\n';

    if (!args.report_out.empty()) {
        json full;
        full["tau"] = result.chosen_tau;
        for (const auto& [tau, bic] : result.bic_totals) full["bic"][std::to_string(tau)] = bic;
        for (const auto& rep : result.reports) {
            json r;
            r["best_objective"] = rep.best_objective;
            r["best_restart"] = rep.best_restart;
            r["per_restart_objectives"] = rep.per_restart_objectives;
            r["iterations_used"] = rep.iterations_used;
            r["objective_traces"] = rep.objective_traces;
            full["movements"].push_back(r);
        }
        varhhmm::write_file_atomic(args.report_out, full.dump(2));
    }
}

struct ClassifyArgs {
    std::string classifier = "var-hhmm";
    std::string data;
    std::string model_path;
    std::string out;
    std::string posteriors_out;
    std::string events_out;
    std::string train_data;
    int k = 29;
    int window = 1;
    double ec_upper_frac = 0.30;
    double ec_lower_div = 20.0;
    int ec_label = 2;
};

void run_classify(const ClassifyArgs& args) {
    varhhmm::Dataset ds = varhhmm::load_dataset_csv(args.data);
    json summary;
    summary["classifier"] = args.classifier;
    summary["n_samples"] = ds.n_samples();

    std::vector<int> labels;
    if (args.classifier == "var-hhmm") {
        if (args.model_path.empty()) throw varhhmm::ConfigError("var-hhmm needs --model");
        varhhmm::HhmmSpec spec = varhhmm::load_spec(args.model_path);
        varhhmm::SequenceResult res = varhhmm::classify_sequence(spec, ds.frames);
        labels = res.labels.labels;
        summary["total_log_evidence"] = res.total_log_evidence;
        if (!args.posteriors_out.empty()) {
            std::ostringstream out;
            out << "t";
            for (int m = 1; m <= spec.n_movements(); ++m) out << ",p" << m;
            out << '\n';
            for (size_t t = 0; t < res.posteriors.size(); ++t) {
                out << ds.frames[t].t;
                for (long m = 0; m < res.posteriors[t].size(); ++m)
                    out << ',' << varhhmm::fmt_g17(res.posteriors[t](m));
                out << '\n';
            }
            varhhmm::write_file_atomic(args.posteriors_out, out.str());
        }
    } else if (args.classifier == "knn") {
        if (args.train_data.empty()) throw varhhmm::ConfigError("knn needs --train-data");
        varhhmm::Dataset train = varhhmm::load_dataset_csv(args.train_data);
        if (!train.labels) throw varhhmm::ConfigError("knn training data must carry a label column");
        varhhmm::KnnConfig kc;
        kc.k = args.k;
        kc.window = args.window;
        varhhmm::KnnModel model = varhhmm::knn_train(train.frames, *train.labels, kc);
        labels = varhhmm::knn_classify_sequence(model, ds.frames).labels;
    } else if (args.classifier == "ec") {
        varhhmm::EcConfig ec;
        ec.upper_frac = args.ec_upper_frac;
        ec.lower_divisor = args.ec_lower_div;
        auto events = varhhmm::ec_segment(ds.frames, ec);
        labels = varhhmm::ec_labels(ds.frames, events, args.ec_label).labels;
        summary["n_events"] = events.size();
        if (!args.events_out.empty()) varhhmm::save_events_csv(events, args.events_out);
    } else {
        throw varhhmm::ConfigError("unknown classifier '" + args.classifier + "'");
    }

    varhhmm::save_labels_csv(ds.frames, labels, args.out);
    summary["out"] = args.out;
    std::cout << summary.dump(2) << '\n';
}

struct EvaluateArgs {
    std::string data;
    std::string truth;
    std::string pred;
    std::string events;
    std::string out;
    std::string confusion_out;
    std::string lags_out;
    std::string blocks_out;
    std::string budget_out;
    double window_high_ms = varhhmm::kAcceptWindowHighMs;
};

void run_evaluate(const EvaluateArgs& args) {
    std::vector<int> truth;
    if (!args.truth.empty()) {
        truth = varhhmm::load_labels_csv(args.truth);
    } else if (!args.data.empty()) {
        varhhmm::Dataset ds = varhhmm::load_dataset_csv(args.data);
        if (!ds.labels) throw varhhmm::ConfigError("--data has no label column; use --true");
        truth = *ds.labels;
    } else {
        throw varhhmm::ConfigError("evaluate needs --true or labeled --data");
    }
    std::vector<int> pred = varhhmm::load_labels_csv(args.pred);

    namespace fs = std::filesystem;
    const bool dir_mode = !args.out.empty() &&
                          (args.out.back() == '/' || fs::is_directory(fs::path(args.out)));
    fs::path report_dir;
    if (dir_mode) {
        report_dir = fs::path(args.out);
        std::error_code ec;
        fs::create_directories(report_dir, ec);
        if (ec) throw varhhmm::ConfigError("cannot create " + args.out + ": " + ec.message());
    }
    auto in_dir = [&](const char* name) { return (report_dir / name).string(); };

    varhhmm::ConfusionMatrix cm = varhhmm::confusion(truth, pred);
    varhhmm::PrecisionRecall pr = varhhmm::precision_recall(cm);
    json summary = json::parse(varhhmm::metrics_to_json(cm, pr));

    std::vector<varhhmm::LagRecord> lags;
    if (!args.events.empty()) {
        auto events = varhhmm::load_events_csv(args.events);
        lags = varhhmm::event_lags(events, pred);
        long matched = 0;
        double onset_ms = 0.0, end_ms = 0.0;
        std::vector<double> onset_lags_ms, end_lags_ms;
        for (const auto& rec : lags)
            if (rec.matched) {
                ++matched;
                onset_lags_ms.push_back(static_cast<double>(rec.onset_lag) * varhhmm::kMsPerSample);
                end_lags_ms.push_back(static_cast<double>(rec.end_lag) * varhhmm::kMsPerSample);
                onset_ms += onset_lags_ms.back();
                end_ms += end_lags_ms.back();
            }
        summary["n_events"] = lags.size();
        summary["n_matched"] = matched;
        if (matched > 0) {
            summary["mean_onset_lag_ms"] = onset_ms / static_cast<double>(matched);
            summary["mean_end_lag_ms"] = end_ms / static_cast<double>(matched);
        }
        auto profiles = varhhmm::default_latency_profiles();
        auto budget = varhhmm::latency_budget(lags, profiles, args.window_high_ms);
        if (!args.lags_out.empty()) varhhmm::write_file_atomic(args.lags_out, varhhmm::lags_to_csv(lags));
        if (!args.budget_out.empty())
            varhhmm::write_file_atomic(args.budget_out, varhhmm::latency_budget_to_json(budget));
        if (dir_mode) {
            varhhmm::write_file_atomic(in_dir("lags.csv"), varhhmm::lags_to_csv(lags));
            varhhmm::write_file_atomic(in_dir("budget.json"), varhhmm::latency_budget_to_json(budget));
            varhhmm::write_file_atomic(in_dir("budget_curve.csv"),
                                       varhhmm::delayed_curve_to_csv(budget));
            varhhmm::write_file_atomic(
                in_dir("onset_lag_histogram.csv"),
                varhhmm::histogram_to_csv(onset_lags_ms, varhhmm::kMsPerSample));
            varhhmm::write_file_atomic(
                in_dir("end_lag_histogram.csv"),
                varhhmm::histogram_to_csv(end_lags_ms, varhhmm::kMsPerSample));
        }
    } else if (!args.lags_out.empty() || !args.budget_out.empty()) {
        throw varhhmm::ConfigError("--lags-out and --budget-out need --events");
    }

    auto blocks = varhhmm::misclassified_blocks(truth, pred);
    summary["n_misclassified_blocks"] = blocks.size();
    if (!args.blocks_out.empty())
        varhhmm::write_file_atomic(args.blocks_out, varhhmm::blocks_to_csv(blocks));
    if (!args.confusion_out.empty())
        varhhmm::write_file_atomic(args.confusion_out, varhhmm::confusion_to_csv(cm));
    if (dir_mode) {
        varhhmm::write_file_atomic(in_dir("metrics.json"), summary.dump(2));
        varhhmm::write_file_atomic(in_dir("confusion.csv"), varhhmm::confusion_to_csv(cm));
        varhhmm::write_file_atomic(in_dir("blocks.csv"), varhhmm::blocks_to_csv(blocks));
        std::vector<double> block_ms;
        for (long b : blocks) block_ms.push_back(static_cast<double>(b) * varhhmm::kMsPerSample);
        varhhmm::write_file_atomic(in_dir("block_histogram.csv"),
                                   varhhmm::histogram_to_csv(block_ms, varhhmm::kMsPerSample));
    } else if (!args.out.empty()) {
        varhhmm::write_file_atomic(args.out, summary.dump(2));
    }
    std::cout << summary.dump(2) << '\n';
}

struct StreamArgs {
    std::string model_path;
    std::string in;
    std::string out;
};

void run_stream(const StreamArgs& args) {
    varhhmm::HhmmSpec spec = varhhmm::load_spec(args.model_path);
    std::ifstream fin;
    std::ofstream fout;
    std::istream* in = &std::cin;
    std::ostream* out = &std::cout;
    if (!args.in.empty()) {
        fin.open(args.in);
        if (!fin) throw varhhmm::ParseError(args.in, 0, "cannot open file");
        in = &fin;
    }
    if (!args.out.empty()) {
        fout.open(args.out);
        if (!fout) throw varhhmm::ConfigError("cannot open " + args.out + " for writing");
        out = &fout;
    }
    const std::string source = args.in.empty() ? "<stdin>" : args.in;

    varhhmm::FilterState state = varhhmm::FilterState::init(spec);
    std::string line;
    size_t lineno = 0;
    while (std::getline(*in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw varhhmm::ParseError(source, lineno, e.what());
        }
        if (!j.contains("t") || !j.contains("acc") || !j.contains("gyr") ||
            !j["acc"].is_array() || j["acc"].size() != 3 || !j["gyr"].is_array() ||
            j["gyr"].size() != 3)
            throw varhhmm::ParseError(source, lineno, "expected {\"t\", \"acc\"[3], \"gyr\"[3]}");

        varhhmm::ObservationFrame frame;
        frame.t = j["t"].get<std::int64_t>();
        for (int i = 0; i < 3; ++i) {
            frame.acc(i) = j["acc"][static_cast<size_t>(i)].get<double>();
            frame.gyr(i) = j["gyr"][static_cast<size_t>(i)].get<double>();
        }
        varhhmm::clamp_to_sensor_range(frame);

        varhhmm::StepOutput step;
        try {
            step = state.step(spec, frame);
        } catch (const varhhmm::InvalidFrameError& e) {
            throw varhhmm::ParseError(source, lineno, e.what());
        }
        json rec;
        rec["t"] = frame.t;
        rec["label"] = step.label;
        for (long m = 0; m < step.movement_posterior.size(); ++m)
            rec["posterior"].push_back(step.movement_posterior(m));
        *out << rec.dump() << '\n';
        out->flush();
    }
}

struct SmtscArgs {
    std::string table;
    std::string out;
    double frame_period_ms = varhhmm::kDisplayFramePeriodMs;
};

void run_smtsc(const SmtscArgs& args) {
    varhhmm::SmtscResponseTable table = varhhmm::load_smtsc_csv(args.table);
    varhhmm::SmtscWindow window = varhhmm::smtsc_window(table, args.frame_period_ms);
    std::string text = varhhmm::smtsc_window_to_json(window);
    if (!args.out.empty()) varhhmm::write_file_atomic(args.out, text);
    std::cout << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online movement classification for IMU time series"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* cgen = app.add_subcommand("generate", "Sample a synthetic labeled recording");
    cgen->add_option("--model", gen.model_path, "Model JSON to sample from");
    cgen->add_option("--preset", gen.preset, "Built-in model preset (demo)");
    cgen->add_option("--out", gen.out, "Dataset CSV to write")->required();
    cgen->add_option("--events-out", gen.events_out, "Ground-truth events CSV");
    cgen->add_option("--n-events", gen.n_events, "Number of movement events");
    cgen->add_option("--rest-min", gen.rest_range.first, "Shortest rest gap, samples");
    cgen->add_option("--rest-max", gen.rest_range.second, "Longest rest gap, samples");
    cgen->add_option("--mov-min", gen.mov_range.first, "Shortest movement, samples");
    cgen->add_option("--mov-max", gen.mov_range.second, "Longest movement, samples");
    cgen->add_option("--noise-scale", gen.noise_scale, "Multiplier on segment covariances");
    auto* gen_seed = cgen->add_option("--seed", gen.seed, "RNG seed (default GESTUREHMM_SEED or 0)");
    cgen->add_option("--split-fraction", gen.split_fraction, "Write a train/test split at this fraction");
    cgen->add_option("--train-out", gen.train_out, "Train-half CSV");
    cgen->add_option("--test-out", gen.test_out, "Test-half CSV");
    cgen->callback([&] {
        gen.seed_given = gen_seed->count() > 0;
        run_generate(gen);
    });

    TrainArgs tr;
    auto* ctr = app.add_subcommand("train", "Fit a model to a labeled recording");
    ctr->add_option("--data", tr.data, "Labeled dataset CSV")->required();
    ctr->add_option("--out", tr.out, "Model JSON to write")->required();
    ctr->add_option("--report-out", tr.report_out, "Detailed training report JSON");
    ctr->add_option("--restarts", tr.restarts, "Random restarts per movement");
    ctr->add_option("--max-iters", tr.max_iters, "Iteration cap per restart");
    ctr->add_option("--ftol", tr.ftol, "Objective tolerance for convergence");
    ctr->add_option("--segments", tr.segments, "Segments per movement");
    ctr->add_option("--tau", tr.taus, "Lag-order candidates (repeatable)");
    ctr->add_option("--rho", tr.rho, "Movement self-transition probability");
    ctr->add_option("--threads", tr.threads, "Worker threads for restarts");
    auto* tr_seed = ctr->add_option("--seed", tr.seed, "RNG seed (default GESTUREHMM_SEED or 0)");
    ctr->callback([&] {
        tr.seed_given = tr_seed->count() > 0;
        run_train(tr);
    });

    ClassifyArgs cl;
    auto* ccl = app.add_subcommand("classify", "Label a recording with a chosen classifier");
    ccl->add_option("--classifier", cl.classifier, "var-hhmm, knn or ec")
        ->check(CLI::IsMember({"var-hhmm", "knn", "ec"}));
    ccl->add_option("--data", cl.data, "Dataset CSV to classify")->required();
    ccl->add_option("--model", cl.model_path, "Model JSON (var-hhmm)");
    ccl->add_option("--out", cl.out, "Labels CSV to write")->required();
    ccl->add_option("--posteriors-out", cl.posteriors_out, "Per-sample movement posteriors CSV (var-hhmm)");
    ccl->add_option("--events-out", cl.events_out, "Detected events CSV (ec)");
    ccl->add_option("--train-data", cl.train_data, "Labeled training CSV (knn)");
    ccl->add_option("--k", cl.k, "Neighbour count (knn)");
    ccl->add_option("--window", cl.window, "Frames per feature vector (knn)");
    ccl->add_option("--ec-upper-frac", cl.ec_upper_frac, "Upper threshold fraction of the axis maximum (ec)");
    ccl->add_option("--ec-lower-div", cl.ec_lower_div, "Upper/lower threshold ratio (ec)");
    ccl->add_option("--ec-label", cl.ec_label, "Label assigned to detected events (ec)");
    ccl->callback([&] { run_classify(cl); });

    EvaluateArgs ev;
    auto* cev = app.add_subcommand("evaluate", "Score predictions against ground truth");
    cev->add_option("--data", ev.data, "Labeled dataset CSV providing ground truth");
    cev->add_option("--true,--truth", ev.truth, "Ground-truth labels CSV");
    cev->add_option("--pred", ev.pred, "Predicted labels CSV")->required();
    cev->add_option("--events", ev.events, "Reference events CSV for lag analysis");
    cev->add_option("--out", ev.out, "Metrics JSON path, or a directory for the full report set");
    cev->add_option("--confusion-out", ev.confusion_out, "Confusion matrix CSV");
    cev->add_option("--lags-out", ev.lags_out, "Per-event lag CSV");
    cev->add_option("--blocks-out", ev.blocks_out, "Misclassified block lengths CSV");
    cev->add_option("--budget-out", ev.budget_out, "Latency budget JSON");
    cev->add_option("--window-high-ms", ev.window_high_ms, "Upper edge of the acceptable window");
    cev->callback([&] { run_evaluate(ev); });

    StreamArgs st;
    auto* cst = app.add_subcommand("stream", "Classify NDJSON frames line by line");
    cst->add_option("--model", st.model_path, "Model JSON")->required();
    cst->add_option("--in", st.in, "NDJSON input (default stdin)");
    cst->add_option("--out", st.out, "NDJSON output (default stdout)");
    cst->callback([&] { run_stream(st); });

    SmtscArgs sm;
    auto* csm = app.add_subcommand("smtsc", "Perceptual latency window from a response table");
    csm->add_option("--table", sm.table, "Response table CSV")->required();
    csm->add_option("--out", sm.out, "Window JSON to write");
    csm->add_option("--frame-period-ms", sm.frame_period_ms, "Display frame period");
    csm->callback([&] { run_smtsc(sm); });

    auto fail = [](const std::exception& e, int code) {
        std::cerr << "error: " << e.what() << '\n';
        return code;
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const varhhmm::TrainingError& e) {
        return fail(e, 2);
    } catch (const varhhmm::SingularCovarianceError& e) {
        return fail(e, 2);
    } catch (const varhhmm::Error& e) {
        return fail(e, 1);
    } catch (const std::exception& e) {
        return fail(e, 2);
    }
    return 0;
}
