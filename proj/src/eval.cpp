#include "varhhmm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "varhhmm/errors.hpp"
#include "varhhmm/model_io.hpp"
#include "varhhmm/text.hpp"

namespace varhhmm {

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          int n_classes) {
    if (truth.size() != predicted.size())
        throw ParameterError("truth and prediction must have the same length");
    int k = n_classes;
    for (size_t t = 0; t < truth.size(); ++t) {
        if (truth[t] < 1 || predicted[t] < 1)
            throw ParameterError("labels must be 1-based positive movement indices");
        k = std::max({k, truth[t], predicted[t]});
    }
    if (k < 1) throw ParameterError("cannot build a confusion matrix without classes");
    ConfusionMatrix cm;
    cm.counts.setZero(k, k);
    for (size_t t = 0; t < truth.size(); ++t) cm.counts(truth[t] - 1, predicted[t] - 1) += 1;
    return cm;
}

PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
    const long k = cm.n_classes();
    PrecisionRecall pr;
    pr.precision = Vec::Zero(k);
    pr.recall = Vec::Zero(k);
    pr.precision_defined.assign(static_cast<size_t>(k), false);
    pr.recall_defined.assign(static_cast<size_t>(k), false);
    double psum = 0.0, rsum = 0.0;
    long pn = 0, rn = 0;
    for (long c = 0; c < k; ++c) {
        long col = cm.counts.col(c).sum();
        long row = cm.counts.row(c).sum();
        if (col > 0) {
            pr.precision(c) = static_cast<double>(cm.counts(c, c)) / static_cast<double>(col);
            pr.precision_defined[static_cast<size_t>(c)] = true;
            psum += pr.precision(c);
            ++pn;
        }
        if (row > 0) {
            pr.recall(c) = static_cast<double>(cm.counts(c, c)) / static_cast<double>(row);
            pr.recall_defined[static_cast<size_t>(c)] = true;
            rsum += pr.recall(c);
            ++rn;
        }
    }
    pr.macro_precision = pn > 0 ? psum / static_cast<double>(pn) : 0.0;
    pr.macro_recall = rn > 0 ? rsum / static_cast<double>(rn) : 0.0;
    long total = cm.total();
    pr.accuracy = total > 0 ? static_cast<double>(cm.counts.diagonal().sum()) / static_cast<double>(total) : 0.0;
    return pr;
}

std::vector<LagRecord> event_lags(std::span<const MovementEvent> reference,
                                  std::span<const int> predicted) {
    const long n = static_cast<long>(predicted.size());
    std::vector<LagRecord> out;
    out.reserve(reference.size());
    for (const auto& ev : reference) {
        LagRecord rec;
        rec.reference = ev;
        long lo = std::max(0l, ev.onset - kLagSearchBackSamples);
        long hi = std::min(n - 1, ev.end);
        for (long t = lo; t <= hi; ++t) {
            if (predicted[static_cast<size_t>(t)] == ev.movement_label) {
                rec.matched = true;
                rec.predicted_onset = t;
                long u = t;
                while (u + 1 < n && predicted[static_cast<size_t>(u + 1)] == ev.movement_label) ++u;
                rec.predicted_end = u;
                rec.onset_lag = rec.predicted_onset - ev.onset;
                rec.end_lag = rec.predicted_end - ev.end;
                break;
            }
        }
        out.push_back(rec);
    }
    return out;
}

std::vector<long> misclassified_blocks(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size())
        throw ParameterError("truth and prediction must have the same length");
    std::vector<long> blocks;
    long run = 0;
    for (size_t t = 0; t < truth.size(); ++t) {
        if (truth[t] != predicted[t]) {
            ++run;
        } else if (run > 0) {
            blocks.push_back(run);
            run = 0;
        }
    }
    if (run > 0) blocks.push_back(run);
    return blocks;
}

SmtscResponseTable load_smtsc_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::string line;
    size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    ++lineno;
    auto header = split_csv(line);
    if (header.size() != 4 || header[0] != "subject" || header[1] != "lag" ||
        header[2] != "response" || header[3] != "repetition")
        throw ParseError(path, 1, "expected header subject,lag,response,repetition");
    SmtscResponseTable table;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_ws(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 4) throw ParseError(path, lineno, "expected 4 fields");
        SmtscRow row;
        row.subject = static_cast<int>(parse_ll_field(f[0], path, lineno));
        row.lag = static_cast<int>(parse_ll_field(f[1], path, lineno));
        row.response = static_cast<int>(parse_ll_field(f[2], path, lineno));
        row.repetition = static_cast<int>(parse_ll_field(f[3], path, lineno));
        if (row.lag < -10 || row.lag > 40)
            throw ParseError(path, lineno, "lag must lie in [-10, 40] display frames");
        if (row.response != 0 && row.response != 1)
            throw ParseError(path, lineno, "response must be 0 or 1");
        if (row.repetition < 1 || row.repetition > 3)
            throw ParseError(path, lineno, "repetition must be 1, 2 or 3");
        table.rows.push_back(row);
    }
    return table;
}

void save_smtsc_csv(const SmtscResponseTable& table, const std::string& path) {
    std::ostringstream out;
    out << "subject,lag,response,repetition\n";
    for (const auto& r : table.rows)
        out << r.subject << ',' << r.lag << ',' << r.response << ',' << r.repetition << '\n';
    write_file_atomic(path, out.str());
}

SmtscWindow smtsc_window(const SmtscResponseTable& table, double frame_period_ms) {
    if (frame_period_ms <= 0.0) throw ParameterError("frame period must be positive");
    if (table.rows.empty()) throw ConfigError("the response table is empty");

    std::map<int, std::map<int, std::vector<int>>> by_subject;
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& r : table.rows) {
        if (!seen.insert({r.subject, r.lag, r.repetition}).second)
            throw ConfigError("duplicate response for subject " + std::to_string(r.subject) +
                              " lag " + std::to_string(r.lag) + " repetition " +
                              std::to_string(r.repetition));
        by_subject[r.subject][r.lag].push_back(r.response);
    }

    SmtscWindow win;
    win.frame_period_ms = frame_period_ms;
    std::map<int, long> positives;
    for (const auto& [subject, lags] : by_subject) {
        long inconsistent = 0;
        for (const auto& [lag, responses] : lags) {
            if (responses.size() != 3)
                throw ConfigError("subject " + std::to_string(subject) + " lag " +
                                  std::to_string(lag) + " needs exactly 3 repetitions");
            if (!(responses[0] == responses[1] && responses[1] == responses[2])) ++inconsistent;
        }
        if (2 * inconsistent > static_cast<long>(lags.size())) {
            win.excluded_subjects.push_back(subject);
            continue;
        }
        for (const auto& [lag, responses] : lags)
            positives[lag] += responses[0] + responses[1] + responses[2];
    }

    long total = 0;
    for (const auto& [lag, c] : positives) total += c;
    if (total == 0) throw ConfigError("no positive responses after subject exclusion");

    double mean = 0.0;
    for (const auto& [lag, c] : positives) mean += static_cast<double>(c) * lag;
    mean /= static_cast<double>(total);
    double var = 0.0;
    for (const auto& [lag, c] : positives)
        var += static_cast<double>(c) * (lag - mean) * (lag - mean);
    var /= static_cast<double>(total);

    win.mean_frames = mean;
    win.stddev_frames = std::sqrt(var);
    win.n_positive = total;
    win.window_low_ms = (mean - win.stddev_frames) * frame_period_ms;
    win.window_high_ms = (mean + win.stddev_frames) * frame_period_ms;
    return win;
}

std::vector<LatencyProfile> default_latency_profiles() {
    return {{"pc", 0.0}, {"ios", 8.0}, {"slow-android", 120.0}};
}

LatencyBudget latency_budget(std::span<const LagRecord> lags,
                             std::span<const LatencyProfile> profiles,
                             double window_high_ms, double ms_per_sample) {
    if (ms_per_sample <= 0.0) throw ParameterError("ms_per_sample must be positive");
    LatencyBudget budget;
    budget.window_high_ms = window_high_ms;
    budget.ms_per_sample = ms_per_sample;
    budget.n_events = static_cast<long>(lags.size());

    std::vector<double> lag_ms;
    for (const auto& rec : lags) {
        if (!rec.matched) {
            ++budget.n_unmatched;
            continue;
        }
        lag_ms.push_back(static_cast<double>(rec.onset_lag) * ms_per_sample);
    }

    auto delayed_at = [&](double hardware_ms) {
        long delayed = budget.n_unmatched;
        for (double l : lag_ms)
            if (l + hardware_ms > window_high_ms) ++delayed;
        return delayed;
    };

    for (const auto& p : profiles)
        budget.per_profile.push_back(
            {p.name, p.hardware_lag_ms, window_high_ms - p.hardware_lag_ms, delayed_at(p.hardware_lag_ms)});

    std::set<double> breakpoints{0.0};
    for (double l : lag_ms) {
        double hw = window_high_ms - l;
        if (hw >= 0.0) breakpoints.insert(hw);
    }
    for (double hw : breakpoints) budget.delayed_curve.emplace_back(hw, delayed_at(hw));
    return budget;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ParameterError("beta parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;

    auto cont_frac = [](double aa, double bb, double xx) {
        const double eps = 1e-15, tiny = 1e-300;
        double qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * xx / qap;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 300; ++m) {
            int m2 = 2 * m;
            double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < eps) break;
        }
        return h;
    };

    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * cont_frac(a, b, x) / a;
    return 1.0 - front * cont_frac(b, a, 1.0 - x) / b;
}

double variance_ratio_p_value(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw ParameterError("the variance test needs at least two values per sample");
    auto sample_var = [](std::span<const double> v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return ss / static_cast<double>(v.size() - 1);
    };
    double va = sample_var(a), vb = sample_var(b);
    if (va == 0.0 && vb == 0.0) return 1.0;
    if (vb == 0.0) return 0.0;
    double f = va / vb;
    double df1 = static_cast<double>(a.size()) - 1.0;
    double df2 = static_cast<double>(b.size()) - 1.0;
    double cdf = regularized_incomplete_beta(df1 / 2.0, df2 / 2.0, df1 * f / (df1 * f + df2));
    double p = 2.0 * std::min(cdf, 1.0 - cdf);
    return std::clamp(p, 0.0, 1.0);
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    out << "true\\pred";
    for (long c = 0; c < cm.n_classes(); ++c) out << ',' << (c + 1);
    out << '\n';
    for (long r = 0; r < cm.n_classes(); ++r) {
        out << (r + 1);
        for (long c = 0; c < cm.n_classes(); ++c) out << ',' << cm.counts(r, c);
        out << '\n';
    }
    return out.str();
}

std::string metrics_to_json(const ConfusionMatrix& cm, const PrecisionRecall& pr) {
    nlohmann::json j;
    j["n_classes"] = cm.n_classes();
    j["total"] = cm.total();
    j["accuracy"] = pr.accuracy;
    j["macro_precision"] = pr.macro_precision;
    j["macro_recall"] = pr.macro_recall;
    auto mat = nlohmann::json::array();
    for (long r = 0; r < cm.n_classes(); ++r) {
        auto row = nlohmann::json::array();
        for (long c = 0; c < cm.n_classes(); ++c) row.push_back(cm.counts(r, c));
        mat.push_back(row);
    }
    j["confusion"] = mat;
    for (long c = 0; c < cm.n_classes(); ++c) {
        j["precision"].push_back(pr.precision(c));
        j["recall"].push_back(pr.recall(c));
        j["precision_defined"].push_back(static_cast<bool>(pr.precision_defined[static_cast<size_t>(c)]));
        j["recall_defined"].push_back(static_cast<bool>(pr.recall_defined[static_cast<size_t>(c)]));
    }
    return j.dump(2);
}

std::string lags_to_csv(std::span<const LagRecord> lags) {
    std::ostringstream out;
    out << "onset,end,label,matched,pred_onset,pred_end,onset_lag,end_lag\n";
    for (const auto& rec : lags) {
        out << rec.reference.onset << ',' << rec.reference.end << ',' << rec.reference.movement_label
            << ',' << (rec.matched ? 1 : 0) << ',';
        if (rec.matched)
            out << rec.predicted_onset << ',' << rec.predicted_end << ',' << rec.onset_lag << ','
                << rec.end_lag;
        else
            out << ",,,";
        out << '\n';
    }
    return out.str();
}

std::string blocks_to_csv(std::span<const long> blocks) {
    std::ostringstream out;
    out << "block,length\n";
    for (size_t i = 0; i < blocks.size(); ++i) out << i << ',' << blocks[i] << '\n';
    return out.str();
}

std::string latency_budget_to_json(const LatencyBudget& budget) {
    nlohmann::json j;
    j["window_high_ms"] = budget.window_high_ms;
    j["ms_per_sample"] = budget.ms_per_sample;
    j["n_events"] = budget.n_events;
    j["n_unmatched"] = budget.n_unmatched;
    j["profiles"] = nlohmann::json::array();
    for (const auto& p : budget.per_profile)
        j["profiles"].push_back({{"name", p.name},
                                 {"hardware_lag_ms", p.hardware_lag_ms},
                                 {"residual_allowance_ms", p.residual_allowance_ms},
                                 {"delayed", p.delayed}});
    j["delayed_curve"] = nlohmann::json::array();
    for (const auto& [hw, count] : budget.delayed_curve)
        j["delayed_curve"].push_back({{"hardware_lag_ms", hw}, {"delayed", count}});
    return j.dump(2);
}

std::string histogram_to_csv(std::span<const double> values, double bin_width) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
        throw ParameterError("histogram bin width must be positive and finite");
    std::ostringstream out;
    out << "bin,count\n";
    if (values.empty()) return out.str();
    std::map<long, long> counts;
    for (double v : values) {
        if (!std::isfinite(v)) throw ParameterError("histogram values must be finite");
        counts[static_cast<long>(std::floor(v / bin_width))] += 1;
    }
    const long lo = counts.begin()->first;
    const long hi = counts.rbegin()->first;
    for (long k = lo; k <= hi; ++k) {
        auto it = counts.find(k);
        const long c = it == counts.end() ? 0 : it->second;
        out << fmt_g17(static_cast<double>(k) * bin_width) << ',' << c << '\n';
    }
    return out.str();
}

std::string delayed_curve_to_csv(const LatencyBudget& budget) {
    std::ostringstream out;
    out << "hardware_lag_ms,delayed\n";
    for (const auto& [hw, count] : budget.delayed_curve)
        out << fmt_g17(hw) << ',' << count << '\n';
    return out.str();
}

std::string smtsc_window_to_json(const SmtscWindow& window) {
    nlohmann::json j;
    j["mean_frames"] = window.mean_frames;
    j["stddev_frames"] = window.stddev_frames;
    j["n_positive"] = window.n_positive;
    j["frame_period_ms"] = window.frame_period_ms;
    j["window_low_ms"] = window.window_low_ms;
    j["window_high_ms"] = window.window_high_ms;
    j["excluded_subjects"] = window.excluded_subjects;
    return j.dump(2);
}

}  // namespace varhhmm
