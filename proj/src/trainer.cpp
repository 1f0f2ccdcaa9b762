#include "varhhmm/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>

#include <Eigen/QR>

#include "varhhmm/errors.hpp"
#include "varhhmm/gaussian.hpp"

namespace varhhmm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Regression view of one sequence: row t of X is [1, y_{t+tau-1}, ..., y_t]
// seen from target y_{t+tau}, i.e. regressors ordered most recent first.
struct Design {
    Mat X;  // (len - tau) x (1 + tau d)
    Mat Y;  // (len - tau) x d
};

Design make_design(const Sequence& seq, int tau) {
    const long len = static_cast<long>(seq.size());
    const int d = static_cast<int>(seq[0].size());
    const long n = len - tau;
    Design ds;
    ds.X = Mat::Zero(n, 1 + tau * d);
    ds.Y = Mat::Zero(n, d);
    for (long t = 0; t < n; ++t) {
        ds.X(t, 0) = 1.0;
        for (int p = 0; p < tau; ++p)
            ds.X.row(t).segment(1 + p * d, d) = seq[static_cast<size_t>(t + tau - 1 - p)].transpose();
        ds.Y.row(t) = seq[static_cast<size_t>(t + tau)].transpose();
    }
    return ds;
}

// Stacked coefficients so that predictions = X * C.
Mat coef_matrix(const VarModel& vm) {
    const int d = vm.dim();
    const int tau = vm.lag_order();
    Mat c(1 + tau * d, d);
    c.row(0) = vm.mu.transpose();
    for (int p = 0; p < tau; ++p) c.middleRows(1 + p * d, d) = vm.lag_mats[static_cast<size_t>(p)].transpose();
    return c;
}

// Per-target log density under each segment, (len - tau) x K.
Mat emission_matrix(const Design& ds, const MovementModel& model) {
    const long n = ds.Y.rows();
    const int d = static_cast<int>(ds.Y.cols());
    const int k = model.n_segments();
    Mat out(n, k);
    for (int i = 0; i < k; ++i) {
        const VarModel& vm = model.segments[static_cast<size_t>(i)];
        Eigen::LLT<Mat> llt(vm.sigma);
        if (llt.info() != Eigen::Success)
            throw SingularCovarianceError("segment covariance is not positive definite");
        double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
        Mat resid = ds.Y - ds.X * coef_matrix(vm);
        Mat w = llt.matrixL().solve(resid.transpose());
        Vec q = w.colwise().squaredNorm().transpose();
        out.col(i) = (-0.5 * (q.array() + d * kLogTwoPi + logdet)).matrix();
    }
    return out;
}

void check_model_matches(const MovementModel& model, int d, int tau) {
    if (model.segments.empty()) throw ParameterError("movement model has no segments");
    if (model.segments[0].dim() != d)
        throw ParameterError("model dimension does not match the data");
    if (model.segments[0].lag_order() != tau)
        throw ParameterError("model lag order does not match tau");
}

void check_data(std::span<const Sequence> data, int tau) {
    if (tau < 1) throw ParameterError("lag order must be >= 1");
    if (data.empty()) throw ParameterError("training data must contain at least one sequence");
    const int d = data[0].empty() ? 0 : static_cast<int>(data[0][0].size());
    for (const auto& seq : data) {
        if (static_cast<long>(seq.size()) <= tau)
            throw ParameterError("every training sequence must be longer than the lag order");
        for (const auto& y : seq)
            if (static_cast<int>(y.size()) != d)
                throw ParameterError("all training frames must share one dimension");
    }
}

struct PathCounts {
    Mat trans;   // K x K transition counts
    Vec initial; // K initial counts
    std::vector<long> occupancy;
};

PathCounts count_paths(const std::vector<std::vector<int>>& paths, int k) {
    PathCounts pc{Mat::Zero(k, k), Vec::Zero(k), std::vector<long>(static_cast<size_t>(k), 0)};
    for (const auto& path : paths) {
        for (int v : path)
            if (v < 0 || v >= k) throw ParameterError("segment path entry out of range");
        if (path.empty()) continue;
        pc.initial(path[0]) += 1.0;
        ++pc.occupancy[static_cast<size_t>(path[0])];
        for (size_t t = 1; t < path.size(); ++t) {
            pc.trans(path[t - 1], path[t]) += 1.0;
            ++pc.occupancy[static_cast<size_t>(path[t])];
        }
    }
    return pc;
}

VarModel random_segment(int d, int tau, std::mt19937_64& rng) {
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    VarModel vm;
    vm.mu = Vec(d);
    for (int j = 0; j < d; ++j) vm.mu(j) = stdnorm(rng);
    vm.lag_mats.resize(static_cast<size_t>(tau));
    for (int p = 0; p < tau; ++p) {
        Mat a(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) a(r, c) = stdnorm(rng);
        vm.lag_mats[static_cast<size_t>(p)] = a;
    }
    vm.sigma = Mat::Identity(d, d);
    return vm;
}

MovementModel random_movement(int k, int d, int tau, std::mt19937_64& rng) {
    MovementModel mm;
    for (int i = 0; i < k; ++i) mm.segments.push_back(random_segment(d, tau, rng));
    mm.seg_trans = Mat::Constant(k, k, 1.0 / k);
    mm.seg_prior = Vec::Constant(k, 1.0 / k);
    return mm;
}

struct RestartOutcome {
    MovementModel model;
    double objective = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::vector<double> trace;
};

}  // namespace

std::vector<std::vector<int>> viterbi_segment(std::span<const Sequence> data,
                                              const MovementModel& model, int tau) {
    check_data(data, tau);
    check_model_matches(model, static_cast<int>(data[0][0].size()), tau);
    const int k = model.n_segments();
    Mat log_trans = model.seg_trans.array().max(0.0).log().matrix();
    Vec log_prior = model.seg_prior.array().max(0.0).log().matrix();

    std::vector<std::vector<int>> paths;
    paths.reserve(data.size());
    for (const auto& seq : data) {
        Design ds = make_design(seq, tau);
        Mat emis = emission_matrix(ds, model);
        const long n = emis.rows();
        Mat delta(n, k);
        Eigen::MatrixXi back(n, k);
        delta.row(0) = emis.row(0) + log_prior.transpose();
        back.row(0).setZero();
        for (long t = 1; t < n; ++t) {
            for (int i = 0; i < k; ++i) {
                double best = kNegInf;
                int arg = 0;
                for (int j = 0; j < k; ++j) {
                    double cand = delta(t - 1, j) + log_trans(j, i);
                    if (cand > best) {
                        best = cand;
                        arg = j;
                    }
                }
                delta(t, i) = best + emis(t, i);
                back(t, i) = arg;
            }
        }
        std::vector<int> path(static_cast<size_t>(n));
        int cur = 0;
        double best = delta(n - 1, 0);
        for (int i = 1; i < k; ++i)
            if (delta(n - 1, i) > best) {
                best = delta(n - 1, i);
                cur = i;
            }
        for (long t = n - 1; t >= 0; --t) {
            path[static_cast<size_t>(t)] = cur;
            if (t > 0) cur = back(t, cur);
        }
        paths.push_back(std::move(path));
    }
    return paths;
}

MovementModel m_step(std::span<const Sequence> data,
                     const std::vector<std::vector<int>>& paths, int k_segments, int tau,
                     std::mt19937_64& rng, const MovementModel* previous) {
    check_data(data, tau);
    if (k_segments < 1) throw ParameterError("k_segments must be >= 1");
    if (paths.size() != data.size()) throw ParameterError("one segment path per sequence required");
    const int d = static_cast<int>(data[0][0].size());
    const int min_fit = d * (tau + 1) + 1;

    std::vector<Design> designs;
    designs.reserve(data.size());
    for (const auto& seq : data) designs.push_back(make_design(seq, tau));
    for (size_t s = 0; s < data.size(); ++s)
        if (static_cast<long>(paths[s].size()) != designs[s].Y.rows())
            throw ParameterError("segment path length must equal sequence length minus tau");

    PathCounts pc = count_paths(paths, k_segments);

    MovementModel out;
    for (int i = 0; i < k_segments; ++i) {
        long n_i = pc.occupancy[static_cast<size_t>(i)];
        if (n_i == 0) {
            out.segments.push_back(random_segment(d, tau, rng));
            continue;
        }
        if (n_i < min_fit) {
            if (previous)
                out.segments.push_back(previous->segments[static_cast<size_t>(i)]);
            else
                out.segments.push_back(random_segment(d, tau, rng));
            continue;
        }
        Mat xi(n_i, 1 + tau * d), yi(n_i, d);
        long r = 0;
        for (size_t s = 0; s < data.size(); ++s)
            for (size_t t = 0; t < paths[s].size(); ++t)
                if (paths[s][t] == i) {
                    xi.row(r) = designs[s].X.row(static_cast<long>(t));
                    yi.row(r) = designs[s].Y.row(static_cast<long>(t));
                    ++r;
                }
        Mat coef = xi.colPivHouseholderQr().solve(yi);
        Mat resid = yi - xi * coef;
        Mat sigma = resid.transpose() * resid / static_cast<double>(n_i);
        sigma = 0.5 * (sigma + sigma.transpose());
        if (Eigen::LLT<Mat>(sigma).info() != Eigen::Success)
            sigma += (1e-8 * sigma.trace() / d + 1e-12) * Mat::Identity(d, d);

        VarModel vm;
        vm.mu = coef.row(0).transpose();
        for (int p = 0; p < tau; ++p) vm.lag_mats.push_back(coef.middleRows(1 + p * d, d).transpose());
        vm.sigma = sigma;
        out.segments.push_back(std::move(vm));
    }

    const double s = 1.0 / k_segments;
    out.seg_trans = Mat(k_segments, k_segments);
    for (int i = 0; i < k_segments; ++i) {
        Vec row = (pc.trans.row(i).transpose().array() + s).matrix();
        out.seg_trans.row(i) = (row / row.sum()).transpose();
    }
    Vec init = (pc.initial.array() + s).matrix();
    out.seg_prior = init / init.sum();
    return out;
}

double training_objective(std::span<const Sequence> data,
                          const std::vector<std::vector<int>>& paths,
                          const MovementModel& model, int tau) {
    check_data(data, tau);
    check_model_matches(model, static_cast<int>(data[0][0].size()), tau);
    const int k = model.n_segments();
    double obj = 0.0;
    for (size_t s = 0; s < data.size(); ++s) {
        Design ds = make_design(data[s], tau);
        Mat emis = emission_matrix(ds, model);
        if (static_cast<long>(paths[s].size()) != emis.rows())
            throw ParameterError("segment path length must equal sequence length minus tau");
        for (size_t t = 0; t < paths[s].size(); ++t)
            obj += emis(static_cast<long>(t), paths[s][t]);
    }
    PathCounts pc = count_paths(paths, k);
    const double sm = 1.0 / k;
    for (int i = 0; i < k; ++i) {
        obj += (pc.initial(i) + sm) * safe_log(model.seg_prior(i));
        for (int j = 0; j < k; ++j)
            obj += (pc.trans(i, j) + sm) * safe_log(model.seg_trans(i, j));
    }
    return obj;
}

namespace {

RestartOutcome run_restart(std::span<const Sequence> data, const TrainConfig& config, int tau,
                           std::uint64_t restart_seed) {
    std::mt19937_64 rng(restart_seed);
    const int d = static_cast<int>(data[0][0].size());
    RestartOutcome out;
    out.model = random_movement(config.k_segments, d, tau, rng);

    std::vector<std::vector<int>> prev_path;
    double prev_obj = kNegInf;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        auto path = viterbi_segment(data, out.model, tau);
        out.model = m_step(data, path, config.k_segments, tau, rng, &out.model);
        double obj = training_objective(data, path, out.model, tau);
        out.trace.push_back(obj);
        out.iterations = iter + 1;
        bool path_stable = !prev_path.empty() && path == prev_path;
        bool obj_stable = iter > 0 && std::abs(obj - prev_obj) < config.ftol;
        out.objective = obj;
        if (path_stable || obj_stable) break;
        prev_path = std::move(path);
        prev_obj = obj;
    }
    return out;
}

}  // namespace

std::pair<MovementModel, TrainReport> viterbi_em(std::span<const Sequence> data,
                                                 const TrainConfig& config, int tau) {
    check_data(data, tau);
    if (config.n_restarts < 1) throw ParameterError("n_restarts must be >= 1");
    if (config.max_iters < 1) throw ParameterError("max_iters must be >= 1");

    std::vector<RestartOutcome> outcomes(static_cast<size_t>(config.n_restarts));
    auto seed_for = [&](int r) { return splitmix64(config.seed + static_cast<std::uint64_t>(r)); };

    if (config.n_threads <= 1) {
        for (int r = 0; r < config.n_restarts; ++r)
            outcomes[static_cast<size_t>(r)] = run_restart(data, config, tau, seed_for(r));
    } else {
        std::vector<std::future<void>> futs;
        std::atomic<int> next{0};
        for (int w = 0; w < config.n_threads; ++w)
            futs.push_back(std::async(std::launch::async, [&] {
                for (int r = next.fetch_add(1); r < config.n_restarts; r = next.fetch_add(1))
                    outcomes[static_cast<size_t>(r)] = run_restart(data, config, tau, seed_for(r));
            }));
        for (auto& f : futs) f.get();
    }

    TrainReport report;
    int best = -1;
    for (int r = 0; r < config.n_restarts; ++r) {
        const auto& oc = outcomes[static_cast<size_t>(r)];
        report.per_restart_objectives.push_back(oc.objective);
        report.iterations_used.push_back(oc.iterations);
        report.objective_traces.push_back(oc.trace);
        if (std::isnan(oc.objective)) continue;
        if (best < 0 || oc.objective > outcomes[static_cast<size_t>(best)].objective) best = r;
    }
    if (best < 0) throw TrainingError("all restarts diverged");
    report.best_restart = best;
    report.best_objective = outcomes[static_cast<size_t>(best)].objective;
    return {std::move(outcomes[static_cast<size_t>(best)].model), std::move(report)};
}

double bic_score(double objective, int k_segments, int d, int tau, long n_targets) {
    if (n_targets < 1) throw ParameterError("BIC needs at least one regression target");
    double params = k_segments * (d + static_cast<double>(tau) * d * d + d * (d + 1) / 2.0) +
                    static_cast<double>(k_segments) * k_segments + k_segments;
    return objective - 0.5 * params * std::log(static_cast<double>(n_targets));
}

LagSelection select_lag_bic(std::span<const Sequence> data, const TrainConfig& config) {
    if (config.tau_candidates.empty()) throw ParameterError("tau_candidates must not be empty");
    std::vector<int> taus = config.tau_candidates;
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    LagSelection sel;
    bool have = false;
    const int d = data.empty() || data[0].empty() ? 0 : static_cast<int>(data[0][0].size());
    for (int tau : taus) {
        std::vector<Sequence> usable;
        long n_targets = 0;
        for (const auto& seq : data)
            if (static_cast<long>(seq.size()) > tau) {
                usable.push_back(seq);
                n_targets += static_cast<long>(seq.size()) - tau;
            }
        if (usable.empty()) {
            std::fprintf(stderr, "warning: no sequence is longer than lag %d, skipping\n", tau);
            continue;
        }
        auto [model, report] = viterbi_em(usable, config, tau);
        double bic = bic_score(report.best_objective, config.k_segments, d, tau, n_targets);
        sel.bic_by_tau[tau] = bic;
        if (!have || bic > sel.bic_by_tau[sel.tau]) {
            have = true;
            sel.tau = tau;
            sel.model = std::move(model);
            sel.report = std::move(report);
        }
    }
    if (!have) throw TrainingError("no usable lag candidate");
    return sel;
}

std::vector<std::vector<Sequence>> runs_by_movement(const Dataset& dataset, int n_movements,
                                                    long min_len, long* skipped) {
    std::vector<std::vector<Sequence>> runs(static_cast<size_t>(n_movements));
    if (skipped) *skipped = 0;
    if (!dataset.labels) throw ConfigError("training needs per-sample movement labels");
    const auto& labels = *dataset.labels;
    const long n = dataset.n_samples();
    long start = 0;
    for (long t = 1; t <= n; ++t) {
        if (t == n || labels[static_cast<size_t>(t)] != labels[static_cast<size_t>(start)]) {
            int movement = labels[static_cast<size_t>(start)] - 1;
            if (movement >= n_movements)
                throw ParameterError("label exceeds the movement count");
            long len = t - start;
            if (len >= min_len) {
                Sequence seq;
                seq.reserve(static_cast<size_t>(len));
                for (long r = start; r < t; ++r) seq.push_back(dataset.frames[static_cast<size_t>(r)].vec());
                runs[static_cast<size_t>(movement)].push_back(std::move(seq));
            } else if (skipped) {
                ++(*skipped);
            }
            start = t;
        }
    }
    return runs;
}

FullTrainResult train_full_spec(const Dataset& dataset, const TrainConfig& config) {
    if (!dataset.labels) throw ConfigError("training needs per-sample movement labels");
    dataset.validate();
    if (dataset.frames.empty()) throw ParameterError("training data is empty");
    int n_mov = 0;
    for (int lab : *dataset.labels) n_mov = std::max(n_mov, lab);

    auto runs = runs_by_movement(dataset, n_mov, 1, nullptr);
    for (int m = 0; m < n_mov; ++m)
        if (runs[static_cast<size_t>(m)].empty())
            throw TrainingError("movement " + std::to_string(m + 1) + " has no labeled samples");

    std::vector<int> taus = config.tau_candidates;
    if (taus.empty()) throw ParameterError("tau_candidates must not be empty");
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    FullTrainResult result;
    bool have = false;
    for (int tau : taus) {
        std::vector<MovementModel> models;
        std::vector<TrainReport> reports;
        double total_bic = 0.0;
        long skipped = 0;
        bool feasible = true;
        for (int m = 0; m < n_mov && feasible; ++m) {
            std::vector<Sequence> usable;
            long n_targets = 0;
            for (const auto& seq : runs[static_cast<size_t>(m)]) {
                if (static_cast<long>(seq.size()) > tau) {
                    usable.push_back(seq);
                    n_targets += static_cast<long>(seq.size()) - tau;
                } else {
                    ++skipped;
                }
            }
            if (usable.empty()) {
                feasible = false;
                break;
            }
            auto [model, report] = viterbi_em(usable, config, tau);
            total_bic += bic_score(report.best_objective, config.k_segments,
                                   static_cast<int>(dataset.frames[0].vec().size()), tau, n_targets);
            models.push_back(std::move(model));
            reports.push_back(std::move(report));
        }
        if (!feasible) {
            std::fprintf(stderr, "warning: lag %d leaves some movement without usable runs, skipping\n", tau);
            continue;
        }
        result.bic_totals[tau] = total_bic;
        if (!have || total_bic > result.bic_totals[result.chosen_tau]) {
            have = true;
            result.chosen_tau = tau;
            result.reports = std::move(reports);
            result.skipped_runs = skipped;
            result.spec.movements = std::move(models);
        }
    }
    if (!have) throw TrainingError("no usable lag candidate for the labeled runs");

    result.spec.tau = result.chosen_tau;
    result.spec.d = static_cast<int>(dataset.frames[0].vec().size());
    result.spec.rho = config.rho;
    result.spec.mov_trans = n_mov >= 2 ? build_movement_transition(config.rho, n_mov)
                                       : Mat::Ones(1, 1);
    result.spec.mov_prior = Vec::Zero(n_mov);
    result.spec.mov_prior(0) = 1.0;
    result.spec.validate();
    return result;
}

}  // namespace varhhmm
