#include "varhhmm/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace varhhmm {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("matrix must be a non-empty array of rows");
    const auto rows = j.size();
    const auto cols = j.front().size();
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw ParseError("ragged matrix rows");
        for (size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

Vec vec_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("vector must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace

json spec_to_json(const HhmmSpec& spec) {
    json j;
    j["version"] = kSchemaVersion;
    j["d"] = spec.d;
    j["tau"] = spec.tau;
    j["rho"] = spec.rho;
    json movs = json::array();
    for (const MovementModel& mov : spec.movements) {
        json jm;
        json segs = json::array();
        for (const VarModel& seg : mov.segments) {
            json js;
            js["mu"] = vec_to_json(seg.mu);
            json lags = json::array();
            for (const Mat& a : seg.lag_mats) lags.push_back(mat_to_json(a));
            js["A"] = std::move(lags);
            js["sigma"] = mat_to_json(seg.sigma);
            segs.push_back(std::move(js));
        }
        jm["segments"] = std::move(segs);
        jm["seg_trans"] = mat_to_json(mov.seg_trans);
        jm["seg_prior"] = vec_to_json(mov.seg_prior);
        movs.push_back(std::move(jm));
    }
    j["movements"] = std::move(movs);
    j["mov_trans"] = mat_to_json(spec.mov_trans);
    j["mov_prior"] = vec_to_json(spec.mov_prior);
    return j;
}

HhmmSpec spec_from_json(const json& j) {
    try {
        const int version = j.at("version").get<int>();
        if (version != kSchemaVersion)
            throw ParseError("unsupported model schema version " + std::to_string(version));
        HhmmSpec spec;
        spec.d = j.at("d").get<int>();
        spec.tau = j.at("tau").get<int>();
        spec.rho = j.at("rho").get<double>();
        for (const json& jm : j.at("movements")) {
            MovementModel mov;
            for (const json& js : jm.at("segments")) {
                VarModel seg;
                seg.mu = vec_from_json(js.at("mu"));
                for (const json& ja : js.at("A")) seg.lag_mats.push_back(mat_from_json(ja));
                seg.sigma = mat_from_json(js.at("sigma"));
                mov.segments.push_back(std::move(seg));
            }
            mov.seg_trans = mat_from_json(jm.at("seg_trans"));
            mov.seg_prior = vec_from_json(jm.at("seg_prior"));
            spec.movements.push_back(std::move(mov));
        }
        spec.mov_trans = mat_from_json(j.at("mov_trans"));
        spec.mov_prior = vec_from_json(j.at("mov_prior"));
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
    const fs::path tmp = dir / (target.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw ParseError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw ParseError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
    }
}

void save_spec(const HhmmSpec& spec, const std::string& path) {
    write_file_atomic(path, spec_to_json(spec).dump(2) + "\n");
}

HhmmSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("model JSON parse: " + std::string(e.what()));
    }
    HhmmSpec spec = spec_from_json(j);
    spec.validate();
    return spec;
}

}  // namespace varhhmm
