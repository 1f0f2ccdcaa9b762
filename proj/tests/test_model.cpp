#include <doctest.h>

#include <cstring>
#include <random>

#include "varhhmm/errors.hpp"
#include "varhhmm/gaussian.hpp"
#include "varhhmm/model.hpp"
#include "varhhmm/model_io.hpp"
#include "test_util.hpp"

using varhhmm::HhmmSpec;
using varhhmm::Mat;
using varhhmm::Vec;

TEST_CASE("build_movement_transition layout") {
    const double rho = 0.999;
    Mat t = varhhmm::build_movement_transition(rho, 4);
    REQUIRE(t.rows() == 4);
    REQUIRE(t.cols() == 4);
    CHECK(t(0, 0) == rho);
    for (int j = 1; j < 4; ++j) CHECK(t(0, j) == doctest::Approx((1.0 - rho) / 3.0).epsilon(1e-15));
    for (int i = 1; i < 4; ++i) {
        CHECK(t(i, i) == rho);
        CHECK(t(i, 0) == doctest::Approx(1.0 - rho).epsilon(1e-12));
        for (int j = 1; j < 4; ++j)
            if (j != i) CHECK(t(i, j) == 0.0);
    }
    for (int i = 0; i < 4; ++i) CHECK(t.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("build_movement_transition rejects degenerate arguments") {
    CHECK_THROWS_AS(varhhmm::build_movement_transition(0.999, 1), varhhmm::ParameterError);
    CHECK_THROWS_AS(varhhmm::build_movement_transition(0.0, 3), varhhmm::ParameterError);
    CHECK_THROWS_AS(varhhmm::build_movement_transition(1.0, 3), varhhmm::ParameterError);
}

TEST_CASE("validate accepts a random well-formed spec") {
    std::mt19937_64 rng(5);
    HhmmSpec spec = test_util::random_spec(rng, 3, 2, 2, 1);
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("validate rejects structural violations") {
    std::mt19937_64 rng(6);

    HhmmSpec bad_row = test_util::random_spec(rng, 2, 2, 2, 1);
    bad_row.mov_trans(0, 0) += 0.1;
    CHECK_THROWS_AS(bad_row.validate(), varhhmm::ParameterError);

    HhmmSpec neg = test_util::random_spec(rng, 2, 2, 2, 1);
    neg.movements[0].seg_prior(0) = -0.1;
    neg.movements[0].seg_prior(1) = 1.1;
    CHECK_THROWS_AS(neg.validate(), varhhmm::ParameterError);

    HhmmSpec asym = test_util::random_spec(rng, 2, 2, 2, 1);
    asym.movements[1].segments[0].sigma(0, 1) += 0.5;
    CHECK_THROWS_AS(asym.validate(), varhhmm::ParameterError);

    HhmmSpec indef = test_util::random_spec(rng, 2, 2, 2, 1);
    indef.movements[0].segments[1].sigma = -Mat::Identity(2, 2);
    CHECK_THROWS_AS(indef.validate(), varhhmm::ParameterError);

    HhmmSpec mixed_k = test_util::random_spec(rng, 2, 2, 2, 1);
    mixed_k.movements[1].segments.pop_back();
    CHECK_THROWS_AS(mixed_k.validate(), varhhmm::ParameterError);

    HhmmSpec wrong_tau = test_util::random_spec(rng, 2, 2, 2, 1);
    wrong_tau.movements[0].segments[0].lag_mats.push_back(Mat::Identity(2, 2));
    CHECK_THROWS_AS(wrong_tau.validate(), varhhmm::ParameterError);

    HhmmSpec wrong_d = test_util::random_spec(rng, 2, 2, 2, 1);
    wrong_d.movements[0].segments[0].mu = Vec::Zero(3);
    CHECK_THROWS_AS(wrong_d.validate(), varhhmm::ParameterError);
}

TEST_CASE("obs_log_likelihood agrees with per-entry density calls") {
    std::mt19937_64 rng(7);
    HhmmSpec spec = test_util::random_spec(rng, 3, 2, 2, 2);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec> history;
    for (int p = 0; p < 2; ++p)
        history.push_back(Vec::NullaryExpr(2, [&](Eigen::Index) { return g(rng); }));
    Vec y = Vec::NullaryExpr(2, [&](Eigen::Index) { return g(rng); });

    Mat ll = varhhmm::obs_log_likelihood(spec, history, y);
    REQUIRE(ll.rows() == 3);
    REQUIRE(ll.cols() == 2);
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 2; ++i) {
            const auto& seg = spec.movements[m].segments[i];
            Vec mean = seg.mu + seg.lag_mats[0] * history[0] + seg.lag_mats[1] * history[1];
            CHECK(ll(m, i) ==
                  doctest::Approx(varhhmm::gaussian_log_density(y, mean, seg.sigma)).epsilon(1e-14));
        }
}

TEST_CASE("var_predict needs tau lagged observations") {
    varhhmm::VarModel v;
    v.mu = Vec::Zero(2);
    v.lag_mats = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
    v.sigma = Mat::Identity(2, 2);
    std::vector<Vec> one = {Vec::Ones(2)};
    CHECK_THROWS_AS(varhhmm::var_predict(v, one), varhhmm::InsufficientHistoryError);
}

namespace {

bool mats_bitwise_equal(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

bool vecs_bitwise_equal(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("model JSON round-trips bit-exactly") {
    std::mt19937_64 rng(8);
    HhmmSpec spec = test_util::random_spec(rng, 3, 2, 2, 2);
    spec.rho = 0.12345678901234567;

    HhmmSpec back = varhhmm::spec_from_json(varhhmm::spec_to_json(spec));
    CHECK(back.d == spec.d);
    CHECK(back.tau == spec.tau);
    CHECK(back.rho == spec.rho);
    REQUIRE(back.n_movements() == spec.n_movements());
    CHECK(mats_bitwise_equal(back.mov_trans, spec.mov_trans));
    CHECK(vecs_bitwise_equal(back.mov_prior, spec.mov_prior));
    for (int m = 0; m < spec.n_movements(); ++m) {
        CHECK(mats_bitwise_equal(back.movements[m].seg_trans, spec.movements[m].seg_trans));
        CHECK(vecs_bitwise_equal(back.movements[m].seg_prior, spec.movements[m].seg_prior));
        for (int i = 0; i < spec.n_segments(); ++i) {
            const auto& sa = spec.movements[m].segments[i];
            const auto& sb = back.movements[m].segments[i];
            CHECK(vecs_bitwise_equal(sb.mu, sa.mu));
            CHECK(mats_bitwise_equal(sb.sigma, sa.sigma));
            REQUIRE(sb.lag_mats.size() == sa.lag_mats.size());
            for (size_t p = 0; p < sa.lag_mats.size(); ++p)
                CHECK(mats_bitwise_equal(sb.lag_mats[p], sa.lag_mats[p]));
        }
    }
}

TEST_CASE("model file save/load round-trips through disk") {
    test_util::TempDir dir("model-io");
    std::mt19937_64 rng(9);
    HhmmSpec spec = test_util::random_spec(rng, 2, 3, 2, 1);
    const std::string path = dir.file("m.json");
    varhhmm::save_spec(spec, path);
    HhmmSpec back = varhhmm::load_spec(path);
    CHECK(mats_bitwise_equal(back.mov_trans, spec.mov_trans));
    CHECK(vecs_bitwise_equal(back.movements[1].segments[2].mu, spec.movements[1].segments[2].mu));
}

TEST_CASE("model JSON rejects bad documents") {
    using nlohmann::json;
    std::mt19937_64 rng(10);
    HhmmSpec spec = test_util::random_spec(rng, 2, 2, 2, 1);

    json wrong_version = varhhmm::spec_to_json(spec);
    wrong_version["version"] = 999;
    CHECK_THROWS_AS(varhhmm::spec_from_json(wrong_version), varhhmm::ParseError);

    json missing = varhhmm::spec_to_json(spec);
    missing.erase("mov_trans");
    CHECK_THROWS_AS(varhhmm::spec_from_json(missing), varhhmm::ParseError);

    test_util::TempDir dir("model-io-bad");
    CHECK_THROWS_AS(varhhmm::load_spec(dir.file("absent.json")), varhhmm::ParseError);
}
