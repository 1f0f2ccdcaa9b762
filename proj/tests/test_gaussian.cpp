#include <doctest.h>

#include <cmath>
#include <random>

#include "varhhmm/errors.hpp"
#include "varhhmm/gaussian.hpp"
#include "test_util.hpp"

using varhhmm::kNegInf;
using varhhmm::Mat;
using varhhmm::Vec;

TEST_CASE("log_sum_exp on scalars") {
    CHECK(varhhmm::log_sum_exp(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(varhhmm::log_sum_exp(kNegInf, 1.5) == 1.5);
    CHECK(varhhmm::log_sum_exp(-2.0, kNegInf) == -2.0);
    CHECK(varhhmm::log_sum_exp(kNegInf, kNegInf) == kNegInf);
    // extreme spread must not overflow
    CHECK(varhhmm::log_sum_exp(1000.0, -1000.0) == doctest::Approx(1000.0));
}

TEST_CASE("log_sum_exp on vectors") {
    Vec v(3);
    v << std::log(1.0), std::log(2.0), std::log(4.0);
    CHECK(varhhmm::log_sum_exp(v) == doctest::Approx(std::log(7.0)).epsilon(1e-14));

    Vec inf3 = Vec::Constant(3, kNegInf);
    CHECK(varhhmm::log_sum_exp(inf3) == kNegInf);

    Vec mixed(3);
    mixed << kNegInf, 0.0, kNegInf;
    CHECK(varhhmm::log_sum_exp(mixed) == doctest::Approx(0.0));
}

TEST_CASE("safe_log maps zero to -inf") {
    CHECK(varhhmm::safe_log(0.0) == kNegInf);
    CHECK(varhhmm::safe_log(2.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("gaussian log density matches the 1-D closed form") {
    Vec x(1), mu(1);
    Mat sigma(1, 1);
    x << 2.0;
    mu << 0.5;
    sigma << 0.09;
    const double expected =
        -0.5 * (std::log(2.0 * M_PI) + std::log(0.09) + (1.5 * 1.5) / 0.09);
    CHECK(varhhmm::gaussian_log_density(x, mu, sigma) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian log density matches an inverse/determinant oracle") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int d = 1; d <= 6; ++d) {
        for (int rep = 0; rep < 10; ++rep) {
            Mat sigma = test_util::random_spd(rng, d);
            Vec mu(d), x(d);
            for (int i = 0; i < d; ++i) {
                mu(i) = g(rng);
                x(i) = g(rng);
            }
            const Vec r = x - mu;
            const double oracle = -0.5 * (d * std::log(2.0 * M_PI) +
                                          std::log(sigma.determinant()) +
                                          r.dot(sigma.inverse() * r));
            CHECK(varhhmm::gaussian_log_density(x, mu, sigma) ==
                  doctest::Approx(oracle).epsilon(1e-10));
        }
    }
}

TEST_CASE("singular covariance regularizes once, zero covariance throws") {
    Vec x(2), mu(2);
    x << 1.0, 2.0;
    mu << 0.0, 0.0;

    // exactly rank-1: the retry with eps*I must make it finite
    Mat rank1(2, 2);
    rank1 << 1.0, 1.0, 1.0, 1.0;
    const double v = varhhmm::gaussian_log_density(x, mu, rank1);
    CHECK(std::isfinite(v));

    // the regularized value should match the dense oracle of sigma + eps*I
    Mat reg = rank1;
    reg.diagonal().array() += 1e-8 * rank1.trace() / 2.0;
    const Vec r = x - mu;
    // near-singular solve vs explicit inverse differ by ~cond * machine eps,
    // so the comparison is looser than for well-conditioned inputs
    const double oracle = -0.5 * (2.0 * std::log(2.0 * M_PI) + std::log(reg.determinant()) +
                                  r.dot(reg.inverse() * r));
    CHECK(v == doctest::Approx(oracle).epsilon(1e-6));

    // zero trace leaves nothing to regularize with
    Mat zero = Mat::Zero(2, 2);
    CHECK_THROWS_AS(varhhmm::gaussian_log_density(x, mu, zero), varhhmm::SingularCovarianceError);
}
