#pragma once

#include <cmath>
#include <limits>

#include "varhhmm/errors.hpp"
#include "varhhmm/types.hpp"

namespace varhhmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// log(exp(a) + exp(b)) with max-subtraction; handles -inf operands.
inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// log sum_i exp(v_i) over any Eigen expression; -inf for an all -inf input.
/// exp(-inf - m) underflows to exactly 0, so -inf entries drop out on their own.
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
    const double m = v.maxCoeff();
    if (m == kNegInf) return kNegInf;
    return m + std::log((v.derived().array() - m).exp().sum());
}

/// log of a zero-probability entry; keeps structural zeros at -inf.
inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

namespace detail {

template <typename DX, typename DM, typename DS>
double gaussian_log_density_chol(const Eigen::MatrixBase<DX>& x,
                                 const Eigen::MatrixBase<DM>& mean,
                                 const Eigen::MatrixBase<DS>& sigma,
                                 bool* ok) {
    const Eigen::Index d = x.size();
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success) {
        *ok = false;
        return 0.0;
    }
    *ok = true;
    const Mat& l = llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(l(i, i));
    log_det *= 2.0;
    Vec z = llt.matrixL().solve(x - mean);
    return -0.5 * (static_cast<double>(d) * kLogTwoPi + log_det + z.squaredNorm());
}

}  // namespace detail

/// log N(x; mean, sigma) via Cholesky. If the factorization fails, retries
/// once with sigma + eps*I, eps = 1e-8 * trace(sigma)/d, then throws.
template <typename DX, typename DM, typename DS>
double gaussian_log_density(const Eigen::MatrixBase<DX>& x,
                            const Eigen::MatrixBase<DM>& mean,
                            const Eigen::MatrixBase<DS>& sigma) {
    bool ok = false;
    double v = detail::gaussian_log_density_chol(x, mean, sigma, &ok);
    if (ok) return v;
    const Eigen::Index d = x.size();
    const double eps = 1e-8 * sigma.trace() / static_cast<double>(d);
    Mat reg = sigma;
    reg.diagonal().array() += eps;
    v = detail::gaussian_log_density_chol(x, mean, reg, &ok);
    if (ok) return v;
    throw SingularCovarianceError("covariance is not positive-definite after regularization");
}

}  // namespace varhhmm
