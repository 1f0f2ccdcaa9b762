#include "varhhmm/model.hpp"

#include <cmath>
#include <string>

#include "varhhmm/gaussian.hpp"

namespace varhhmm {

namespace {

void check_stochastic_rows(const Mat& m, double tol, const std::string& what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (m.row(i).minCoeff() < 0.0)
            throw ParameterError(what + ": negative entry in row " + std::to_string(i));
        if (std::abs(m.row(i).sum() - 1.0) > tol)
            throw ParameterError(what + ": row " + std::to_string(i) + " sums to " +
                                 std::to_string(m.row(i).sum()));
    }
}

void check_distribution(const Vec& p, double tol, const std::string& what) {
    if (p.minCoeff() < 0.0) throw ParameterError(what + ": negative entry");
    if (std::abs(p.sum() - 1.0) > tol)
        throw ParameterError(what + ": sums to " + std::to_string(p.sum()));
}

void check_covariance(const Mat& sigma, const std::string& what) {
    if (sigma.rows() != sigma.cols()) throw ParameterError(what + ": covariance not square");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ParameterError(what + ": covariance not symmetric within 1e-12");
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw ParameterError(what + ": covariance not positive-definite");
}

}  // namespace

void HhmmSpec::validate() const {
    const int n = n_movements();
    if (n < 1) throw ParameterError("spec: no movements");
    if (tau < 1) throw ParameterError("spec: tau must be >= 1");
    if (d < 1) throw ParameterError("spec: d must be >= 1");
    if (mov_trans.rows() != n || mov_trans.cols() != n)
        throw ParameterError("spec: mov_trans must be " + std::to_string(n) + "x" + std::to_string(n));
    if (mov_prior.size() != n) throw ParameterError("spec: mov_prior size mismatch");
    check_stochastic_rows(mov_trans, 1e-10, "mov_trans");
    check_distribution(mov_prior, 1e-10, "mov_prior");
    for (int m = 0; m < n; ++m) {
        const MovementModel& mov = movements[static_cast<size_t>(m)];
        const std::string tag = "movement " + std::to_string(m + 1);
        const int k = mov.n_segments();
        if (k < 1) throw ParameterError(tag + ": no segments");
        if (k != n_segments()) throw ParameterError(tag + ": all movements must share the segment count");
        if (mov.seg_trans.rows() != k || mov.seg_trans.cols() != k)
            throw ParameterError(tag + ": seg_trans must be " + std::to_string(k) + "x" + std::to_string(k));
        if (mov.seg_prior.size() != k) throw ParameterError(tag + ": seg_prior size mismatch");
        check_stochastic_rows(mov.seg_trans, 1e-10, tag + " seg_trans");
        check_distribution(mov.seg_prior, 1e-10, tag + " seg_prior");
        for (int i = 0; i < k; ++i) {
            const VarModel& seg = mov.segments[static_cast<size_t>(i)];
            const std::string stag = tag + " segment " + std::to_string(i + 1);
            if (seg.dim() != d) throw ParameterError(stag + ": dimension mismatch");
            if (seg.lag_order() != tau) throw ParameterError(stag + ": lag order mismatch");
            for (const Mat& a : seg.lag_mats)
                if (a.rows() != d || a.cols() != d)
                    throw ParameterError(stag + ": lag matrix must be " + std::to_string(d) + "x" + std::to_string(d));
            check_covariance(seg.sigma, stag);
        }
    }
}

Mat build_movement_transition(double rho, int n) {
    if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("build_movement_transition: rho must be in (0,1)");
    if (n < 2) throw ParameterError("build_movement_transition: need at least 2 movements");
    Mat t = Mat::Zero(n, n);
    t(0, 0) = rho;
    for (int j = 1; j < n; ++j) t(0, j) = (1.0 - rho) / static_cast<double>(n - 1);
    for (int i = 1; i < n; ++i) {
        t(i, i) = rho;
        t(i, 0) = 1.0 - rho;
    }
    return t;
}

Mat obs_log_likelihood(const HhmmSpec& spec, std::span<const Vec> history, const Vec& y) {
    const int n = spec.n_movements();
    const int k = spec.n_segments();
    Mat ll(n, k);
    for (int m = 0; m < n; ++m) {
        const MovementModel& mov = spec.movements[static_cast<size_t>(m)];
        for (int i = 0; i < k; ++i) {
            const VarModel& seg = mov.segments[static_cast<size_t>(i)];
            ll(m, i) = gaussian_log_density(y, var_predict(seg, history), seg.sigma);
        }
    }
    return ll;
}

}  // namespace varhhmm
