#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egoflux/error.hpp"

namespace egoflux {

struct OlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    Eigen::Index n_obs = 0;
    Eigen::Index n_params = 0;

    Eigen::Index df_resid() const { return n_obs - n_params; }
};

inline constexpr double kRankTolerance = 1e-10;

/// Least squares through a Householder QR of the design. A design whose R has a
/// diagonal entry below kRankTolerance times the largest one is rejected as
/// rank deficient.
inline OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    if (x.rows() != y.size()) throw InvalidArgument("ols: design has " + std::to_string(x.rows()) + " rows, y has " +
                                                    std::to_string(y.size()));
    if (x.rows() <= x.cols()) throw InsufficientDataError("ols: need more observations than parameters");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::Index p = x.cols();
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const double scale = r.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(std::abs(r(i, i)) > kRankTolerance * scale)) throw SingularDesignError("ols: design matrix is rank deficient");
    }
    OlsFit fit;
    fit.n_obs = x.rows();
    fit.n_params = p;
    const Eigen::VectorXd qty = (qr.householderQ().transpose() * y).head(p);
    fit.coefficients = r.triangularView<Eigen::Upper>().solve(qty);
    fit.residuals = y - x * fit.coefficients;
    fit.rss = fit.residuals.squaredNorm();
    const double s2 = fit.rss / static_cast<double>(fit.df_resid());
    const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    // diag((X'X)^-1) = squared row norms of R^-1
    fit.standard_errors = (r_inv.rowwise().squaredNorm() * s2).cwiseSqrt();
    return fit;
}

}  // namespace egoflux
