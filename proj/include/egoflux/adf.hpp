#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egoflux/distributions.hpp"
#include "egoflux/error.hpp"
#include "egoflux/ols.hpp"

namespace egoflux {

/// MacKinnon (1994) response-surface approximation of the asymptotic
/// Dickey-Fuller tau distribution, constant-only regression, one variable.
/// p = Phi(poly(tau)) with separate polynomials below and above tau*.
struct MacKinnonConstant {
    static constexpr double tau_max = 2.74;
    static constexpr double tau_min = -18.83;
    static constexpr double tau_star = -1.61;
    static constexpr double small_p[3] = {2.1659, 1.4412, 3.8269e-2};
    static constexpr double large_p[4] = {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2};
};

inline double mackinnon_p_value(double tau) {
    using M = MacKinnonConstant;
    if (std::isnan(tau)) throw InvalidArgument("mackinnon_p_value: statistic is NaN");
    if (tau > M::tau_max) return 1.0;
    if (tau < M::tau_min) return 0.0;
    double poly = 0.0;
    if (tau <= M::tau_star) {
        for (int i = 2; i >= 0; --i) poly = poly * tau + M::small_p[i];
    } else {
        for (int i = 3; i >= 0; --i) poly = poly * tau + M::large_p[i];
    }
    return normal_cdf(poly);
}

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int lags_used = 0;
    std::size_t n_obs = 0;
    double alpha = 0.05;
    bool is_stationary = false;
    std::string regression = "constant";
};

inline constexpr std::size_t kAdfMinObservations = 12;

inline int adf_default_max_lag(std::size_t n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace detail {

// Rows t = first..T-1 of  dy_t ~ [1, y_{t-1}, dy_{t-1}, ..., dy_{t-p}].
inline void adf_design(std::span<const double> y, int p, std::size_t first, Eigen::VectorXd& response,
                       Eigen::MatrixXd& design) {
    const std::size_t n = y.size() - first;
    response.resize(static_cast<Eigen::Index>(n));
    design.resize(static_cast<Eigen::Index>(n), p + 2);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t t = first + r;
        const auto row = static_cast<Eigen::Index>(r);
        response(row) = y[t] - y[t - 1];
        design(row, 0) = 1.0;
        design(row, 1) = y[t - 1];
        for (int i = 1; i <= p; ++i) design(row, i + 1) = y[t - i] - y[t - i - 1];
    }
}

}  // namespace detail

/// Augmented Dickey-Fuller test with a constant and no trend. The augmentation
/// order is chosen by AIC over 0..max_lag on the common sample, then refit on
/// all rows available for the chosen order. `max_lag` defaults to
/// floor(12 (T/100)^(1/4)), reduced as needed to keep 12 usable rows.
inline AdfResult adf_test(std::span<const double> y, std::optional<int> max_lag = std::nullopt, double alpha = 0.05) {
    const std::size_t t_len = y.size();
    if (t_len < kAdfMinObservations + 1) {
        throw InsufficientDataError("adf_test: series of length " + std::to_string(t_len) + " is too short");
    }
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
        throw DegenerateSeriesError("adf_test: series is constant");
    }
    int maxlag = 0;
    if (max_lag) {
        if (*max_lag < 0) throw InvalidArgument("adf_test: max_lag must be nonnegative");
        maxlag = *max_lag;
        if (t_len < static_cast<std::size_t>(maxlag) + 1 + kAdfMinObservations) {
            throw InsufficientDataError("adf_test: too few observations for max_lag " + std::to_string(maxlag));
        }
    } else {
        maxlag = adf_default_max_lag(t_len);
        while (maxlag > 0 && t_len < static_cast<std::size_t>(maxlag) + 1 + kAdfMinObservations) --maxlag;
    }

    Eigen::VectorXd resp;
    Eigen::MatrixXd design;
    int best_p = -1;
    double best_aic = std::numeric_limits<double>::infinity();
    const auto common_first = static_cast<std::size_t>(maxlag) + 1;
    for (int p = 0; p <= maxlag; ++p) {
        detail::adf_design(y, p, common_first, resp, design);
        if (design.rows() <= design.cols()) continue;
        try {
            const OlsFit fit = ols(resp, design);
            const double n = static_cast<double>(fit.n_obs);
            const double aic = fit.rss > 0.0 ? n * std::log(fit.rss / n) + 2.0 * static_cast<double>(p + 2)
                                             : -std::numeric_limits<double>::infinity();
            if (aic < best_aic) {
                best_aic = aic;
                best_p = p;
            }
        } catch (const SingularDesignError&) {
        }
    }
    if (best_p < 0) throw DegenerateSeriesError("adf_test: every candidate regression is singular");

    detail::adf_design(y, best_p, static_cast<std::size_t>(best_p) + 1, resp, design);
    const OlsFit fit = ols(resp, design);
    if (!(fit.standard_errors(1) > 0.0)) throw DegenerateSeriesError("adf_test: perfect fit, statistic undefined");

    AdfResult r;
    r.statistic = fit.coefficients(1) / fit.standard_errors(1);
    r.p_value = mackinnon_p_value(r.statistic);
    r.lags_used = best_p;
    r.n_obs = static_cast<std::size_t>(fit.n_obs);
    r.alpha = alpha;
    r.is_stationary = r.p_value < alpha;
    return r;
}

}  // namespace egoflux
