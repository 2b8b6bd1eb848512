#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gdes/nhpe.hpp"

namespace gdes {

struct SmoothingConfig {
    double alpha = 0.3;
    std::size_t horizon = 1;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("SmoothingConfig: alpha must lie in (0,1)");
        if (horizon < 1) throw std::invalid_argument("SmoothingConfig: horizon must be >= 1");
    }
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("smoothing: alpha must lie in (0,1)");
}

}  // namespace detail

struct DesInit {
    double s1 = 0.0;
    double s2 = 0.0;
};

/// Holt-style double exponential smoothing forecast for a univariate series:
/// two smoothing passes, then level + m * trend from the closed forms
/// L = 2 s1 - s2 and T = alpha/(1-alpha) (s1 - s2).
inline double des_forecast(std::span<const double> series, double alpha, std::size_t m,
                           DesInit init) {
    detail::check_alpha(alpha);
    if (series.empty()) throw std::invalid_argument("des_forecast: series must be non-empty");
    double s1 = init.s1;
    double s2 = init.s2;
    for (double y : series) {
        s1 = alpha * y + (1.0 - alpha) * s1;
        s2 = alpha * s1 + (1.0 - alpha) * s2;
    }
    const double level = 2.0 * s1 - s2;
    const double trend = alpha / (1.0 - alpha) * (s1 - s2);
    return level + static_cast<double>(m) * trend;
}

/// Multivariate DES: the recursion applied componentwise. series is
/// time-major, series[tau] is the observation vector at period tau+1.
inline std::vector<double> mdes_forecast(const std::vector<std::vector<double>>& series,
                                         double alpha, std::size_t m,
                                         std::span<const double> s1_init,
                                         std::span<const double> s2_init) {
    detail::check_alpha(alpha);
    if (series.empty()) throw std::invalid_argument("mdes_forecast: series must be non-empty");
    const std::size_t dim = series.front().size();
    if (s1_init.size() != dim || s2_init.size() != dim)
        throw std::invalid_argument("mdes_forecast: init dimension mismatch");
    std::vector<double> s1(s1_init.begin(), s1_init.end());
    std::vector<double> s2(s2_init.begin(), s2_init.end());
    for (const auto& y : series) {
        if (y.size() != dim) throw std::invalid_argument("mdes_forecast: dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i) {
            s1[i] = alpha * y[i] + (1.0 - alpha) * s1[i];
            s2[i] = alpha * s1[i] + (1.0 - alpha) * s2[i];
        }
    }
    std::vector<double> forecast(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double level = 2.0 * s1[i] - s2[i];
        const double trend = alpha / (1.0 - alpha) * (s1[i] - s2[i]);
        forecast[i] = level + static_cast<double>(m) * trend;
    }
    return forecast;
}

struct LevelTrend {
    std::vector<double> level;
    std::vector<double> trend;
};

/// L = 2 s1 - s2 and T = alpha/(1-alpha) (s1 - s2), componentwise.
inline LevelTrend level_trend(std::span<const double> s1, std::span<const double> s2,
                              double alpha) {
    detail::check_alpha(alpha);
    if (s1.size() != s2.size()) throw std::invalid_argument("level_trend: dimension mismatch");
    LevelTrend lt;
    lt.level.resize(s1.size());
    lt.trend.resize(s1.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        lt.level[i] = 2.0 * s1[i] - s2[i];
        lt.trend[i] = alpha / (1.0 - alpha) * (s1[i] - s2[i]);
    }
    return lt;
}

/// Smoothed vectors, level/trend decomposition and one-step forecast over a
/// candidate edge set.
struct SmoothingState {
    std::vector<double> s1;
    std::vector<double> s2;
    std::vector<double> level;
    std::vector<double> trend;
    std::vector<double> forecast;
};

/// One graph smoothing step: the first pass smooths the fitted intensity
/// against its previous value, the second pass smooths against the graph
/// coupling term in place of the previous two-step value. The one-step
/// forecast is level + trend, which collapses to 2 s1 - g.
inline SmoothingState gdes_step(const IntensityVector& lambda_hat,
                                std::span<const double> s1_prev, std::span<const double> g_prev,
                                double alpha) {
    detail::check_alpha(alpha);
    const std::size_t dim = lambda_hat.values.size();
    if (s1_prev.size() != dim || g_prev.size() != dim)
        throw std::invalid_argument("gdes_step: dimension mismatch");

    SmoothingState st;
    st.s1.resize(dim);
    st.s2.resize(dim);
    st.forecast.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double lam = lambda_hat.values[i];
        if (!std::isfinite(lam) || !std::isfinite(s1_prev[i]) || !std::isfinite(g_prev[i]))
            throw std::domain_error("gdes_step: non-finite input");
        st.s1[i] = alpha * lam + (1.0 - alpha) * s1_prev[i];
        st.s2[i] = alpha * st.s1[i] + (1.0 - alpha) * g_prev[i];
    }
    LevelTrend lt = level_trend(st.s1, st.s2, alpha);
    st.level = std::move(lt.level);
    st.trend = std::move(lt.trend);
    for (std::size_t i = 0; i < dim; ++i) st.forecast[i] = st.level[i] + st.trend[i];
    return st;
}

}  // namespace gdes
