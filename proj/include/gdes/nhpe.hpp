#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdes/temporal_graph.hpp"

namespace gdes {

enum class BasisKind : std::uint8_t { Linear, Sigmoid, Gaussian };

inline std::string to_string(BasisKind k) {
    switch (k) {
        case BasisKind::Linear: return "linear";
        case BasisKind::Sigmoid: return "sigmoid";
        case BasisKind::Gaussian: return "gaussian";
    }
    return "linear";
}

inline BasisKind basis_from_string(const std::string& s) {
    if (s == "linear") return BasisKind::Linear;
    if (s == "sigmoid") return BasisKind::Sigmoid;
    if (s == "gaussian") return BasisKind::Gaussian;
    throw std::invalid_argument("unknown basis kind: " + s);
}

/// Basis expansion selector. eta scales the Gaussian kernel width and is
/// ignored by the other two expansions.
struct BasisSpec {
    BasisKind kind = BasisKind::Linear;
    double eta = 1.5;

    void validate() const {
        if (!(eta > 0.0)) throw std::invalid_argument("BasisSpec: eta must be positive");
    }
};

/// Expansion coefficients shared across all edges: one a_k per history index
/// k = 1..t-1, plus a single scalar offset used by the linear expansion.
struct BasisParams {
    std::vector<double> a;
    double b = 0.0;
};

struct IntensityVector {
    std::vector<double> values;
};

/// Gaussian kernel B_k evaluated at count value x, with center
/// u_k = (k-1)*eta/((t-1)-1) and width sigma = eta/k.
inline double gaussian_kernel(double x, std::size_t k, std::size_t t, double eta) {
    if (k < 1) throw std::invalid_argument("gaussian_kernel: k must be >= 1");
    if (t < 3)
        throw std::invalid_argument("gaussian_kernel: t must be >= 3 (degenerate center spacing)");
    if (!(eta > 0.0)) throw std::invalid_argument("gaussian_kernel: eta must be positive");
    const double u_k = static_cast<double>(k - 1) * eta / static_cast<double>(t - 2);
    const double sigma = eta / static_cast<double>(k);
    const double z = (x - u_k) / sigma;
    const double inv_sqrt_2pi = 0.39894228040143267793994605993438;
    return inv_sqrt_2pi / sigma * std::exp(-0.5 * z * z);
}

/// Feature vector phi(N(1..t-1)) for one edge history under the chosen
/// expansion. The linear offset is handled separately by the fitter.
inline std::vector<double> design_row(std::span<const std::uint32_t> history, BasisSpec basis,
                                      std::size_t t) {
    basis.validate();
    if (history.size() != t - 1)
        throw std::invalid_argument("design_row: history length must be t-1");
    std::vector<double> phi(history.size());
    for (std::size_t k = 1; k <= history.size(); ++k) {
        const double x = static_cast<double>(history[k - 1]);
        switch (basis.kind) {
            case BasisKind::Linear: phi[k - 1] = x; break;
            case BasisKind::Sigmoid: phi[k - 1] = 1.0 / (1.0 + std::exp(-x)); break;
            case BasisKind::Gaussian: phi[k - 1] = gaussian_kernel(x, k, t, basis.eta); break;
        }
    }
    return phi;
}

/// Negative Poisson log-likelihood -sum(N log lambda - lambda - log N!),
/// accumulated in pair-index order. log N! via lgamma.
inline double poisson_nll(const IntensityVector& lambda, std::span<const std::uint32_t> counts) {
    if (lambda.values.size() != counts.size())
        throw std::invalid_argument("poisson_nll: size mismatch");
    double nll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double lam = lambda.values[i];
        if (!(lam > 0.0)) throw std::domain_error("poisson_nll: non-positive intensity");
        const double n = static_cast<double>(counts[i]);
        nll -= n * std::log(lam) - lam - std::lgamma(n + 1.0);
    }
    return nll;
}

struct FitOptions {
    std::size_t max_iterations = 500;
    double tolerance = 1e-9;
    double epsilon_pos = 1e-6;
    /// Freeze all a_k at zero and fit the scalar offset alone.
    bool constant_only = false;
};

struct FitResult {
    IntensityVector lambda;
    BasisParams params;
    std::vector<double> nll_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Thrown when the optimizer produces non-finite parameters; carries the
/// last finite iterate.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::string msg, BasisParams last)
        : std::runtime_error(std::move(msg)), last_finite(std::move(last)) {}
    BasisParams last_finite;
};

/// The fitter's objective: floored-intensity Poisson NLL of N(t) as a
/// function of the shared expansion coefficients, with its analytic
/// gradient. Public so the gradient can be checked independently.
class NhpeObjective {
public:
    NhpeObjective(const CountingProcess& cp, BasisSpec basis, FitOptions opts) {
        basis.validate();
        if (cp.t < 3) throw std::invalid_argument("NhpeObjective: t must be >= 3");
        if (cp.counts.empty()) throw std::invalid_argument("NhpeObjective: no pairs");
        linear_ = (basis.kind == BasisKind::Linear) || opts.constant_only;
        constant_only_ = opts.constant_only;
        eps_ = opts.epsilon_pos;
        const std::size_t dim = cp.t - 1;
        std::uint32_t max_count = 0;
        phi_.reserve(cp.counts.size());
        counts_.reserve(cp.counts.size());
        for (const auto& hist : cp.counts) {
            if (hist.size() != cp.t)
                throw std::invalid_argument("NhpeObjective: history length must equal t");
            phi_.push_back(
                design_row(std::span<const std::uint32_t>(hist.data(), dim), basis, cp.t));
            counts_.push_back(hist[cp.t - 1]);
            max_count = std::max(max_count, hist[cp.t - 1]);
        }
        lgamma_table_.resize(max_count + 1);
        for (std::uint32_t n = 0; n <= max_count; ++n)
            lgamma_table_[n] = std::lgamma(static_cast<double>(n) + 1.0);
    }

    std::size_t pairs() const { return phi_.size(); }
    std::size_t dim() const { return phi_.front().size(); }
    bool offset_active() const { return linear_; }
    const std::vector<std::uint32_t>& counts() const { return counts_; }

    double raw_intensity(std::size_t p, const BasisParams& params) const {
        double s = params.b;
        const auto& row = phi_[p];
        for (std::size_t k = 0; k < row.size(); ++k) s += params.a[k] * row[k];
        return s;
    }

    double mean_count() const {
        double m = 0.0;
        for (auto c : counts_) m += static_cast<double>(c);
        return m / static_cast<double>(counts_.size());
    }

    double mean_raw(const BasisParams& params) const {
        double m = 0.0;
        for (std::size_t p = 0; p < phi_.size(); ++p) m += raw_intensity(p, params);
        return m / static_cast<double>(phi_.size());
    }

    double value(const BasisParams& params, IntensityVector* out = nullptr) const {
        double total = 0.0;
        if (out) out->values.resize(phi_.size());
        for (std::size_t p = 0; p < phi_.size(); ++p) {
            const double lam = std::max(raw_intensity(p, params), eps_);
            if (out) out->values[p] = lam;
            const double n = static_cast<double>(counts_[p]);
            total -= n * std::log(lam) - lam - lgamma_table_[counts_[p]];
        }
        return total;
    }

    /// Gradient of the floored NLL; pairs in the flat region contribute 0.
    void gradient(const BasisParams& params, BasisParams& grad) const {
        grad.a.assign(params.a.size(), 0.0);
        grad.b = 0.0;
        for (std::size_t p = 0; p < phi_.size(); ++p) {
            const double raw = raw_intensity(p, params);
            if (raw <= eps_) continue;
            const double coef = 1.0 - static_cast<double>(counts_[p]) / raw;
            if (!constant_only_) {
                const auto& row = phi_[p];
                for (std::size_t k = 0; k < row.size(); ++k) grad.a[k] += coef * row[k];
            }
            if (linear_) grad.b += coef;
        }
    }

private:
    std::vector<std::vector<double>> phi_;
    std::vector<std::uint32_t> counts_;
    bool linear_ = false;
    bool constant_only_ = false;
    double eps_ = 1e-6;
    std::vector<double> lgamma_table_;
};

namespace detail {

inline bool params_finite(const BasisParams& p) {
    if (!std::isfinite(p.b)) return false;
    for (double v : p.a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace detail

/// Fits the shared expansion coefficients by full-batch gradient descent on
/// the Poisson NLL of N(t), with backtracking line search so the recorded
/// trace is non-increasing. Intensities are floored at epsilon_pos.
inline FitResult fit_intensity(const CountingProcess& cp, BasisSpec basis, FitOptions opts = {}) {
    basis.validate();
    if (cp.t < 3) throw std::invalid_argument("fit_intensity: t must be >= 3");
    if (cp.counts.empty()) throw std::invalid_argument("fit_intensity: no pairs");
    if (!(opts.epsilon_pos > 0.0))
        throw std::invalid_argument("fit_intensity: epsilon_pos must be positive");

    const std::size_t dim = cp.t - 1;
    const NhpeObjective prob(cp, basis, opts);
    const double mean_count = prob.mean_count();

    // Start near the homogeneous-Poisson solution.
    BasisParams params;
    params.a.assign(dim, 0.0);
    params.b = 0.0;
    if (opts.constant_only || basis.kind == BasisKind::Linear) {
        params.b = mean_count;
    } else if (mean_count > 0.0) {
        params.a.assign(dim, mean_count);
        const double mean_raw = prob.mean_raw(params);
        if (mean_raw > opts.epsilon_pos) {
            const double rescale = mean_count / mean_raw;
            for (double& v : params.a) v *= rescale;
        }
    }

    FitResult res;
    double nll = prob.value(params);
    res.nll_trace.push_back(nll);

    BasisParams grad;
    double step = 1.0;
    const double armijo = 1e-4;
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        prob.gradient(params, grad);
        double grad_sq = grad.b * grad.b;
        for (double v : grad.a) grad_sq += v * v;
        if (grad_sq < 1e-24) {
            res.converged = true;
            break;
        }

        BasisParams trial;
        double trial_nll = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            trial = params;
            for (std::size_t k = 0; k < trial.a.size(); ++k) trial.a[k] -= step * grad.a[k];
            trial.b -= step * grad.b;
            if (detail::params_finite(trial)) {
                trial_nll = prob.value(trial);
                if (std::isfinite(trial_nll) && trial_nll <= nll - armijo * step * grad_sq) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = true;  // no descent direction at float resolution
            break;
        }
        if (!detail::params_finite(trial))
            throw DivergenceError("fit_intensity: parameters diverged", params);

        const double improvement = nll - trial_nll;
        params = std::move(trial);
        nll = trial_nll;
        res.nll_trace.push_back(nll);
        res.iterations = iter + 1;
        step = std::min(step * 2.0, 1e6);
        if (improvement < opts.tolerance * (1.0 + std::abs(nll))) {
            res.converged = true;
            break;
        }
    }

    prob.value(params, &res.lambda);
    res.params = std::move(params);
    return res;
}

}  // namespace gdes
