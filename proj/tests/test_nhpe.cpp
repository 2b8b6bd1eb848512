#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gdes/nhpe.hpp"
#include "gdes/rng.hpp"

using namespace gdes;

namespace {

// Independent density oracle for the Gaussian kernel tests.
double gaussian_density(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::acos(-1.0)));
}

// Valid binary-increment count trajectory of length t.
std::vector<std::uint32_t> random_history(Rng& rng, std::size_t t, double rate) {
    std::vector<std::uint32_t> h(t, 0);
    std::uint32_t acc = 0;
    for (std::size_t k = 0; k < t; ++k) {
        acc += rng.bernoulli(rate) ? 1 : 0;
        h[k] = acc;
    }
    return h;
}

CountingProcess random_process(Rng& rng, std::size_t pairs, std::size_t t) {
    CountingProcess cp;
    cp.t = t;
    for (std::size_t p = 0; p < pairs; ++p)
        cp.counts.push_back(random_history(rng, t, rng.uniform(0.1, 0.9)));
    return cp;
}

}  // namespace

TEST_CASE("gaussian kernel matches a direct density evaluation") {
    // k=1, t=16, eta=1.5: center 0, width 1.5
    const double v = gaussian_kernel(0.0, 1, 16, 1.5);
    REQUIRE_THAT(v, Catch::Matchers::WithinRel(gaussian_density(0.0, 0.0, 1.5), 1e-14));
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.26596, 1e-5));

    // peak value at the center, arbitrary k
    for (std::size_t k : {1, 2, 5, 9}) {
        const std::size_t t = 16;
        const double eta = 1.5;
        const double u_k = double(k - 1) * eta / double(t - 2);
        const double sigma = eta / double(k);
        REQUIRE_THAT(gaussian_kernel(u_k, k, t, eta),
                     Catch::Matchers::WithinRel(1.0 / (sigma * std::sqrt(2.0 * std::acos(-1.0))),
                                                1e-14));
        // symmetry about the center
        for (double delta : {0.1, 0.7, 2.3})
            REQUIRE_THAT(gaussian_kernel(u_k + delta, k, t, eta),
                         Catch::Matchers::WithinRel(gaussian_kernel(u_k - delta, k, t, eta),
                                                    1e-13));
    }

    REQUIRE_THROWS(gaussian_kernel(0.0, 1, 2, 1.5));   // degenerate center spacing
    REQUIRE_THROWS(gaussian_kernel(0.0, 0, 16, 1.5));  // k must be >= 1
}

TEST_CASE("design rows per expansion") {
    const std::vector<std::uint32_t> zeros(15, 0);
    const auto sig = design_row(zeros, {BasisKind::Sigmoid}, 16);
    for (double v : sig) REQUIRE(v == 0.5);

    const std::vector<std::uint32_t> hist{1, 2, 3};
    const auto lin = design_row(hist, {BasisKind::Linear}, 4);
    REQUIRE(lin == std::vector<double>{1.0, 2.0, 3.0});

    const auto gau = design_row(zeros, {BasisKind::Gaussian, 1.5}, 16);
    REQUIRE_THAT(gau[0], Catch::Matchers::WithinAbs(0.26596, 1e-5));
    for (std::size_t k = 1; k <= 15; ++k)
        REQUIRE_THAT(gau[k - 1],
                     Catch::Matchers::WithinRel(gaussian_kernel(0.0, k, 16, 1.5), 1e-14));

    REQUIRE_THROWS(design_row(hist, {BasisKind::Linear}, 5));  // length mismatch
}

TEST_CASE("poisson nll values and shape") {
    IntensityVector lam;
    lam.values = {5.0};
    const std::vector<std::uint32_t> counts{5};
    const double expected = -(5.0 * std::log(5.0) - 5.0 - std::lgamma(6.0));
    REQUIRE_THAT(poisson_nll(lam, counts), Catch::Matchers::WithinRel(expected, 1e-14));
    REQUIRE_THAT(poisson_nll(lam, counts), Catch::Matchers::WithinAbs(1.7403, 1e-4));

    // empty-history limit: N = 0 at the floor
    IntensityVector eps;
    eps.values = {1e-6};
    REQUIRE_THAT(poisson_nll(eps, std::vector<std::uint32_t>{0}),
                 Catch::Matchers::WithinAbs(1e-6, 1e-12));

    // grid scan: the minimum over lambda sits at lambda = N
    for (std::uint32_t n = 1; n <= 6; ++n) {
        const std::vector<std::uint32_t> c{n};
        auto nll_at = [&](double l) {
            IntensityVector v;
            v.values = {l};
            return poisson_nll(v, c);
        };
        const double at_n = nll_at(double(n));
        REQUIRE(at_n <= nll_at(double(n) + 1.0));
        for (double l = 0.25; l <= 12.0; l += 0.25) REQUIRE(at_n <= nll_at(l) + 1e-12);
    }

    IntensityVector bad;
    bad.values = {0.0};
    REQUIRE_THROWS_AS(poisson_nll(bad, std::vector<std::uint32_t>{1}), std::domain_error);
}

TEST_CASE("constant-only fit recovers the single-observation MLE exactly") {
    CountingProcess cp;
    cp.t = 6;
    cp.counts = {{1, 2, 3, 4, 4, 5}};  // N(6) = 5
    FitOptions opts;
    opts.constant_only = true;
    const FitResult fit = fit_intensity(cp, {BasisKind::Linear}, opts);
    REQUIRE(fit.lambda.values[0] == 5.0);
    REQUIRE(fit.converged);
}

TEST_CASE("all-zero histories collapse to the positivity floor") {
    CountingProcess cp;
    cp.t = 5;
    cp.counts.assign(7, std::vector<std::uint32_t>(5, 0));
    for (BasisKind kind : {BasisKind::Linear, BasisKind::Sigmoid, BasisKind::Gaussian}) {
        const FitResult fit = fit_intensity(cp, {kind, 1.5});
        for (double v : fit.lambda.values) REQUIRE(v == 1e-6);
    }
}

TEST_CASE("homogeneous pairs recover the sample mean") {
    Rng rng(2024);
    // Poisson(2) via Knuth multiplication
    auto poisson2 = [&]() {
        const double limit = std::exp(-2.0);
        std::uint32_t k = 0;
        double prod = rng.uniform();
        while (prod > limit) {
            ++k;
            prod *= rng.uniform();
        }
        return k;
    };
    CountingProcess cp;
    cp.t = 16;
    double sum = 0.0;
    for (int p = 0; p < 500; ++p) {
        std::vector<std::uint32_t> hist(16, 1);  // identical flat histories
        hist[15] = poisson2();
        sum += hist[15];
        cp.counts.push_back(std::move(hist));
    }
    const double sample_mean = sum / 500.0;
    for (BasisKind kind : {BasisKind::Linear, BasisKind::Gaussian}) {
        const FitResult fit = fit_intensity(cp, {kind, 1.5});
        double mean_fit = 0.0;
        for (double v : fit.lambda.values) mean_fit += v;
        mean_fit /= 500.0;
        REQUIRE_THAT(mean_fit, Catch::Matchers::WithinRel(sample_mean, 0.05));
    }
}

TEST_CASE("nll trace is non-increasing for every basis") {
    Rng rng(99);
    for (BasisKind kind : {BasisKind::Linear, BasisKind::Sigmoid, BasisKind::Gaussian}) {
        for (int rep = 0; rep < 5; ++rep) {
            CountingProcess cp = random_process(rng, 40, 10);
            const FitResult fit = fit_intensity(cp, {kind, 1.5});
            for (std::size_t i = 1; i < fit.nll_trace.size(); ++i)
                REQUIRE(fit.nll_trace[i] <= fit.nll_trace[i - 1]);
            REQUIRE(fit.converged);
        }
    }
}

TEST_CASE("analytic objective gradient matches central finite differences") {
    Rng rng(5150);
    for (BasisKind kind : {BasisKind::Linear, BasisKind::Sigmoid, BasisKind::Gaussian}) {
        CountingProcess cp = random_process(rng, 12, 7);
        // keep counts positive so the floor stays inactive around the point
        for (auto& h : cp.counts)
            for (auto& v : h) v += 1;
        FitOptions opts;
        const NhpeObjective obj(cp, {kind, 1.5}, opts);

        BasisParams params;
        params.a.resize(6);
        for (double& v : params.a) v = rng.uniform(0.05, 0.4);
        params.b = rng.uniform(0.5, 1.5);

        BasisParams grad;
        obj.gradient(params, grad);

        const double h = 1e-6;
        auto check = [&](double analytic, double plus, double minus) {
            const double fd = (plus - minus) / (2.0 * h);
            const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-8});
            REQUIRE(std::abs(analytic - fd) / denom < 1e-6);
        };
        for (std::size_t k = 0; k < params.a.size(); ++k) {
            BasisParams up = params, dn = params;
            up.a[k] += h;
            dn.a[k] -= h;
            check(grad.a[k], obj.value(up), obj.value(dn));
        }
        if (obj.offset_active()) {
            BasisParams up = params, dn = params;
            up.b += h;
            dn.b -= h;
            check(grad.b, obj.value(up), obj.value(dn));
        }
    }
}

TEST_CASE("linear fit is invariant to candidate order when the floor is inactive") {
    Rng rng(31);
    CountingProcess cp = random_process(rng, 30, 8);
    for (auto& h : cp.counts)
        for (auto& v : h) v += 1;  // counts >= 1 keep raw intensities positive
    const FitResult base = fit_intensity(cp, {BasisKind::Linear});

    CountingProcess permuted;
    permuted.t = cp.t;
    std::vector<std::size_t> perm(cp.counts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 17 + 5) % perm.size();
    for (std::size_t i : perm) permuted.counts.push_back(cp.counts[i]);
    const FitResult shuffled = fit_intensity(permuted, {BasisKind::Linear});

    for (std::size_t i = 0; i < perm.size(); ++i)
        REQUIRE_THAT(shuffled.lambda.values[i],
                     Catch::Matchers::WithinRel(base.lambda.values[perm[i]], 1e-8));
}

TEST_CASE("fit preconditions") {
    CountingProcess cp;
    cp.t = 2;
    cp.counts = {{0, 1}};
    REQUIRE_THROWS(fit_intensity(cp, {BasisKind::Linear}));
    CountingProcess empty;
    empty.t = 5;
    REQUIRE_THROWS(fit_intensity(empty, {BasisKind::Linear}));
}
