#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gdes/dgnn.hpp"
#include "gdes/matrix.hpp"
#include "gdes/rng.hpp"
#include "gdes/temporal_graph.hpp"

namespace gdes {

struct GenConfig {
    std::size_t n = 200;
    std::size_t T = 17;
    std::size_t d = 8;
    /// Scale of the stationary edge probabilities.
    double base_rate = 0.15;
    /// Scale of the per-period drift of rising and falling edges.
    double trend_strength = 0.04;
    /// Weight of the realized-neighbor influence on an edge's probability.
    double coupling = 0.3;
    std::uint64_t seed = 1;
    /// Emit 2-D coordinates (costs become distances); otherwise costs are
    /// uniform.
    bool coords = true;
    /// Expected latent (potentially active) pairs per node.
    double support_per_node = 4.0;

    void validate() const {
        if (n < 4) throw std::invalid_argument("GenConfig: n must be >= 4");
        if (T < 3) throw std::invalid_argument("GenConfig: T must be >= 3");
        if (d < 1) throw std::invalid_argument("GenConfig: d must be >= 1");
        if (!(base_rate >= 0.0 && base_rate <= 1.0))
            throw std::invalid_argument("GenConfig: base_rate must lie in [0,1]");
        if (!(trend_strength >= 0.0))
            throw std::invalid_argument("GenConfig: trend_strength must be >= 0");
        if (!(coupling >= 0.0 && coupling < 1.0))
            throw std::invalid_argument("GenConfig: coupling must lie in [0,1)");
        if (!(support_per_node > 0.0))
            throw std::invalid_argument("GenConfig: support_per_node must be positive");
        if (base_rate == 0.0 && trend_strength == 0.0)
            throw std::invalid_argument("GenConfig: degenerate config, all probabilities zero");
    }
};

/// A generated network with its ground truth: the latent probability
/// trajectory of every potentially-active pair.
struct SyntheticDataset {
    SnapshotSequence snapshots;
    Matrix features;
    CostMatrix costs;
    std::vector<std::pair<double, double>> coordinates;  // empty when coords off
    std::vector<Edge> truth_pairs;
    std::vector<std::vector<double>> truth;  // truth[p][tau-1] = pi_p(tau)

    SyntheticDataset(SnapshotSequence snaps, Matrix x, CostMatrix d)
        : snapshots(std::move(snaps)), features(std::move(x)), costs(std::move(d)) {}
};

namespace detail {

/// Index drawn proportionally to the given non-negative weights.
inline std::size_t weighted_index(const std::vector<double>& cumulative, Rng& rng) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, cumulative.size() - 1);
}

}  // namespace detail

/// Generates a dynamic directed network from a sparse latent support: each
/// support pair carries a level plus linear drift, every pair's probability
/// is lifted by the mean probability of realized edges sharing one of its
/// endpoints at the previous period, and snapshots are Bernoulli draws of
/// the resulting trajectory. Node features expose the supplier and demander
/// propensities that drive support selection, so the graph term has real
/// signal to exploit. Fully deterministic given the seed.
inline SyntheticDataset generate(const GenConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n;

    Rng node_rng(derive_seed(cfg.seed, "nodes"));
    std::vector<double> supply_propensity(n), demand_propensity(n);
    for (std::size_t i = 0; i < n; ++i) supply_propensity[i] = node_rng.uniform(0.05, 1.0);
    for (std::size_t i = 0; i < n; ++i) demand_propensity[i] = node_rng.uniform(0.05, 1.0);

    std::vector<std::pair<double, double>> xy(n);
    Rng coord_rng(derive_seed(cfg.seed, "coords"));
    for (auto& c : xy) c = {coord_rng.uniform(), coord_rng.uniform()};

    // Latent support: pairs sampled by supplier/demander propensities with a
    // mild preference for short distances, capped to leave a clean pool of
    // never-active pairs for negative sampling.
    const std::size_t max_support = n * (n - 1) / 4;
    const std::size_t m_support = std::max<std::size_t>(
        1, std::min<std::size_t>(
               static_cast<std::size_t>(std::llround(cfg.support_per_node * n)), max_support));

    std::vector<double> cum_supply(n), cum_demand(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cum_supply[i] = (acc += supply_propensity[i]);
    acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cum_demand[i] = (acc += demand_propensity[i]);

    Rng support_rng(derive_seed(cfg.seed, "support"));
    std::vector<Edge> support;
    std::unordered_set<std::uint64_t> chosen;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 200 * m_support + 10000;
    while (support.size() < m_support && attempts < max_attempts) {
        ++attempts;
        const auto i = detail::weighted_index(cum_supply, support_rng);
        const auto j = detail::weighted_index(cum_demand, support_rng);
        if (i == j) continue;
        const double dx = xy[i].first - xy[j].first;
        const double dy = xy[i].second - xy[j].second;
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (support_rng.uniform() > 0.2 / (0.2 + dist)) continue;
        if (!chosen.insert(edge_key(static_cast<NodeId>(i), static_cast<NodeId>(j))).second)
            continue;
        support.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
    if (support.empty()) throw std::runtime_error("generate: could not sample a latent support");
    std::sort(support.begin(), support.end());

    // Category by feature compatibility: the most compatible third drifts up
    // from zero, the least compatible third starts high and dies out, the
    // middle stays stationary. This keeps the future of an edge predictable
    // from the endpoint features rather than from its count history alone.
    const std::size_t m = support.size();
    std::vector<double> compat(m);
    for (std::size_t p = 0; p < m; ++p)
        compat[p] = supply_propensity[support[p].src] * demand_propensity[support[p].dst];
    std::vector<std::size_t> order(m);
    for (std::size_t p = 0; p < m; ++p) order[p] = p;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return compat[a] < compat[b]; });

    std::vector<double> level(m, 0.0), trend(m, 0.0);
    for (std::size_t rank = 0; rank < m; ++rank) {
        const std::size_t p = order[rank];
        const double s = 0.5 + compat[p];
        if (rank * 3 < m) {
            // falling: dies out just before the horizon ends
            trend[p] = -cfg.trend_strength * s;
            level[p] = cfg.trend_strength * s * static_cast<double>(cfg.T + 1);
        } else if (rank * 3 < 2 * m) {
            level[p] = cfg.base_rate + 0.4 * compat[p];
        } else {
            trend[p] = cfg.trend_strength * s;
        }
    }

    // Simulate. The coupling term at tau reads the realized edges of tau-1:
    // the mean latent probability over realized edges sharing an endpoint.
    Rng sim_rng(derive_seed(cfg.seed, "simulate"));
    std::vector<std::vector<double>> truth(m, std::vector<double>(cfg.T, 0.0));
    std::vector<std::vector<Edge>> snapshots(cfg.T);
    std::vector<double> prev_pi(m, 0.0);
    std::vector<std::uint8_t> prev_realized(m, 0);
    std::vector<double> out_sum(n), in_sum(n);
    std::vector<std::uint32_t> out_deg(n), in_deg(n);
    std::unordered_map<std::uint64_t, std::size_t> support_index;
    for (std::size_t p = 0; p < m; ++p) support_index.emplace(edge_key(support[p]), p);

    for (std::size_t tau = 1; tau <= cfg.T; ++tau) {
        std::fill(out_sum.begin(), out_sum.end(), 0.0);
        std::fill(in_sum.begin(), in_sum.end(), 0.0);
        std::fill(out_deg.begin(), out_deg.end(), 0u);
        std::fill(in_deg.begin(), in_deg.end(), 0u);
        if (cfg.coupling > 0.0 && tau > 1) {
            for (std::size_t p = 0; p < m; ++p) {
                if (!prev_realized[p]) continue;
                out_sum[support[p].src] += prev_pi[p];
                in_sum[support[p].dst] += prev_pi[p];
                ++out_deg[support[p].src];
                ++in_deg[support[p].dst];
            }
        }
        for (std::size_t p = 0; p < m; ++p) {
            const NodeId i = support[p].src;
            const NodeId j = support[p].dst;
            double bump = 0.0;
            if (cfg.coupling > 0.0 && tau > 1) {
                double sum = out_sum[i] + in_sum[i] + out_sum[j] + in_sum[j];
                double count = static_cast<double>(out_deg[i] + in_deg[i] + out_deg[j] + in_deg[j]);
                if (prev_realized[p]) {
                    sum -= 2.0 * prev_pi[p];  // counted via out_sum[i] and in_sum[j]
                    count -= 2.0;
                }
                const auto rev = support_index.find(edge_key(j, i));
                if (rev != support_index.end() && prev_realized[rev->second]) {
                    sum -= prev_pi[rev->second];  // adjacent on both ends, count it once
                    count -= 1.0;
                }
                if (count > 0.0) bump = cfg.coupling * (sum / count);
            }
            const double pi = std::clamp(
                level[p] + trend[p] * static_cast<double>(tau) + bump, 0.0, 1.0);
            truth[p][tau - 1] = pi;
        }
        for (std::size_t p = 0; p < m; ++p) {
            const bool hit = sim_rng.bernoulli(truth[p][tau - 1]);
            prev_realized[p] = hit ? 1 : 0;
            if (hit) snapshots[tau - 1].push_back(support[p]);
        }
        for (std::size_t p = 0; p < m; ++p) prev_pi[p] = truth[p][tau - 1];
    }

    // Features: the propensities that drove support selection plus noise
    // columns.
    Rng feat_rng(derive_seed(cfg.seed, "features"));
    Matrix x(n, cfg.d);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = supply_propensity[i];
        if (cfg.d > 1) x(i, 1) = demand_propensity[i];
        for (std::size_t c = 2; c < cfg.d; ++c) x(i, c) = feat_rng.uniform(-0.5, 0.5);
    }

    CostMatrix costs = cfg.coords
                           ? CostMatrix::from_coordinates(
                                 std::span<const std::pair<double, double>>(xy), 1e-3)
                           : CostMatrix::uniform(n);

    SyntheticDataset ds(SnapshotSequence(n, std::move(snapshots)), std::move(x),
                        std::move(costs));
    if (cfg.coords) ds.coordinates = std::move(xy);
    ds.truth_pairs = std::move(support);
    ds.truth = std::move(truth);
    return ds;
}

}  // namespace gdes
