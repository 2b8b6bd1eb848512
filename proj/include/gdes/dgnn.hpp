#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gdes/matrix.hpp"
#include "gdes/rng.hpp"
#include "gdes/temporal_graph.hpp"

namespace gdes {

/// Positive pairwise transportation costs with an infinite diagonal, so a
/// diagonal entry can never contribute to the coupling term.
class CostMatrix {
public:
    static CostMatrix uniform(std::size_t n) {
        CostMatrix d;
        d.values_ = Matrix(n, n, 1.0);
        d.seal();
        return d;
    }

    static CostMatrix from_matrix(Matrix m) {
        if (m.rows() != m.cols()) throw std::invalid_argument("CostMatrix: matrix must be square");
        CostMatrix d;
        d.values_ = std::move(m);
        for (std::size_t i = 0; i < d.values_.rows(); ++i)
            for (std::size_t j = 0; j < d.values_.cols(); ++j) {
                if (i == j) continue;
                const double v = d.values_(i, j);
                if (!(v > 0.0) || !std::isfinite(v))
                    throw std::invalid_argument("CostMatrix: off-diagonal costs must be positive");
            }
        d.seal();
        return d;
    }

    /// Euclidean distances between 2-D coordinates plus a small additive
    /// floor, keeping co-located nodes from producing unbounded couplings.
    static CostMatrix from_coordinates(std::span<const std::pair<double, double>> xy,
                                       double floor = 1e-3) {
        if (!(floor > 0.0)) throw std::invalid_argument("CostMatrix: floor must be positive");
        const std::size_t n = xy.size();
        CostMatrix d;
        d.values_ = Matrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double dx = xy[i].first - xy[j].first;
                const double dy = xy[i].second - xy[j].second;
                d.values_(i, j) = std::sqrt(dx * dx + dy * dy) + floor;
            }
        d.seal();
        return d;
    }

    std::size_t size() const { return values_.rows(); }

    double at(std::size_t i, std::size_t j) const { return values_(i, j); }

    const Matrix& matrix() const { return values_; }

private:
    void seal() {
        for (std::size_t i = 0; i < values_.rows(); ++i)
            values_(i, i) = std::numeric_limits<double>::infinity();
    }
    Matrix values_;
};

enum class Activation : std::uint8_t { Identity, ReLU };
enum class Aggregation : std::uint8_t { MeanSelf, Sum, SumSelf };

inline std::string to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "identity";
}
inline std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::MeanSelf: return "mean_self";
        case Aggregation::Sum: return "sum";
        case Aggregation::SumSelf: return "sum_self";
    }
    return "mean_self";
}
inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}
inline Aggregation aggregation_from_string(const std::string& s) {
    if (s == "mean_self") return Aggregation::MeanSelf;
    if (s == "sum") return Aggregation::Sum;
    if (s == "sum_self") return Aggregation::SumSelf;
    throw std::invalid_argument("unknown aggregation: " + s);
}

struct DgnnConfig {
    std::size_t layers = 2;
    std::size_t hidden = 64;
    Activation activation = Activation::ReLU;
    Aggregation aggregation = Aggregation::MeanSelf;
    double dropout = 0.5;

    void validate() const {
        if (layers < 1) throw std::invalid_argument("DgnnConfig: need at least one layer");
        if (hidden < 1) throw std::invalid_argument("DgnnConfig: hidden width must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw std::invalid_argument("DgnnConfig: dropout must lie in [0,1)");
    }
};

/// Two weight stacks with distinct parameters: the supply path propagates
/// along out-edges, the demand path along in-edges.
struct DgnnModel {
    std::vector<Matrix> supply_weights;
    std::vector<Matrix> demand_weights;
    Activation activation = Activation::ReLU;
    Aggregation aggregation = Aggregation::MeanSelf;
    double dropout = 0.5;

    std::size_t layers() const { return supply_weights.size(); }

    static DgnnModel init(std::size_t in_dim, const DgnnConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        if (in_dim < 1) throw std::invalid_argument("DgnnModel: input width must be >= 1");
        DgnnModel m;
        m.activation = cfg.activation;
        m.aggregation = cfg.aggregation;
        m.dropout = cfg.dropout;
        Rng rng(derive_seed(seed, "dgnn-weights"));
        std::size_t prev = in_dim;
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            const std::size_t next = cfg.hidden;
            const double bound = std::sqrt(6.0 / static_cast<double>(prev + next));
            Matrix ws(prev, next), wr(prev, next);
            for (double& v : ws.data()) v = rng.uniform(-bound, bound);
            for (double& v : wr.data()) v = rng.uniform(-bound, bound);
            m.supply_weights.push_back(std::move(ws));
            m.demand_weights.push_back(std::move(wr));
            prev = next;
        }
        return m;
    }

    /// All-identity square weights; with identity activation and an edgeless
    /// graph the whole stack is the identity map.
    static DgnnModel identity(std::size_t dim, std::size_t layers,
                              Aggregation agg = Aggregation::MeanSelf) {
        DgnnModel m;
        m.activation = Activation::Identity;
        m.aggregation = agg;
        m.dropout = 0.0;
        for (std::size_t l = 0; l < layers; ++l) {
            m.supply_weights.push_back(Matrix::identity(dim));
            m.demand_weights.push_back(Matrix::identity(dim));
        }
        return m;
    }

    double weight_norm_sq() const {
        double s = 0.0;
        for (const auto& w : supply_weights) s += w.frobenius_sq();
        for (const auto& w : demand_weights) s += w.frobenius_sq();
        return s;
    }

    bool all_finite() const {
        for (const auto& w : supply_weights)
            if (!w.all_finite()) return false;
        for (const auto& w : demand_weights)
            if (!w.all_finite()) return false;
        return true;
    }
};

/// P = A_hat * H where A_hat is the neighbor operator of one directed view:
/// row i combines H over i's listed neighbors, optionally with a self term
/// and mean normalization.
inline Matrix aggregate(const std::vector<std::vector<NodeId>>& neighbors, const Matrix& h,
                        Aggregation agg) {
    if (neighbors.size() != h.rows()) throw std::invalid_argument("aggregate: shape mismatch");
    Matrix p(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
        auto out = p.row(i);
        if (agg != Aggregation::Sum) {
            auto self = h.row(i);
            for (std::size_t c = 0; c < out.size(); ++c) out[c] = self[c];
        }
        for (NodeId j : neighbors[i]) {
            auto src = h.row(j);
            for (std::size_t c = 0; c < out.size(); ++c) out[c] += src[c];
        }
        if (agg == Aggregation::MeanSelf) {
            const double inv = 1.0 / static_cast<double>(neighbors[i].size() + 1);
            for (std::size_t c = 0; c < out.size(); ++c) out[c] *= inv;
        }
    }
    return p;
}

/// dH = A_hat^T * dP for the same operator.
inline Matrix aggregate_backward(const std::vector<std::vector<NodeId>>& neighbors,
                                 const Matrix& dp, Aggregation agg) {
    if (neighbors.size() != dp.rows())
        throw std::invalid_argument("aggregate_backward: shape mismatch");
    Matrix dh(dp.rows(), dp.cols());
    for (std::size_t i = 0; i < dp.rows(); ++i) {
        const double w = agg == Aggregation::MeanSelf
                             ? 1.0 / static_cast<double>(neighbors[i].size() + 1)
                             : 1.0;
        auto grad = dp.row(i);
        if (agg != Aggregation::Sum) {
            auto self = dh.row(i);
            for (std::size_t c = 0; c < grad.size(); ++c) self[c] += w * grad[c];
        }
        for (NodeId j : neighbors[i]) {
            auto dst = dh.row(j);
            for (std::size_t c = 0; c < grad.size(); ++c) dst[c] += w * grad[c];
        }
    }
    return dh;
}

inline void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::ReLU)
        for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

/// One propagation layer: activation(A_hat * H * W) over the selected view.
inline Matrix dgnn_layer(const Matrix& h, const std::vector<std::vector<NodeId>>& adj,
                         const Matrix& w, Activation act,
                         Aggregation agg = Aggregation::MeanSelf) {
    Matrix out = matmul(aggregate(adj, h, agg), w);
    apply_activation(out, act);
    return out;
}

/// Intermediates of one embedding pass, kept for reverse-mode gradients.
struct ForwardTape {
    struct LayerRecord {
        Matrix input;       // layer input after dropout
        Matrix mask;        // dropout scale per entry (empty if inactive)
        Matrix aggregated;  // A_hat * input
        Matrix pre;         // aggregated * W
        Matrix out;         // activation(pre)
    };
    std::vector<LayerRecord> supply;
    std::vector<LayerRecord> demand;
    const Matrix& supply_embedding() const { return supply.back().out; }
    const Matrix& demand_embedding() const { return demand.back().out; }
};

namespace detail {

inline void run_path(const Matrix& x, const std::vector<std::vector<NodeId>>& adj,
                     const std::vector<Matrix>& weights, Activation act, Aggregation agg,
                     double dropout, bool train_mode, Rng& rng,
                     std::vector<ForwardTape::LayerRecord>& records) {
    const Matrix* current = &x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        ForwardTape::LayerRecord rec;
        rec.input = *current;
        if (train_mode && dropout > 0.0) {
            // Inverted dropout on the layer input; kept entries are scaled
            // so the expectation matches the eval-mode pass.
            rec.mask = Matrix(rec.input.rows(), rec.input.cols());
            const double keep = 1.0 - dropout;
            for (std::size_t i = 0; i < rec.mask.data().size(); ++i) {
                const double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
                rec.mask.data()[i] = m;
                rec.input.data()[i] *= m;
            }
        }
        rec.aggregated = aggregate(adj, rec.input, agg);
        rec.pre = matmul(rec.aggregated, weights[l]);
        rec.out = rec.pre;
        apply_activation(rec.out, act);
        records.push_back(std::move(rec));
        current = &records.back().out;
    }
}

}  // namespace detail

/// Runs both directed paths from shared input features: the supply stack
/// propagates along out-edges, the demand stack along in-edges. Dropout is
/// applied to layer inputs only in train mode and is a deterministic
/// function of the seed.
inline ForwardTape forward_embeddings(const Matrix& x, const AdjacencyViews& views,
                                      const DgnnModel& model, bool train_mode = false,
                                      std::uint64_t seed = 0) {
    if (x.rows() != views.n) throw std::invalid_argument("forward_embeddings: shape mismatch");
    if (model.supply_weights.size() != model.demand_weights.size() || model.supply_weights.empty())
        throw std::invalid_argument("forward_embeddings: malformed model");
    if (x.cols() != model.supply_weights.front().rows())
        throw std::invalid_argument("forward_embeddings: feature width mismatch");

    ForwardTape tape;
    Rng supply_rng(derive_seed(seed, "dropout-supply"));
    Rng demand_rng(derive_seed(seed, "dropout-demand"));
    detail::run_path(x, views.out, model.supply_weights, model.activation, model.aggregation,
                     model.dropout, train_mode, supply_rng, tape.supply);
    detail::run_path(x, views.in, model.demand_weights, model.activation, model.aggregation,
                     model.dropout, train_mode, demand_rng, tape.demand);
    return tape;
}

/// M = S * R^T; M_ij measures how well i's supply profile matches j's
/// demand profile.
inline Matrix match_matrix(const Matrix& s, const Matrix& r) {
    if (s.cols() != r.cols()) throw std::invalid_argument("match_matrix: width mismatch");
    return matmul_a_bt(s, r);
}

/// M_ij for the listed pairs only, bypassing the dense n x n product.
inline std::vector<double> match_values(const Matrix& s, const Matrix& r,
                                        std::span<const Edge> pairs) {
    if (s.cols() != r.cols()) throw std::invalid_argument("match_values: width mismatch");
    std::vector<double> out(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p)
        out[p] = dot_rows(s, pairs[p].src, r, pairs[p].dst);
    return out;
}

struct GdesTerm {
    std::vector<double> g;
};

/// All ordered pairs (i, j), i != j, in row-major order.
inline std::vector<Edge> dense_pairs(std::size_t n) {
    std::vector<Edge> pairs;
    pairs.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) pairs.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    return pairs;
}

namespace detail {

inline double g_entry(double match, const CostMatrix& d, NodeId i, NodeId j) {
    if (i == j) return 0.0;  // the infinite diagonal contributes nothing
    const double cost = d.at(i, j);
    if (!(cost > 0.0)) throw std::domain_error("g_term: non-positive transportation cost");
    return match / cost;
}

}  // namespace detail

/// g[(i,j)] = M_ij / D_ij over the requested pairs.
inline GdesTerm g_term(const Matrix& m, const CostMatrix& d, std::span<const Edge> pairs) {
    if (m.rows() != d.size() || m.cols() != d.size())
        throw std::invalid_argument("g_term: shape mismatch");
    GdesTerm term;
    term.g.resize(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Edge e = pairs[p];
        if (e.src >= m.rows() || e.dst >= m.rows())
            throw std::invalid_argument("g_term: pair index out of range");
        term.g[p] = detail::g_entry(m(e.src, e.dst), d, e.src, e.dst);
    }
    return term;
}

/// Dense flattening over all n(n-1) ordered pairs, diagonal excluded.
inline GdesTerm g_term_dense(const Matrix& m, const CostMatrix& d) {
    if (m.rows() != d.size() || m.cols() != d.size())
        throw std::invalid_argument("g_term: shape mismatch");
    GdesTerm term;
    const std::size_t n = m.rows();
    term.g.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j)
                term.g.push_back(detail::g_entry(m(i, j), d, static_cast<NodeId>(i),
                                                 static_cast<NodeId>(j)));
    return term;
}

/// Pairwise route that never materializes M; identical values to
/// g_term(match_matrix(S, R), D, pairs).
inline GdesTerm g_term(const Matrix& s, const Matrix& r, const CostMatrix& d,
                       std::span<const Edge> pairs) {
    if (s.cols() != r.cols()) throw std::invalid_argument("g_term: width mismatch");
    GdesTerm term;
    term.g.resize(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Edge e = pairs[p];
        term.g[p] = detail::g_entry(dot_rows(s, e.src, r, e.dst), d, e.src, e.dst);
    }
    return term;
}

}  // namespace gdes
