#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdes/dgnn.hpp"
#include "gdes/evalmetrics.hpp"
#include "gdes/nhpe.hpp"
#include "gdes/smoothing.hpp"
#include "gdes/temporal_graph.hpp"

namespace gdes {

enum class ProbMap : std::uint8_t { Clamp, Logistic };

inline std::string to_string(ProbMap m) { return m == ProbMap::Clamp ? "clamp" : "logistic"; }
inline ProbMap prob_map_from_string(const std::string& s) {
    if (s == "clamp") return ProbMap::Clamp;
    if (s == "logistic") return ProbMap::Logistic;
    throw std::invalid_argument("unknown probability map: " + s);
}

/// Paper mode trains against the final observed period; holdout mode trains
/// one period earlier and reserves the final period for evaluation only.
enum class SplitMode : std::uint8_t { Paper, Holdout };

inline std::string to_string(SplitMode m) { return m == SplitMode::Paper ? "paper" : "holdout"; }
inline SplitMode split_mode_from_string(const std::string& s) {
    if (s == "paper") return SplitMode::Paper;
    if (s == "holdout") return SplitMode::Holdout;
    throw std::invalid_argument("unknown split mode: " + s);
}

struct TrainConfig {
    double alpha = 0.3;
    double lr = 1e-3;
    double gamma = 3e-3;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    double threshold = 0.4;
    BasisSpec basis{};
    double clamp_epsilon = 1e-6;
    ProbMap prob_map = ProbMap::Clamp;
    double negative_ratio = 2.0;
    DgnnConfig dgnn{};
    bool momentum_enabled = false;
    double momentum = 0.9;
    std::size_t early_stop_window = 20;
    double early_stop_min_improvement = 1e-6;
    SplitMode mode = SplitMode::Paper;
    /// Initialize the previous one-step smoothing state from an NHPE fit on
    /// the histories up to t-1 instead of reusing the current fit.
    bool init_s1_from_previous_fit = false;
    /// Current-time index; 0 selects it from the split mode (T-1 for paper,
    /// T-2 for holdout).
    std::size_t t = 0;
    FitOptions nhpe{};

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("TrainConfig: alpha must lie in (0,1)");
        if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
        if (!(gamma >= 0.0)) throw std::invalid_argument("TrainConfig: gamma must be >= 0");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::invalid_argument("TrainConfig: threshold must lie in (0,1)");
        if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5))
            throw std::invalid_argument("TrainConfig: clamp epsilon must lie in (0,0.5)");
        if (!(negative_ratio > 0.0))
            throw std::invalid_argument("TrainConfig: negative ratio must be positive");
        basis.validate();
        dgnn.validate();
    }
};

/// Maps forecasts into (0,1): either clamped directly (the forecast is read
/// as the probability itself) or through a logistic squash.
inline std::vector<double> probability_map(std::span<const double> lambda_breve, ProbMap map,
                                           double eps = 1e-6) {
    std::vector<double> p(lambda_breve.size());
    for (std::size_t i = 0; i < lambda_breve.size(); ++i) {
        const double v = lambda_breve[i];
        if (!std::isfinite(v)) throw std::domain_error("probability_map: non-finite forecast");
        p[i] = map == ProbMap::Clamp ? std::min(std::max(v, eps), 1.0 - eps)
                                     : 1.0 / (1.0 + std::exp(-v));
    }
    return p;
}

/// Cross-entropy sum over candidate pairs.
inline double ce_loss(std::span<const double> p, std::span<const std::uint8_t> labels) {
    if (p.size() != labels.size()) throw std::invalid_argument("ce_loss: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0))
            throw std::domain_error("ce_loss: probabilities must lie strictly in (0,1)");
        loss -= labels[i] != 0 ? std::log(p[i]) : std::log(1.0 - p[i]);
    }
    return loss;
}

/// ce + gamma * sum of squared Frobenius norms of every weight matrix.
inline double total_loss(double ce, const DgnnModel& model, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("total_loss: gamma must be >= 0");
    return ce + gamma * model.weight_norm_sq();
}

namespace detail {

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// Per-pair cross entropy evaluated stably: the logistic branch works on the
/// logit so saturated probabilities cannot produce log(0).
inline double ce_term(double forecast, double p, bool label, ProbMap map) {
    if (map == ProbMap::Logistic)
        return label ? softplus(-forecast) : softplus(forecast);
    return label ? -std::log(p) : -std::log(1.0 - p);
}

/// d(ce)/d(forecast) for one pair. Clamped pairs outside the open interval
/// sit in a flat region and contribute nothing.
inline double ce_forecast_grad(double forecast, double p, bool label, ProbMap map, double eps) {
    const double y = label ? 1.0 : 0.0;
    if (map == ProbMap::Logistic) return p - y;
    if (forecast <= eps || forecast >= 1.0 - eps) return 0.0;
    return (p - y) / (p * (1.0 - p));
}

}  // namespace detail

/// One full differentiable evaluation of the pipeline: embeddings -> match ->
/// coupling -> smoothing step -> probabilities -> loss.
struct TrainStep {
    ForwardTape tape;
    GdesTerm g;
    SmoothingState state;
    std::vector<double> probabilities;
    double ce = 0.0;
    double loss = 0.0;
};

struct PipelineSettings {
    double alpha = 0.3;
    ProbMap prob_map = ProbMap::Clamp;
    double clamp_epsilon = 1e-6;
    double gamma = 3e-3;
};

inline TrainStep pipeline_forward(const Matrix& x, const AdjacencyViews& views,
                                  const DgnnModel& model, const CostMatrix& costs,
                                  std::span<const Edge> pairs,
                                  const IntensityVector& lambda_hat,
                                  std::span<const double> s1_prev,
                                  std::span<const std::uint8_t> labels,
                                  const PipelineSettings& settings, bool train_mode = false,
                                  std::uint64_t dropout_seed = 0) {
    if (labels.size() != pairs.size())
        throw std::invalid_argument("pipeline_forward: label count mismatch");
    TrainStep step;
    step.tape = forward_embeddings(x, views, model, train_mode, dropout_seed);
    step.g = g_term(step.tape.supply_embedding(), step.tape.demand_embedding(), costs, pairs);
    step.state = gdes_step(lambda_hat, s1_prev, step.g.g, settings.alpha);
    step.probabilities =
        probability_map(step.state.forecast, settings.prob_map, settings.clamp_epsilon);
    step.ce = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        step.ce += detail::ce_term(step.state.forecast[i], step.probabilities[i],
                                   labels[i] != 0, settings.prob_map);
    step.loss = total_loss(step.ce, model, settings.gamma);
    return step;
}

struct Gradients {
    std::vector<Matrix> supply;
    std::vector<Matrix> demand;

    bool all_finite() const {
        for (const auto& g : supply)
            if (!g.all_finite()) return false;
        for (const auto& g : demand)
            if (!g.all_finite()) return false;
        return true;
    }
};

namespace detail {

inline void backward_path(const std::vector<ForwardTape::LayerRecord>& records,
                          const std::vector<Matrix>& weights,
                          const std::vector<std::vector<NodeId>>& adj, Activation act,
                          Aggregation agg, Matrix d_out, std::vector<Matrix>& grads) {
    for (std::size_t l = records.size(); l-- > 0;) {
        const auto& rec = records[l];
        Matrix d_pre = std::move(d_out);
        if (act == Activation::ReLU) {
            for (std::size_t i = 0; i < d_pre.data().size(); ++i)
                if (!(rec.pre.data()[i] > 0.0)) d_pre.data()[i] = 0.0;
        }
        axpy(grads[l], 1.0, matmul_at_b(rec.aggregated, d_pre));
        if (l == 0) break;
        Matrix d_agg = matmul_a_bt(d_pre, weights[l]);
        Matrix d_input = aggregate_backward(adj, d_agg, agg);
        if (!rec.mask.empty())
            for (std::size_t i = 0; i < d_input.data().size(); ++i)
                d_input.data()[i] *= rec.mask.data()[i];
        d_out = std::move(d_input);
    }
}

}  // namespace detail

/// Exact reverse-mode gradients of the recorded step's total loss with
/// respect to every weight matrix. The fitted intensity and the previous
/// smoothing state are constants of the graph.
inline Gradients backward(const TrainStep& step, const DgnnModel& model,
                          const AdjacencyViews& views, const CostMatrix& costs,
                          std::span<const Edge> pairs, std::span<const std::uint8_t> labels,
                          const PipelineSettings& settings) {
    const Matrix& s = step.tape.supply_embedding();
    const Matrix& r = step.tape.demand_embedding();

    // d(loss)/d(g) = -d(loss)/d(forecast): the one-step forecast is linear in
    // the coupling term with coefficient exactly -1.
    Matrix d_s(s.rows(), s.cols());
    Matrix d_r(r.rows(), r.cols());
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        const double d_forecast =
            detail::ce_forecast_grad(step.state.forecast[q], step.probabilities[q],
                                     labels[q] != 0, settings.prob_map, settings.clamp_epsilon);
        if (d_forecast == 0.0) continue;
        const Edge e = pairs[q];
        if (e.src == e.dst) continue;
        const double d_match = -d_forecast / costs.at(e.src, e.dst);
        auto ds_row = d_s.row(e.src);
        auto dr_row = d_r.row(e.dst);
        auto s_row = s.row(e.src);
        auto r_row = r.row(e.dst);
        for (std::size_t c = 0; c < ds_row.size(); ++c) {
            ds_row[c] += d_match * r_row[c];
            dr_row[c] += d_match * s_row[c];
        }
    }

    Gradients grads;
    grads.supply.reserve(model.layers());
    grads.demand.reserve(model.layers());
    for (std::size_t l = 0; l < model.layers(); ++l) {
        grads.supply.emplace_back(model.supply_weights[l].rows(), model.supply_weights[l].cols());
        grads.demand.emplace_back(model.demand_weights[l].rows(), model.demand_weights[l].cols());
    }

    detail::backward_path(step.tape.supply, model.supply_weights, views.out, model.activation,
                          model.aggregation, std::move(d_s), grads.supply);
    detail::backward_path(step.tape.demand, model.demand_weights, views.in, model.activation,
                          model.aggregation, std::move(d_r), grads.demand);

    for (std::size_t l = 0; l < model.layers(); ++l) {
        axpy(grads.supply[l], 2.0 * settings.gamma, model.supply_weights[l]);
        axpy(grads.demand[l], 2.0 * settings.gamma, model.demand_weights[l]);
    }
    if (!grads.all_finite()) throw std::runtime_error("backward: non-finite gradient");
    return grads;
}

/// Everything the epoch loop consumes at a fixed current time: candidates,
/// next-period labels, the fitted intensity (a constant during training),
/// the previous smoothing state and the propagation views from A(t-1).
struct PreparedProblem {
    std::size_t t = 0;
    CandidateSet candidates;
    std::vector<std::uint8_t> labels;
    IntensityVector lambda_hat;
    BasisParams basis_params;
    double basis_nll = 0.0;
    std::vector<double> s1_prev;
    AdjacencyViews views;
};

inline PreparedProblem prepare_problem(const SnapshotSequence& seq, const TrainConfig& cfg,
                                       std::size_t t) {
    if (t < 3) throw std::invalid_argument("prepare_problem: need t >= 3");
    if (t + 1 > seq.periods())
        throw std::invalid_argument("prepare_problem: need a labeled period after t");

    PreparedProblem prob;
    prob.t = t;
    prob.candidates = sample_candidates(seq, cfg.negative_ratio,
                                        derive_seed(cfg.seed, "candidates"), TimeWindow{1, t});
    if (prob.candidates.size() == 0) throw std::runtime_error("prepare_problem: empty candidate set");
    prob.labels = labels_at(seq, prob.candidates, t + 1);

    CountingProcess cp = counting_process(seq, prob.candidates, t);
    FitResult fit = fit_intensity(cp, cfg.basis, cfg.nhpe);
    prob.lambda_hat = fit.lambda;
    prob.basis_params = fit.params;
    prob.basis_nll = fit.nll_trace.back();

    if (cfg.init_s1_from_previous_fit) {
        CountingProcess prev = counting_process(seq, prob.candidates, t - 1);
        FitResult prev_fit = fit_intensity(prev, cfg.basis, cfg.nhpe);
        prob.s1_prev = prev_fit.lambda.values;
    } else {
        // Default: seed the first smoothing pass with the current fit, so the
        // pass has no startup transient and the forecast is 2*lambda_hat - g.
        prob.s1_prev = prob.lambda_hat.values;
    }
    prob.views = adjacency_views(seq, t - 1);
    return prob;
}

struct TrainedModel {
    DgnnModel dgnn;
    BasisParams basis_params;
    double basis_nll = 0.0;
    std::size_t t = 0;
    CandidateSet candidates;
    std::vector<std::uint8_t> labels;
    IntensityVector lambda_hat;
    std::vector<double> s1_prev;
    /// Eval-mode total loss per epoch; entry 0 is the pre-training loss.
    std::vector<double> loss_trace;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    /// Forecast, probabilities and loss at the best-loss weights.
    std::vector<double> lambda_breve;
    std::vector<double> probabilities;
    double ce = 0.0;
    double loss = 0.0;
};

/// Runs the full procedure at the configured current time: fit the intensity
/// once, then per epoch recompute the coupling term, smooth, score against
/// the next period and descend on the weight matrices. The reported trace is
/// evaluated with dropout disabled, so a zero learning rate yields an
/// epoch-invariant pure evaluation; gradients are taken through the
/// train-mode pass. Deterministic given the config seed.
inline TrainedModel train(const SnapshotSequence& seq, const Matrix& features,
                          const CostMatrix& costs, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t periods = seq.periods();
    std::size_t t = cfg.t;
    if (t == 0) {
        if (periods < 4) throw std::invalid_argument("train: need at least 4 periods");
        t = cfg.mode == SplitMode::Paper ? periods - 1 : periods - 2;
    }
    if (features.rows() != seq.n()) throw std::invalid_argument("train: feature rows != n");
    if (costs.size() != seq.n()) throw std::invalid_argument("train: cost matrix size != n");

    PreparedProblem prob = prepare_problem(seq, cfg, t);
    DgnnModel model = DgnnModel::init(features.cols(), cfg.dgnn, derive_seed(cfg.seed, "init"));

    const PipelineSettings settings{cfg.alpha, cfg.prob_map, cfg.clamp_epsilon, cfg.gamma};
    const std::span<const Edge> pairs(prob.candidates.pairs);
    const std::span<const std::uint8_t> labels(prob.labels);

    TrainedModel out;
    out.t = t;
    out.basis_params = prob.basis_params;
    out.basis_nll = prob.basis_nll;
    out.candidates = prob.candidates;
    out.labels = prob.labels;
    out.lambda_hat = prob.lambda_hat;
    out.s1_prev = prob.s1_prev;

    auto evaluate = [&](const DgnnModel& m) {
        return pipeline_forward(features, prob.views, m, costs, pairs, prob.lambda_hat,
                                prob.s1_prev, labels, settings, /*train_mode=*/false);
    };

    TrainStep eval_step = evaluate(model);
    if (!std::isfinite(eval_step.loss)) throw std::runtime_error("train: non-finite initial loss");
    out.loss_trace.push_back(eval_step.loss);
    DgnnModel best = model;
    double best_loss = eval_step.loss;
    std::size_t best_epoch = 0;

    std::vector<Matrix> velocity_s, velocity_r;
    if (cfg.momentum_enabled) {
        for (std::size_t l = 0; l < model.layers(); ++l) {
            velocity_s.emplace_back(model.supply_weights[l].rows(),
                                    model.supply_weights[l].cols());
            velocity_r.emplace_back(model.demand_weights[l].rows(),
                                    model.demand_weights[l].cols());
        }
    }

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        TrainStep train_step =
            pipeline_forward(features, prob.views, model, costs, pairs, prob.lambda_hat,
                             prob.s1_prev, labels, settings, /*train_mode=*/true,
                             derive_seed(cfg.seed, "dropout", epoch));
        Gradients grads =
            backward(train_step, model, prob.views, costs, pairs, labels, settings);

        for (std::size_t l = 0; l < model.layers(); ++l) {
            if (cfg.momentum_enabled) {
                for (std::size_t i = 0; i < velocity_s[l].data().size(); ++i)
                    velocity_s[l].data()[i] =
                        cfg.momentum * velocity_s[l].data()[i] + grads.supply[l].data()[i];
                for (std::size_t i = 0; i < velocity_r[l].data().size(); ++i)
                    velocity_r[l].data()[i] =
                        cfg.momentum * velocity_r[l].data()[i] + grads.demand[l].data()[i];
                axpy(model.supply_weights[l], -cfg.lr, velocity_s[l]);
                axpy(model.demand_weights[l], -cfg.lr, velocity_r[l]);
            } else {
                axpy(model.supply_weights[l], -cfg.lr, grads.supply[l]);
                axpy(model.demand_weights[l], -cfg.lr, grads.demand[l]);
            }
        }
        if (!model.all_finite())
            throw std::runtime_error("train: weights diverged at epoch " + std::to_string(epoch));

        eval_step = evaluate(model);
        if (!std::isfinite(eval_step.loss))
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        out.loss_trace.push_back(eval_step.loss);
        out.epochs_run = epoch;
        if (eval_step.loss < best_loss) {
            best_loss = eval_step.loss;
            best = model;
            best_epoch = epoch;
        }
        if (epoch >= cfg.early_stop_window &&
            out.loss_trace[epoch - cfg.early_stop_window] - out.loss_trace[epoch] <
                cfg.early_stop_min_improvement)
            break;
    }

    TrainStep final_step = evaluate(best);
    out.dgnn = std::move(best);
    out.best_epoch = best_epoch;
    out.lambda_breve = final_step.state.forecast;
    out.probabilities = final_step.probabilities;
    out.ce = final_step.ce;
    out.loss = final_step.loss;
    return out;
}

/// Result of applying fixed weights at some current time: candidates are
/// rebuilt on the window ending at t, the intensity is refitted there (an
/// unsupervised step), and the forecast targets t+1.
struct ForecastOutput {
    std::size_t t = 0;
    CandidateSet candidates;
    std::vector<std::uint8_t> labels;
    IntensityVector lambda_hat;
    std::vector<double> lambda_breve;
    std::vector<double> probabilities;
};

inline ForecastOutput forecast_with_model(const SnapshotSequence& seq, const Matrix& features,
                                          const CostMatrix& costs, const DgnnModel& model,
                                          const TrainConfig& cfg, std::size_t t) {
    TrainConfig fixed = cfg;
    fixed.t = t;
    PreparedProblem prob = prepare_problem(seq, fixed, t);
    const PipelineSettings settings{cfg.alpha, cfg.prob_map, cfg.clamp_epsilon, cfg.gamma};
    TrainStep step = pipeline_forward(features, prob.views, model, costs, prob.candidates.pairs,
                                      prob.lambda_hat, prob.s1_prev, prob.labels, settings,
                                      /*train_mode=*/false);
    ForecastOutput out;
    out.t = t;
    out.candidates = std::move(prob.candidates);
    out.labels = std::move(prob.labels);
    out.lambda_hat = std::move(prob.lambda_hat);
    out.lambda_breve = std::move(step.state.forecast);
    out.probabilities = std::move(step.probabilities);
    return out;
}

}  // namespace gdes
