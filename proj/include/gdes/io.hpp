#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gdes/datagen.hpp"
#include "gdes/dgnn.hpp"
#include "gdes/evalmetrics.hpp"
#include "gdes/matrix.hpp"
#include "gdes/nhpe.hpp"
#include "gdes/smoothing.hpp"
#include "gdes/temporal_graph.hpp"
#include "gdes/trainer.hpp"

namespace gdes {

inline constexpr const char* kVersion = "0.1.0";

/// Shortest decimal that round-trips the double, so emitted files are
/// bit-reproducible and re-parsable without loss.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("parse_double: bad number: " + s);
    return v;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Snapshot / dataset files
// ---------------------------------------------------------------------------

inline void write_snapshots_csv(const std::filesystem::path& path, const SnapshotSequence& seq) {
    auto out = detail::open_out(path);
    out << "tau,src,dst\n";
    for (std::size_t tau = 1; tau <= seq.periods(); ++tau)
        for (const Edge& e : seq.snapshot(tau))
            out << tau << ',' << seq.node_label(e.src) << ',' << seq.node_label(e.dst) << '\n';
}

/// Header `node,f0,...`; rows may appear in any order but must cover every
/// node of the sequence exactly once.
inline void write_features_csv(const std::filesystem::path& path, const SnapshotSequence& seq,
                               const Matrix& x) {
    auto out = detail::open_out(path);
    out << "node";
    for (std::size_t c = 0; c < x.cols(); ++c) out << ",f" << c;
    out << '\n';
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out << seq.node_label(static_cast<NodeId>(i));
        for (std::size_t c = 0; c < x.cols(); ++c) out << ',' << format_double(x(i, c));
        out << '\n';
    }
}

inline Matrix load_features_csv(const std::filesystem::path& path, const SnapshotSequence& seq) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty features file: " + path.string());
    const auto header = detail::split_csv_row(line);
    if (header.size() < 2 || header[0] != "node")
        throw std::runtime_error("features file header must be `node,f0,...`");
    const std::size_t d = header.size() - 1;
    Matrix x(seq.n(), d);
    std::vector<bool> seen(seq.n(), false);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != d + 1)
            throw std::runtime_error("features row " + std::to_string(line_no) +
                                     ": wrong field count");
        const auto idx = seq.index_of(fields[0]);
        if (!idx)
            throw std::runtime_error("features row " + std::to_string(line_no) +
                                     ": unknown node " + fields[0]);
        if (seen[*idx])
            throw std::runtime_error("features row " + std::to_string(line_no) +
                                     ": duplicate node " + fields[0]);
        seen[*idx] = true;
        for (std::size_t c = 0; c < d; ++c) x(*idx, c) = parse_double(fields[c + 1]);
    }
    for (std::size_t i = 0; i < seq.n(); ++i)
        if (!seen[i])
            throw std::runtime_error("features file misses node " +
                                     seq.node_label(static_cast<NodeId>(i)));
    return x;
}

inline void write_coordinates_csv(const std::filesystem::path& path, const SnapshotSequence& seq,
                                  std::span<const std::pair<double, double>> xy) {
    auto out = detail::open_out(path);
    out << "node,x,y\n";
    for (std::size_t i = 0; i < xy.size(); ++i)
        out << seq.node_label(static_cast<NodeId>(i)) << ',' << format_double(xy[i].first) << ','
            << format_double(xy[i].second) << '\n';
}

inline std::vector<std::pair<double, double>> load_coordinates_csv(
    const std::filesystem::path& path, const SnapshotSequence& seq) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty coordinates file: " + path.string());
    const auto header = detail::split_csv_row(line);
    if (header.size() != 3 || header[0] != "node")
        throw std::runtime_error("coordinates file header must be `node,x,y`");
    std::vector<std::pair<double, double>> xy(seq.n());
    std::vector<bool> seen(seq.n(), false);
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 3) throw std::runtime_error("coordinates row: wrong field count");
        const auto idx = seq.index_of(fields[0]);
        if (!idx) throw std::runtime_error("coordinates row: unknown node " + fields[0]);
        seen[*idx] = true;
        xy[*idx] = {parse_double(fields[1]), parse_double(fields[2])};
    }
    for (std::size_t i = 0; i < seq.n(); ++i)
        if (!seen[i])
            throw std::runtime_error("coordinates file misses node " +
                                     seq.node_label(static_cast<NodeId>(i)));
    return xy;
}

/// Raw numeric n x n grid, no header. Diagonal entries are ignored (the cost
/// matrix forces its infinite diagonal back).
inline void write_costs_csv(const std::filesystem::path& path, const CostMatrix& costs) {
    auto out = detail::open_out(path);
    const std::size_t n = costs.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out << ',';
            out << (i == j ? std::string("0") : format_double(costs.at(i, j)));
        }
        out << '\n';
    }
}

inline CostMatrix load_costs_csv(const std::filesystem::path& path, std::size_t n) {
    auto in = detail::open_in(path);
    Matrix m(n, n, 1.0);
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        if (i >= n) throw std::runtime_error("cost matrix has more than n rows");
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != n) throw std::runtime_error("cost matrix row has wrong width");
        for (std::size_t j = 0; j < n; ++j)
            m(i, j) = (i == j) ? 1.0 : parse_double(fields[j]);
        ++i;
    }
    if (i != n) throw std::runtime_error("cost matrix has fewer than n rows");
    return CostMatrix::from_matrix(std::move(m));
}

/// Long sparse format: one row per (pair, period) with nonzero support.
inline void write_truth_csv(const std::filesystem::path& path, const SyntheticDataset& ds) {
    auto out = detail::open_out(path);
    out << "tau,src,dst,pi\n";
    for (std::size_t p = 0; p < ds.truth_pairs.size(); ++p)
        for (std::size_t tau = 1; tau <= ds.truth[p].size(); ++tau)
            out << tau << ',' << ds.snapshots.node_label(ds.truth_pairs[p].src) << ','
                << ds.snapshots.node_label(ds.truth_pairs[p].dst) << ','
                << format_double(ds.truth[p][tau - 1]) << '\n';
}

inline void write_candidates_csv(const std::filesystem::path& path, const SnapshotSequence& seq,
                                 const CandidateSet& cs,
                                 std::span<const std::uint8_t> labels = {}) {
    if (!labels.empty() && labels.size() != cs.size())
        throw std::invalid_argument("write_candidates_csv: label size mismatch");
    auto out = detail::open_out(path);
    out << "src,dst,label,provenance\n";
    for (std::size_t i = 0; i < cs.size(); ++i) {
        out << seq.node_label(cs.pairs[i].src) << ',' << seq.node_label(cs.pairs[i].dst) << ','
            << (labels.empty() ? 0 : int(labels[i])) << ','
            << (cs.provenance[i] == Provenance::Positive ? "positive" : "negative") << '\n';
    }
}

inline void write_lambda_csv(const std::filesystem::path& path, const SnapshotSequence& seq,
                             const CandidateSet& cs, const IntensityVector& lambda) {
    if (lambda.values.size() != cs.size())
        throw std::invalid_argument("write_lambda_csv: size mismatch");
    auto out = detail::open_out(path);
    out << "src,dst,lambda_hat\n";
    for (std::size_t i = 0; i < cs.size(); ++i)
        out << seq.node_label(cs.pairs[i].src) << ',' << seq.node_label(cs.pairs[i].dst) << ','
            << format_double(lambda.values[i]) << '\n';
}

inline void write_predictions_csv(const std::filesystem::path& path, const SnapshotSequence& seq,
                                  const CandidateSet& cs, std::span<const double> lambda_breve,
                                  std::span<const double> p,
                                  std::span<const std::uint8_t> labels) {
    if (lambda_breve.size() != cs.size() || p.size() != cs.size() || labels.size() != cs.size())
        throw std::invalid_argument("write_predictions_csv: size mismatch");
    auto out = detail::open_out(path);
    out << "src,dst,lambda_breve,p,label\n";
    for (std::size_t i = 0; i < cs.size(); ++i)
        out << seq.node_label(cs.pairs[i].src) << ',' << seq.node_label(cs.pairs[i].dst) << ','
            << format_double(lambda_breve[i]) << ',' << format_double(p[i]) << ','
            << int(labels[i]) << '\n';
}

// ---------------------------------------------------------------------------
// JSON artifacts
// ---------------------------------------------------------------------------

inline nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.data().size()) throw std::runtime_error("matrix json: size mismatch");
    m.data() = data;
    return m;
}

inline nlohmann::json basis_to_json(const BasisSpec& spec, const BasisParams& params,
                                    double final_nll) {
    return {{"kind", to_string(spec.kind)},
            {"eta", spec.eta},
            {"a", params.a},
            {"b", params.b},
            {"final_nll", final_nll}};
}

inline nlohmann::json model_to_json(const DgnnModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layers(); ++l)
        layers.push_back({{"supply", matrix_to_json(model.supply_weights[l])},
                          {"demand", matrix_to_json(model.demand_weights[l])}});
    return {{"layers", layers},
            {"activation", to_string(model.activation)},
            {"aggregation", to_string(model.aggregation)},
            {"dropout", model.dropout}};
}

inline DgnnModel model_from_json(const nlohmann::json& j) {
    DgnnModel m;
    m.activation = activation_from_string(j.at("activation").get<std::string>());
    m.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
    m.dropout = j.at("dropout").get<double>();
    for (const auto& layer : j.at("layers")) {
        m.supply_weights.push_back(matrix_from_json(layer.at("supply")));
        m.demand_weights.push_back(matrix_from_json(layer.at("demand")));
    }
    if (m.supply_weights.empty()) throw std::runtime_error("model json: no layers");
    return m;
}

inline nlohmann::json smoothing_state_to_json(const SmoothingState& st) {
    return {{"s1", st.s1},
            {"s2", st.s2},
            {"level", st.level},
            {"trend", st.trend},
            {"forecast", st.forecast}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"auc", r.auc},
            {"counts",
             {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
            {"threshold", r.threshold},
            {"flags",
             {{"precision_defined", r.precision_defined},
              {"recall_defined", r.recall_defined},
              {"f1_defined", r.f1_defined},
              {"auc_defined", r.auc_defined}}},
            {"seed", r.seed},
            {"config_hash", r.config_hash}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace gdes
