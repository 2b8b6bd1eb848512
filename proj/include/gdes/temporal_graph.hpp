#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gdes/rng.hpp"

namespace gdes {

using NodeId = std::uint32_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::uint64_t edge_key(NodeId src, NodeId dst) {
    return (static_cast<std::uint64_t>(src) << 32) | dst;
}

inline std::uint64_t edge_key(const Edge& e) { return edge_key(e.src, e.dst); }

/// Ordered dynamic directed snapshots A(1..T) over n nodes. Edges are stored
/// as sorted per-period lists; an observation is binary per period, so a
/// (src,dst) pair appears at most once in a snapshot. Read-only after
/// construction.
class SnapshotSequence {
public:
    /// node_ids maps the dense internal index back to the external label.
    /// When empty, indices 0..n-1 double as their own labels.
    SnapshotSequence(std::size_t n, std::vector<std::vector<Edge>> snapshots,
                     std::vector<std::string> node_ids = {})
        : n_(n), snapshots_(std::move(snapshots)), node_ids_(std::move(node_ids)) {
        if (n_ == 0) throw std::invalid_argument("SnapshotSequence: n must be positive");
        if (!node_ids_.empty() && node_ids_.size() != n_)
            throw std::invalid_argument("SnapshotSequence: node id map size != n");
        for (auto& snap : snapshots_) {
            for (const Edge& e : snap) {
                if (e.src >= n_ || e.dst >= n_)
                    throw std::invalid_argument("SnapshotSequence: node index out of range");
                if (e.src == e.dst)
                    throw std::invalid_argument("SnapshotSequence: self-loop rejected");
            }
            std::sort(snap.begin(), snap.end());
            snap.erase(std::unique(snap.begin(), snap.end()), snap.end());
        }
    }

    std::size_t n() const { return n_; }
    std::size_t periods() const { return snapshots_.size(); }

    /// Snapshot at 1-based period tau, edges sorted by (src, dst).
    const std::vector<Edge>& snapshot(std::size_t tau) const {
        check_period(tau);
        return snapshots_[tau - 1];
    }

    bool has_edge(std::size_t tau, NodeId src, NodeId dst) const {
        const auto& snap = snapshot(tau);
        return std::binary_search(snap.begin(), snap.end(), Edge{src, dst});
    }

    /// External label of a node index.
    std::string node_label(NodeId i) const {
        if (!node_ids_.empty()) return node_ids_[i];
        return std::to_string(i);
    }

    const std::vector<std::string>& node_ids() const { return node_ids_; }

    std::optional<NodeId> index_of(std::string_view label) const {
        if (node_ids_.empty()) {
            NodeId idx = 0;
            for (char c : label) {
                if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
                idx = idx * 10 + static_cast<NodeId>(c - '0');
            }
            if (label.empty() || idx >= n_) return std::nullopt;
            return idx;
        }
        for (NodeId i = 0; i < node_ids_.size(); ++i)
            if (node_ids_[i] == label) return i;
        return std::nullopt;
    }

    void check_period(std::size_t tau) const {
        if (tau < 1 || tau > snapshots_.size())
            throw std::out_of_range("period index out of range: " + std::to_string(tau));
    }

private:
    std::size_t n_;
    std::vector<std::vector<Edge>> snapshots_;
    std::vector<std::string> node_ids_;
};

/// Rows skipped while loading a snapshot file, with the reason.
struct LoadReport {
    struct Rejected {
        std::size_t line;
        std::string text;
        std::string reason;
    };
    std::vector<Rejected> rejected;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

/// Canonical non-negative decimal below the cap, suitable for use as a
/// dense node index.
inline std::optional<std::uint64_t> parse_index_label(const std::string& s,
                                                      std::uint64_t cap = 10'000'000) {
    if (s.empty() || s.size() > 8) return std::nullopt;
    if (s.size() > 1 && s[0] == '0') return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    if (v >= cap) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    long long v = 0;
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return (s[0] == '-') ? -v : v;
}

}  // namespace detail

/// Loads a `tau,src,dst` CSV of directed events. Node labels may be
/// arbitrary strings; when every label is a canonical small integer the
/// labels are kept as dense indices directly (so a file mentioning node 4
/// implies n >= 5), otherwise a first-appearance index map is built and
/// carried on the sequence. Period values are compacted to 1..T preserving
/// their numeric order. Duplicate rows are deduplicated; self-loop rows are
/// skipped and recorded in the report.
inline SnapshotSequence load_snapshots(const std::string& path, LoadReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open snapshot file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty snapshot file: " + path);
    if (!line.empty() && line.substr(0, 3) == "\xEF\xBB\xBF") line = line.substr(3);
    {
        auto header = detail::split_csv_row(line);
        if (header.size() != 3 || header[0] != "tau" || header[1] != "src" || header[2] != "dst")
            throw std::runtime_error("snapshot file header must be `tau,src,dst`: " + path);
    }

    struct Row {
        long long tau;
        std::string src, dst;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_row(line);
        if (fields.size() != 3)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected 3 fields, got " + std::to_string(fields.size()));
        auto tau = detail::parse_int(fields[0]);
        if (!tau)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": tau is not an integer: " + fields[0]);
        if (fields[1].empty() || fields[2].empty())
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": empty node id");
        if (fields[1] == fields[2]) {
            if (report) report->rejected.push_back({line_no, line, "self-loop"});
            continue;
        }
        rows.push_back({*tau, fields[1], fields[2]});
    }
    if (rows.empty()) throw std::runtime_error("snapshot file has no usable rows: " + path);

    // Compact period values to 1..T in numeric order.
    std::vector<long long> taus;
    taus.reserve(rows.size());
    for (const auto& r : rows) taus.push_back(r.tau);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    std::unordered_map<long long, std::size_t> tau_index;
    for (std::size_t i = 0; i < taus.size(); ++i) tau_index[taus[i]] = i;

    // Numeric mode keeps integer labels as dense indices; string mode maps
    // labels by first appearance.
    bool numeric = true;
    std::uint64_t max_index = 0;
    for (const auto& r : rows) {
        auto a = detail::parse_index_label(r.src);
        auto b = detail::parse_index_label(r.dst);
        if (!a || !b) {
            numeric = false;
            break;
        }
        max_index = std::max({max_index, *a, *b});
    }

    std::vector<std::string> node_ids;
    std::unordered_map<std::string, NodeId> index_map;
    std::size_t n = 0;
    auto resolve = [&](const std::string& label) -> NodeId {
        if (numeric) return static_cast<NodeId>(*detail::parse_index_label(label));
        auto it = index_map.find(label);
        if (it != index_map.end()) return it->second;
        const NodeId idx = static_cast<NodeId>(node_ids.size());
        index_map.emplace(label, idx);
        node_ids.push_back(label);
        return idx;
    };

    std::vector<std::vector<Edge>> snapshots(taus.size());
    for (const auto& r : rows)
        snapshots[tau_index[r.tau]].push_back({resolve(r.src), resolve(r.dst)});
    n = numeric ? static_cast<std::size_t>(max_index) + 1 : node_ids.size();

    return SnapshotSequence(n, std::move(snapshots), std::move(node_ids));
}

enum class Provenance : std::uint8_t { Positive, SampledNegative };

/// Candidate edge set: every pair ever observed in the sampling window plus
/// uniformly sampled never-observed negatives. Order is fixed (positives
/// sorted, then negatives in draw order) so downstream vectors align by index.
struct CandidateSet {
    std::vector<Edge> pairs;
    std::vector<Provenance> provenance;
    std::map<std::size_t, std::vector<std::uint8_t>> labels_by_tau;

    std::size_t size() const { return pairs.size(); }

    std::size_t positives() const {
        std::size_t c = 0;
        for (auto p : provenance) c += (p == Provenance::Positive) ? 1 : 0;
        return c;
    }
};

/// Per-pair cumulative event counts N(1..t) aligned with a candidate set.
struct CountingProcess {
    std::size_t t = 0;
    std::vector<std::vector<std::uint32_t>> counts;
};

/// N_ij(k) = sum_{tau<=k} A_ij(tau) for k = 1..t, one vector per candidate pair.
inline CountingProcess counting_process(const SnapshotSequence& seq, const CandidateSet& pairs,
                                        std::size_t t) {
    seq.check_period(t);
    CountingProcess cp;
    cp.t = t;
    cp.counts.assign(pairs.size(), std::vector<std::uint32_t>(t, 0));

    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(pairs.size() * 2);
    for (std::size_t i = 0; i < pairs.size(); ++i) index.emplace(edge_key(pairs.pairs[i]), i);

    for (std::size_t tau = 1; tau <= t; ++tau) {
        for (const Edge& e : seq.snapshot(tau)) {
            auto it = index.find(edge_key(e));
            if (it != index.end()) cp.counts[it->second][tau - 1] = 1;
        }
    }
    for (auto& hist : cp.counts)
        for (std::size_t k = 1; k < hist.size(); ++k) hist[k] += hist[k - 1];
    return cp;
}

/// Out- and in-neighbor lists of one snapshot; `in` is the transpose
/// relation of `out`.
struct AdjacencyViews {
    std::size_t n = 0;
    std::vector<std::vector<NodeId>> out;
    std::vector<std::vector<NodeId>> in;
};

inline AdjacencyViews adjacency_views(const SnapshotSequence& seq, std::size_t tau) {
    seq.check_period(tau);
    AdjacencyViews v;
    v.n = seq.n();
    v.out.assign(v.n, {});
    v.in.assign(v.n, {});
    for (const Edge& e : seq.snapshot(tau)) {
        v.out[e.src].push_back(e.dst);
        v.in[e.dst].push_back(e.src);
    }
    for (auto& lst : v.out) std::sort(lst.begin(), lst.end());
    for (auto& lst : v.in) std::sort(lst.begin(), lst.end());
    return v;
}

/// Views with no edges at all; with mean-plus-self aggregation this makes the
/// propagation operator the identity.
inline AdjacencyViews empty_views(std::size_t n) {
    AdjacencyViews v;
    v.n = n;
    v.out.assign(n, {});
    v.in.assign(n, {});
    return v;
}

/// Inclusive 1-based period range.
struct TimeWindow {
    std::size_t first = 1;
    std::size_t last = 1;
};

/// Positives are all pairs observed at least once in the window; negatives
/// are drawn uniformly without replacement from the never-observed ordered
/// pairs, round(ratio * |positives|) of them. Deterministic given the seed.
inline CandidateSet sample_candidates(const SnapshotSequence& seq, double ratio,
                                      std::uint64_t seed, TimeWindow window) {
    if (!(ratio > 0.0)) throw std::invalid_argument("sample_candidates: ratio must be positive");
    seq.check_period(window.first);
    seq.check_period(window.last);
    if (window.first > window.last)
        throw std::invalid_argument("sample_candidates: empty window");

    std::unordered_set<std::uint64_t> observed;
    for (std::size_t tau = window.first; tau <= window.last; ++tau)
        for (const Edge& e : seq.snapshot(tau)) observed.insert(edge_key(e));

    std::vector<Edge> positives;
    positives.reserve(observed.size());
    for (std::uint64_t key : observed)
        positives.push_back({static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xffffffffu)});
    std::sort(positives.begin(), positives.end());

    const std::uint64_t n = seq.n();
    const std::uint64_t total_pairs = n * (n - 1);
    const std::uint64_t pool = total_pairs - positives.size();
    const std::uint64_t wanted =
        static_cast<std::uint64_t>(std::llround(ratio * static_cast<double>(positives.size())));
    if (wanted > pool)
        throw std::runtime_error("sample_candidates: only " + std::to_string(pool) +
                                 " unobserved pairs available, need " + std::to_string(wanted) +
                                 " (short by " + std::to_string(wanted - pool) + ")");

    // Ordered pairs are indexed 0..n(n-1)-1 with the diagonal skipped, so
    // negatives can be drawn by index without materializing the pair space.
    auto pair_of_index = [n](std::uint64_t idx) -> Edge {
        const std::uint64_t i = idx / (n - 1);
        const std::uint64_t r = idx % (n - 1);
        const std::uint64_t j = r + (r >= i ? 1 : 0);
        return {static_cast<NodeId>(i), static_cast<NodeId>(j)};
    };

    Rng rng(derive_seed(seed, "negative-sampling"));
    std::vector<Edge> negatives;
    negatives.reserve(wanted);
    if (wanted * 2 >= pool) {
        // Dense fallback: enumerate the pool and take a partial Fisher-Yates
        // prefix, exact even when nearly the whole pool is requested.
        std::vector<std::uint64_t> candidates;
        candidates.reserve(pool);
        for (std::uint64_t idx = 0; idx < total_pairs; ++idx) {
            const Edge e = pair_of_index(idx);
            if (!observed.count(edge_key(e))) candidates.push_back(idx);
        }
        for (std::uint64_t i = 0; i < wanted; ++i) {
            const std::uint64_t j = i + rng.below(candidates.size() - i);
            std::swap(candidates[i], candidates[j]);
            negatives.push_back(pair_of_index(candidates[i]));
        }
    } else {
        std::unordered_set<std::uint64_t> taken;
        taken.reserve(wanted * 2);
        while (negatives.size() < wanted) {
            const std::uint64_t idx = rng.below(total_pairs);
            const Edge e = pair_of_index(idx);
            const std::uint64_t key = edge_key(e);
            if (observed.count(key) || !taken.insert(key).second) continue;
            negatives.push_back(e);
        }
    }

    CandidateSet cs;
    cs.pairs = std::move(positives);
    cs.provenance.assign(cs.pairs.size(), Provenance::Positive);
    for (const Edge& e : negatives) {
        cs.pairs.push_back(e);
        cs.provenance.push_back(Provenance::SampledNegative);
    }
    return cs;
}

/// Binary label per candidate pair from the snapshot at tau.
inline std::vector<std::uint8_t> labels_at(const SnapshotSequence& seq, const CandidateSet& cs,
                                           std::size_t tau) {
    seq.check_period(tau);
    std::vector<std::uint8_t> labels(cs.size(), 0);
    for (std::size_t i = 0; i < cs.size(); ++i)
        labels[i] = seq.has_edge(tau, cs.pairs[i].src, cs.pairs[i].dst) ? 1 : 0;
    return labels;
}

inline void attach_labels(CandidateSet& cs, const SnapshotSequence& seq, std::size_t tau) {
    cs.labels_by_tau[tau] = labels_at(seq, cs, tau);
}

}  // namespace gdes
