#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "gdes/temporal_graph.hpp"

using namespace gdes;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& contents) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << contents;
    return path;
}

SnapshotSequence two_period_sequence() {
    // tau 1: 0->1, 3->1 ; tau 2: 0->1, 3->4
    return SnapshotSequence(5, {{{0, 1}, {3, 1}}, {{0, 1}, {3, 4}}});
}

}  // namespace

TEST_CASE("load_snapshots infers n from integer ids and compacts periods") {
    const auto path = write_temp("gdes_snap_basic.csv",
                                 "tau,src,dst\n"
                                 "1,0,1\n"
                                 "1,3,1\n"
                                 "2,0,1\n"
                                 "2,3,4\n"
                                 "2,3,4\n");  // duplicate row
    const SnapshotSequence seq = load_snapshots(path.string());
    REQUIRE(seq.n() >= 5);
    REQUIRE(seq.periods() == 2);
    REQUIRE(seq.snapshot(1).size() == 2);
    REQUIRE(seq.snapshot(2).size() == 2);  // deduplicated
    REQUIRE(seq.has_edge(2, 3, 4));
}

TEST_CASE("load_snapshots reports self-loop rows and keeps the rest") {
    const auto path = write_temp("gdes_snap_selfloop.csv",
                                 "tau,src,dst\n"
                                 "1,2,2\n"
                                 "1,0,1\n");
    LoadReport report;
    const SnapshotSequence seq = load_snapshots(path.string(), &report);
    REQUIRE(report.rejected.size() == 1);
    REQUIRE(report.rejected[0].line == 2);
    REQUIRE(report.rejected[0].reason == "self-loop");
    REQUIRE(seq.snapshot(1).size() == 1);
}

TEST_CASE("load_snapshots rejects malformed rows with a line number") {
    const auto path = write_temp("gdes_snap_bad.csv",
                                 "tau,src,dst\n"
                                 "1,0,1\n"
                                 "x,0,1\n");
    REQUIRE_THROWS_WITH(load_snapshots(path.string()),
                        Catch::Matchers::ContainsSubstring("line 3"));

    const auto empty = write_temp("gdes_snap_empty.csv", "tau,src,dst\n");
    REQUIRE_THROWS(load_snapshots(empty.string()));
}

TEST_CASE("load_snapshots maps string ids densely and compacts sparse taus") {
    const auto path = write_temp("gdes_snap_strings.csv",
                                 "tau,src,dst\n"
                                 "3,acme,globex\n"
                                 "9,globex,initech\n");
    const SnapshotSequence seq = load_snapshots(path.string());
    REQUIRE(seq.n() == 3);
    REQUIRE(seq.periods() == 2);  // taus {3,9} -> {1,2}
    REQUIRE(seq.index_of("acme").has_value());
    REQUIRE(seq.node_label(*seq.index_of("globex")) == "globex");
    REQUIRE(seq.has_edge(2, *seq.index_of("globex"), *seq.index_of("initech")));
}

TEST_CASE("seventeen-period file keeps all periods") {
    std::string contents = "tau,src,dst\n";
    for (int tau = 1; tau <= 17; ++tau) contents += std::to_string(tau) + ",0,1\n";
    const auto path = write_temp("gdes_snap_17.csv", contents);
    REQUIRE(load_snapshots(path.string()).periods() == 17);
}

TEST_CASE("counting process accumulates per-period observations") {
    const SnapshotSequence seq = two_period_sequence();
    CandidateSet cs;
    cs.pairs = {{0, 1}, {3, 4}, {2, 3}};
    cs.provenance.assign(3, Provenance::Positive);

    const CountingProcess cp = counting_process(seq, cs, 2);
    REQUIRE(cp.counts[0] == std::vector<std::uint32_t>{1, 2});  // observed twice
    REQUIRE(cp.counts[1] == std::vector<std::uint32_t>{0, 1});  // observed once, late
    REQUIRE(cp.counts[2] == std::vector<std::uint32_t>{0, 0});  // never observed

    REQUIRE_THROWS_AS(counting_process(seq, cs, 3), std::out_of_range);
    REQUIRE_THROWS_AS(counting_process(seq, cs, 0), std::out_of_range);
}

TEST_CASE("counting process equals a brute-force rescan with unit increments") {
    Rng rng(123);
    std::vector<std::vector<Edge>> snaps(6);
    const std::size_t n = 7;
    for (auto& snap : snaps) {
        std::set<std::pair<NodeId, NodeId>> used;
        for (int k = 0; k < 8; ++k) {
            const NodeId i = static_cast<NodeId>(rng.below(n));
            const NodeId j = static_cast<NodeId>(rng.below(n));
            if (i == j) continue;
            if (used.insert({i, j}).second) snap.push_back({i, j});
        }
    }
    const SnapshotSequence seq(n, snaps);
    CandidateSet cs;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j)
            if (i != j) cs.pairs.push_back({i, j});
    cs.provenance.assign(cs.pairs.size(), Provenance::Positive);

    const std::size_t t = 6;
    const CountingProcess cp = counting_process(seq, cs, t);
    for (std::size_t p = 0; p < cs.pairs.size(); ++p) {
        std::uint32_t acc = 0;
        for (std::size_t k = 1; k <= t; ++k) {
            const std::uint32_t a =
                seq.has_edge(k, cs.pairs[p].src, cs.pairs[p].dst) ? 1u : 0u;
            const std::uint32_t prev = acc;
            acc += a;
            REQUIRE(cp.counts[p][k - 1] == acc);
            REQUIRE(cp.counts[p][k - 1] - prev == a);  // increments in {0,1}
            REQUIRE(cp.counts[p][k - 1] <= k);
        }
    }
}

TEST_CASE("adjacency views transpose and round-trip") {
    const SnapshotSequence seq(3, {{{0, 1}, {1, 2}}, {}});
    const AdjacencyViews v = adjacency_views(seq, 1);
    REQUIRE(v.out[0] == std::vector<NodeId>{1});
    REQUIRE(v.out[1] == std::vector<NodeId>{2});
    REQUIRE(v.in[1] == std::vector<NodeId>{0});
    REQUIRE(v.in[2] == std::vector<NodeId>{1});
    REQUIRE(v.in[0].empty());

    // in is the transpose relation of out; transposing twice restores edges
    std::set<std::pair<NodeId, NodeId>> from_out, from_in;
    for (NodeId i = 0; i < 3; ++i) {
        for (NodeId j : v.out[i]) from_out.insert({i, j});
        for (NodeId j : v.in[i]) from_in.insert({j, i});
    }
    REQUIRE(from_out == from_in);

    const AdjacencyViews empty = adjacency_views(seq, 2);
    for (NodeId i = 0; i < 3; ++i) {
        REQUIRE(empty.out[i].empty());
        REQUIRE(empty.in[i].empty());
    }
    REQUIRE_THROWS_AS(adjacency_views(seq, 3), std::out_of_range);
}

TEST_CASE("sample_candidates honors the ratio and never intersects positives") {
    Rng rng(9);
    std::vector<std::vector<Edge>> snaps(4);
    const std::size_t n = 12;
    for (auto& snap : snaps) {
        std::set<std::pair<NodeId, NodeId>> used;
        for (int k = 0; k < 10; ++k) {
            const NodeId i = static_cast<NodeId>(rng.below(n));
            const NodeId j = static_cast<NodeId>(rng.below(n));
            if (i != j && used.insert({i, j}).second) snap.push_back({i, j});
        }
    }
    const SnapshotSequence seq(n, snaps);

    const CandidateSet cs = sample_candidates(seq, 2.0, 77, {1, 4});
    const std::size_t pos = cs.positives();
    REQUIRE(pos > 0);
    REQUIRE(cs.size() == pos + 2 * pos);

    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        REQUIRE(seen.insert(edge_key(cs.pairs[i])).second);  // no duplicates
        bool observed = false;
        for (std::size_t tau = 1; tau <= 4; ++tau)
            observed |= seq.has_edge(tau, cs.pairs[i].src, cs.pairs[i].dst);
        if (cs.provenance[i] == Provenance::Positive) REQUIRE(observed);
        else REQUIRE_FALSE(observed);
    }

    // half ratio
    const CandidateSet half = sample_candidates(seq, 0.5, 77, {1, 4});
    REQUIRE(half.size() == pos + static_cast<std::size_t>(std::llround(0.5 * double(pos))));

    // determinism
    const CandidateSet again = sample_candidates(seq, 2.0, 77, {1, 4});
    REQUIRE(again.pairs == cs.pairs);
    const CandidateSet other = sample_candidates(seq, 2.0, 78, {1, 4});
    REQUIRE(other.pairs != cs.pairs);
}

TEST_CASE("sample_candidates reports the shortfall when the pool is too small") {
    // 3 nodes, 6 ordered pairs, 4 observed -> pool of 2, ask for 8
    const SnapshotSequence seq(3, {{{0, 1}, {1, 0}, {0, 2}, {2, 0}}});
    REQUIRE_THROWS_WITH(sample_candidates(seq, 2.0, 1, {1, 1}),
                        Catch::Matchers::ContainsSubstring("short by"));
}

TEST_CASE("dense fallback sampling still satisfies the contract") {
    // ask for nearly the whole pool so the enumeration path runs
    const SnapshotSequence seq(4, {{{0, 1}, {1, 2}}});
    const CandidateSet cs = sample_candidates(seq, 4.0, 5, {1, 1});
    REQUIRE(cs.size() == 2 + 8);
    std::set<std::uint64_t> seen;
    for (const Edge& e : cs.pairs) REQUIRE(seen.insert(edge_key(e)).second);
    const CandidateSet again = sample_candidates(seq, 4.0, 5, {1, 1});
    REQUIRE(again.pairs == cs.pairs);
}

TEST_CASE("labels_at reads the requested snapshot") {
    const SnapshotSequence seq = two_period_sequence();
    CandidateSet cs;
    cs.pairs = {{0, 1}, {3, 4}, {3, 1}};
    cs.provenance.assign(3, Provenance::Positive);
    REQUIRE(labels_at(seq, cs, 1) == std::vector<std::uint8_t>{1, 0, 1});
    REQUIRE(labels_at(seq, cs, 2) == std::vector<std::uint8_t>{1, 1, 0});
    attach_labels(cs, seq, 2);
    REQUIRE(cs.labels_by_tau.at(2)[1] == 1);
}

TEST_CASE("snapshot sequence construction enforces invariants") {
    REQUIRE_THROWS(SnapshotSequence(2, {{{0, 5}}}));  // index out of range
    REQUIRE_THROWS(SnapshotSequence(3, {{{1, 1}}}));  // self loop
}
