// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mile/coarsening.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "mile/errors.hpp"
#include "mile/rng.hpp"

namespace mile {

MatchingMatrix MatchingMatrix::identity(NodeId n) {
    MatchingMatrix m;
    m.fine_count = n;
    m.coarse_count = n;
    m.assignment.resize(static_cast<std::size_t>(n));
    std::iota(m.assignment.begin(), m.assignment.end(), 0);
    return m;
}

MatchingMatrix MatchingMatrix::from_assignment(std::vector<NodeId> assignment) {
    MatchingMatrix m;
    m.fine_count = static_cast<NodeId>(assignment.size());
    NodeId cols = 0;
    for (const auto c : assignment) {
        if (c < 0) throw DimensionError("negative super-node id");
        cols = std::max(cols, c + 1);
    }
    std::vector<char> used(static_cast<std::size_t>(cols), 0);
    for (const auto c : assignment) used[c] = 1;
    if (std::find(used.begin(), used.end(), 0) != used.end())
        throw ConsistencyError("matching matrix has an empty column");
    m.coarse_count = cols;
    m.assignment = std::move(assignment);
    return m;
}

bool MatchingMatrix::is_identity() const {
    if (fine_count != coarse_count) return false;
    for (NodeId u = 0; u < fine_count; ++u)
        if (assignment[u] != u) return false;
    return true;
}

Eigen::SparseMatrix<double> MatchingMatrix::to_sparse() const {
    Eigen::SparseMatrix<double> m(fine_count, coarse_count);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(assignment.size());
    for (NodeId u = 0; u < fine_count; ++u) trips.emplace_back(u, assignment[u], 1.0);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

std::vector<NodeId> CoarseningChain::compose_assignment(int level) const {
    if (level < 0 || level > levels()) throw DimensionError("level out of range");
    std::vector<NodeId> map(static_cast<std::size_t>(finest().node_count()));
    std::iota(map.begin(), map.end(), 0);
    for (int i = 0; i < level; ++i)
        for (auto& c : map) c = matchings[i].assignment[c];
    return map;
}

std::vector<NodeGroup> sem_groups(const Graph& g) {
    const NodeId n = g.node_count();
    // Neighbor rows are already sorted, so the hash of the self-free id list
    // identifies the open neighborhood; collisions are resolved by comparison.
    auto open_row = [&](NodeId u) {
        std::vector<NodeId> row;
        row.reserve(g.neighbors(u).size());
        for (const auto v : g.neighbors(u))
            if (v != u) row.push_back(v);
        return row;
    };
    auto hash_row = [](const std::vector<NodeId>& row) {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ row.size();
        for (const auto v : row) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
        return h;
    };

    std::unordered_map<std::uint64_t, std::vector<NodeGroup>> buckets;
    std::vector<std::vector<NodeId>> rows(static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) {
        rows[u] = open_row(u);
        if (rows[u].empty()) continue;
        auto& classes = buckets[hash_row(rows[u])];
        auto it = std::find_if(classes.begin(), classes.end(),
                               [&](const NodeGroup& cls) { return rows[cls.front()] == rows[u]; });
        if (it == classes.end())
            classes.push_back({u});
        else
            it->push_back(u);
    }

    std::vector<NodeGroup> groups;
    for (auto& [hash, classes] : buckets)
        for (auto& cls : classes)
            if (cls.size() >= 2) groups.push_back(std::move(cls));
    std::sort(groups.begin(), groups.end());
    return groups;
}

double normalized_weight(const Graph& g, NodeId u, NodeId v) {
    const double w = g.weight(u, v);
    if (w == 0.0)
        throw AbsentEdgeError("no edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    return w / std::sqrt(g.weighted_degree(u) * g.weighted_degree(v));
}

std::vector<NodePair> nhem_pairs(const Graph& g, const std::vector<bool>& already_matched) {
    const NodeId n = g.node_count();
    if (static_cast<NodeId>(already_matched.size()) != n) throw DimensionError("matched mask size mismatch");
    std::vector<bool> matched = already_matched;

    std::vector<NodeId> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<NodeId> counts(static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) counts[u] = g.neighbor_count(u);
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return counts[a] < counts[b]; });

    const auto degrees = g.degrees();
    std::vector<NodePair> pairs;
    for (const auto v : order) {
        if (matched[v]) continue;
        const auto nbrs = g.neighbors(v);
        const auto wts = g.weights(v);
        NodeId best = -1;
        double best_w = -1.0;
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const NodeId u = nbrs[k];
            if (u == v || matched[u]) continue;
            const double w = wts[k] / std::sqrt(degrees[v] * degrees[u]);
            if (w > best_w) {
                best_w = w;
                best = u;
            }
        }
        if (best < 0) continue;
        matched[v] = matched[best] = true;
        pairs.emplace_back(v, best);
    }
    return pairs;
}

std::vector<NodePair> random_pairs(const Graph& g, std::uint64_t seed) {
    const NodeId n = g.node_count();
    Rng rng(seed);
    std::vector<NodeId> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);

    std::vector<bool> matched(static_cast<std::size_t>(n), false);
    std::vector<NodePair> pairs;
    std::vector<NodeId> candidates;
    for (const auto v : order) {
        if (matched[v]) continue;
        candidates.clear();
        for (const auto u : g.neighbors(v))
            if (u != v && !matched[u]) candidates.push_back(u);
        if (candidates.empty()) continue;
        const NodeId u = candidates[uniform_index(rng, candidates.size())];
        matched[v] = matched[u] = true;
        pairs.emplace_back(v, u);
    }
    return pairs;
}

MatchingMatrix build_matching_matrix(NodeId n_fine, std::span<const NodeGroup> sem, std::span<const NodePair> pairs) {
    constexpr NodeId kUnset = -1;
    // Provisional label = smallest member, which doubles as the column sort key.
    std::vector<NodeId> leader(static_cast<std::size_t>(n_fine), kUnset);
    auto claim = [&](NodeId u, NodeId key) {
        if (u < 0 || u >= n_fine) throw DimensionError("matched node id out of range");
        if (leader[u] != kUnset) throw ConsistencyError("node " + std::to_string(u) + " appears in two matchings");
        leader[u] = key;
    };
    for (const auto& group : sem) {
        if (group.empty()) throw ConsistencyError("empty structural-equivalence group");
        const NodeId key = *std::min_element(group.begin(), group.end());
        for (const auto u : group) claim(u, key);
    }
    for (const auto& [a, b] : pairs) {
        const NodeId key = std::min(a, b);
        claim(a, key);
        claim(b, key);
    }

    MatchingMatrix m;
    m.fine_count = n_fine;
    m.assignment.assign(static_cast<std::size_t>(n_fine), kUnset);
    std::vector<NodeId> column_of_leader(static_cast<std::size_t>(n_fine), kUnset);
    NodeId next = 0;
    for (NodeId u = 0; u < n_fine; ++u) {
        const NodeId key = leader[u] == kUnset ? u : leader[u];
        if (column_of_leader[key] == kUnset) column_of_leader[key] = next++;
        m.assignment[u] = column_of_leader[key];
    }
    m.coarse_count = next;
    return m;
}

Graph coarse_adjacency(const Graph& g, const MatchingMatrix& matching) {
    if (matching.fine_count != g.node_count() ||
        static_cast<NodeId>(matching.assignment.size()) != g.node_count())
        throw DimensionError("matching does not match the graph size");
    const NodeId nc = matching.coarse_count;

    std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(nc));
    for (NodeId u = 0; u < g.node_count(); ++u) members[matching.assignment[u]].push_back(u);

    std::vector<std::int64_t> offsets(static_cast<std::size_t>(nc) + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    std::vector<double> acc(static_cast<std::size_t>(nc), 0.0);
    std::vector<NodeId> touched;
    for (NodeId c = 0; c < nc; ++c) {
        touched.clear();
        for (const auto u : members[c]) {
            const auto nbrs = g.neighbors(u);
            const auto wts = g.weights(u);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                const NodeId cv = matching.assignment[nbrs[k]];
                if (acc[cv] == 0.0) touched.push_back(cv);
                acc[cv] += wts[k];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (const auto cv : touched) {
            cols.push_back(cv);
            vals.push_back(acc[cv]);
            acc[cv] = 0.0;
        }
        offsets[c + 1] = static_cast<std::int64_t>(cols.size());
    }

    // Row c and row c' accumulate A(c,c') in different orders; mirror the
    // upper triangle so the result is exactly symmetric for real weights.
    for (NodeId c = 0; c < nc; ++c) {
        for (auto k = offsets[c]; k < offsets[c + 1]; ++k) {
            const NodeId cv = cols[k];
            if (cv >= c) break;
            const auto first = cols.begin() + offsets[cv];
            const auto last = cols.begin() + offsets[cv + 1];
            vals[k] = vals[offsets[cv] + (std::lower_bound(first, last, c) - first)];
        }
    }
    return Graph::from_csr(std::move(offsets), std::move(cols), std::move(vals));
}

CoarsenStep coarsen_step(const Graph& g) { return coarsen_step(g, Matcher::Hybrid, 0); }

CoarsenStep coarsen_step(const Graph& g, Matcher matcher, std::uint64_t seed) {
    const NodeId n = g.node_count();
    MatchingMatrix m;
    if (matcher == Matcher::Hybrid) {
        const auto groups = sem_groups(g);
        std::vector<bool> matched(static_cast<std::size_t>(n), false);
        for (const auto& grp : groups)
            for (const auto u : grp) matched[u] = true;
        const auto pairs = nhem_pairs(g, matched);
        m = build_matching_matrix(n, groups, pairs);
    } else {
        const auto pairs = random_pairs(g, seed);
        m = build_matching_matrix(n, {}, pairs);
    }
    Graph coarse = m.is_identity() ? g : coarse_adjacency(g, m);
    return {std::move(m), std::move(coarse)};
}

CoarseningChain coarsen(const Graph& g, int levels, NodeId min_nodes, Matcher matcher, std::uint64_t seed) {
    if (levels < 0) throw ConfigError("coarsening levels must be nonnegative");
    CoarseningChain chain;
    chain.graphs.push_back(g);
    for (int i = 0; i < levels; ++i) {
        const Graph& current = chain.graphs.back();
        auto step = coarsen_step(current, matcher, derive_seed(seed, static_cast<std::uint64_t>(i)));
        if (step.coarse.node_count() >= current.node_count()) break;
        if (step.coarse.node_count() < min_nodes) break;
        chain.matchings.push_back(std::move(step.matching));
        chain.graphs.push_back(std::move(step.coarse));
    }
    return chain;
}

void write_chain_dump(std::ostream& out, const CoarseningChain& chain) {
    for (int i = 0; i <= chain.levels(); ++i) {
        const auto& g = chain.graphs[i];
        out << "level " << i << " nodes " << g.node_count() << " edges " << g.edge_count() << '\n';
        if (i < chain.levels()) {
            out << "assignment";
            for (const auto c : chain.matchings[i].assignment) out << ' ' << c;
            out << '\n';
        }
    }
}

void write_assignment(std::ostream& out, const MatchingMatrix& m) {
    for (NodeId u = 0; u < m.fine_count; ++u) out << u << ' ' << m.assignment[u] << '\n';
}

MatchingMatrix parse_assignment(std::istream& in) {
    std::vector<NodeId> assignment;
    std::vector<char> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t\r")] == '#')
            continue;
        std::istringstream ss(line);
        long long fine = -1, coarse = -1;
        std::string extra;
        if (!(ss >> fine >> coarse) || (ss >> extra) || fine < 0 || coarse < 0)
            throw FormatError("expected `fine_id coarse_id`", lineno);
        if (static_cast<std::size_t>(fine) >= assignment.size()) {
            assignment.resize(static_cast<std::size_t>(fine) + 1, -1);
            seen.resize(static_cast<std::size_t>(fine) + 1, 0);
        }
        if (seen[fine]) throw FormatError("duplicate fine id " + std::to_string(fine), lineno);
        seen[fine] = 1;
        assignment[fine] = static_cast<NodeId>(coarse);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw FormatError("assignment does not cover every fine node");
    try {
        return MatchingMatrix::from_assignment(std::move(assignment));
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
}

MatchingMatrix read_assignment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    return parse_assignment(in);
}

} // namespace mile
