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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "mile/graph.hpp"

namespace mile {

/// Node -> super-node map. Equivalent to a binary |V_fine| x |V_coarse|
/// matrix with exactly one 1 per row and at least one 1 per column.
struct MatchingMatrix {
    NodeId fine_count = 0;
    NodeId coarse_count = 0;
    std::vector<NodeId> assignment;

    static MatchingMatrix identity(NodeId n);

    /// Validates the invariants; throws DimensionError / ConsistencyError.
    static MatchingMatrix from_assignment(std::vector<NodeId> assignment);

    bool is_identity() const;

    /// The binary matrix as an Eigen sparse matrix (fine rows, coarse cols).
    Eigen::SparseMatrix<double> to_sparse() const;

    friend bool operator==(const MatchingMatrix&, const MatchingMatrix&) = default;
};

using NodeGroup = std::vector<NodeId>;
using NodePair = std::pair<NodeId, NodeId>;

enum class Matcher {
    Hybrid, ///< structural equivalence followed by normalized heavy edge matching
    Random, ///< seeded random pairing of connected nodes
};

/// Levels G_0..G_m and the matchings between consecutive levels.
struct CoarseningChain {
    std::vector<Graph> graphs;
    std::vector<MatchingMatrix> matchings;

    int levels() const { return static_cast<int>(matchings.size()); }
    const Graph& finest() const { return graphs.front(); }
    const Graph& coarsest() const { return graphs.back(); }

    /// Composed map from level-0 nodes to super-nodes of `level`.
    std::vector<NodeId> compose_assignment(int level) const;
};

/// Groups (size >= 2) of nodes with identical open neighbor sets, ignoring
/// weights and self-loops. Groups and members sorted ascending; isolated
/// nodes are never grouped.
std::vector<NodeGroup> sem_groups(const Graph& g);

/// A(u,v) / sqrt(D(u,u) D(v,v)).
double normalized_weight(const Graph& g, NodeId u, NodeId v);

/// Normalized heavy edge matching over the nodes not already matched.
/// Nodes are visited by ascending neighbor count, ties by id; each picks the
/// unmatched neighbor with the largest normalized weight, ties by id.
std::vector<NodePair> nhem_pairs(const Graph& g, const std::vector<bool>& already_matched);

/// Seeded random matching: repeatedly pairs a random unmatched node with a
/// random unmatched neighbor until no connected unmatched pair remains.
std::vector<NodePair> random_pairs(const Graph& g, std::uint64_t seed);

/// Columns are ordered by the smallest fine member; unmatched nodes become
/// singleton columns.
MatchingMatrix build_matching_matrix(NodeId n_fine, std::span<const NodeGroup> sem,
                                     std::span<const NodePair> pairs);

/// M^T A M, computed sparsely. Internal edges of a super-node become a
/// self-loop holding A(u,v) + A(v,u).
Graph coarse_adjacency(const Graph& g, const MatchingMatrix& matching);

struct CoarsenStep {
    MatchingMatrix matching;
    Graph coarse;
};

CoarsenStep coarsen_step(const Graph& g);
CoarsenStep coarsen_step(const Graph& g, Matcher matcher, std::uint64_t seed);

inline constexpr NodeId kDefaultMinNodes = 128;

/// Applies up to `levels` coarsening steps. Stops early when a step does not
/// shrink the graph or would produce fewer than `min_nodes` nodes.
CoarseningChain coarsen(const Graph& g, int levels, NodeId min_nodes = kDefaultMinNodes,
                        Matcher matcher = Matcher::Hybrid, std::uint64_t seed = 0);

/// Line-oriented chain dump: per level `level i nodes N edges E`, then the
/// assignment into the next level.
void write_chain_dump(std::ostream& out, const CoarseningChain& chain);

/// Assignment file: one `fine_id coarse_id` line per fine node.
void write_assignment(std::ostream& out, const MatchingMatrix& m);
MatchingMatrix parse_assignment(std::istream& in);
MatchingMatrix read_assignment_file(const std::string& path);

} // namespace mile
