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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace mile {

using NodeId = std::int32_t;

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double w = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// Immutable undirected weighted graph in CSR form.
///
/// Both directions of every edge are stored; a self-loop (u,u) is stored
/// once and contributes its weight once to degree(u). Neighbor ids inside a
/// row are strictly increasing and every stored weight is positive.
class Graph {
public:
    Graph() : offsets_(1, 0) {}

    /// Builds a symmetrized graph. Parallel edges (in either direction) are
    /// summed. node_count = max(hint, 1 + max id).
    static Graph from_edge_list(std::span<const Edge> edges,
                                std::optional<NodeId> node_count_hint = std::nullopt);

    /// Adopts CSR arrays that already satisfy the class invariants.
    /// Degrees are recomputed; invariants are checked.
    static Graph from_csr(std::vector<std::int64_t> offsets, std::vector<NodeId> neighbors,
                          std::vector<double> weights);

    NodeId node_count() const { return static_cast<NodeId>(offsets_.size() - 1); }

    /// Number of undirected edges, self-loops included (each counted once).
    std::int64_t edge_count() const { return edge_count_; }

    /// Distinct neighbors of u other than u itself.
    NodeId neighbor_count(NodeId u) const;

    double weighted_degree(NodeId u) const;

    /// A(u,v), 0 when the edge is absent.
    double weight(NodeId u, NodeId v) const;
    bool has_edge(NodeId u, NodeId v) const;

    std::span<const NodeId> neighbors(NodeId u) const {
        check_node(u);
        return {neighbors_.data() + offsets_[u], neighbors_.data() + offsets_[u + 1]};
    }
    std::span<const double> weights(NodeId u) const {
        check_node(u);
        return {weights_.data() + offsets_[u], weights_.data() + offsets_[u + 1]};
    }

    std::span<const std::int64_t> row_offsets() const { return offsets_; }
    std::span<const NodeId> neighbor_ids() const { return neighbors_; }
    std::span<const double> edge_weights() const { return weights_; }
    std::span<const double> degrees() const { return degree_; }

    /// Upper-triangular edge list (u <= v), ascending, suitable for re-ingestion.
    EdgeList to_edge_list() const;

    /// Sparse adjacency as an Eigen matrix (row-major, same ordering as CSR).
    Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t> adjacency() const;

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    void check_node(NodeId u) const;
    void finalize();

    std::vector<std::int64_t> offsets_;
    std::vector<NodeId> neighbors_;
    std::vector<double> weights_;
    std::vector<double> degree_;
    std::int64_t edge_count_ = 0;
};

inline NodeId neighbor_count(const Graph& g, NodeId u) { return g.neighbor_count(u); }
inline double weighted_degree(const Graph& g, NodeId u) { return g.weighted_degree(u); }

/// Parses `u v [w]` lines; `#` lines and blank lines are skipped.
/// Throws FormatError carrying the 1-based line number.
EdgeList parse_edge_list(std::istream& in);
EdgeList read_edge_list_file(const std::string& path);
Graph read_graph_file(const std::string& path, std::optional<NodeId> node_count_hint = std::nullopt);

void write_edge_list(std::ostream& out, const Graph& g);
void write_graph_file(const std::string& path, const Graph& g);

} // namespace mile
