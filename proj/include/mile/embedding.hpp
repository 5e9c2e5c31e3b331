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

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mile/graph.hpp"
#include "mile/rng.hpp"

namespace mile {

/// Row u is the embedding of node u.
template <typename Scalar>
using EmbeddingT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Embedding = EmbeddingT<double>;

template <typename Scalar>
using SparseOperatorT = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, std::int64_t>;

enum class BaseMethod { RandomWalkSkipGram, Spectral, External };

struct BaseEmbedderConfig {
    BaseMethod method = BaseMethod::RandomWalkSkipGram;
    int dim = 128;
    std::uint64_t seed = 0;
    int walk_length = 80;
    int walks_per_node = 10;
    int window = 10;
    int negatives = 5;
    double initial_lr = 0.025;
    int epochs_sgns = 1;
    std::optional<std::string> external_path;
    /// 1 = deterministic mode. More threads shard walks and run lock-free
    /// skip-gram updates; results are then not reproducible bit for bit.
    int threads = 1;

    void validate() const;
};

/// Counters describing how much work a base embedding performed.
struct BaseEmbedStats {
    std::int64_t walk_steps = 0;     ///< nodes emitted across all walks
    std::int64_t training_pairs = 0; ///< (center, context) pairs visited
    std::int64_t eigensolve_dim = 0; ///< order of the decomposed operator
};

/// Flat storage for a set of random walks.
struct WalkCorpus {
    std::vector<NodeId> tokens;
    std::vector<std::int64_t> offsets{0};

    std::size_t size() const { return offsets.size() - 1; }
    std::span<const NodeId> walk(std::size_t i) const {
        return {tokens.data() + offsets[i], tokens.data() + offsets[i + 1]};
    }
    void push(std::span<const NodeId> walk);
};

/// Uniform-weighted truncated random walks: `walks_per_node` passes over a
/// seeded permutation of the start nodes, `walk_length` nodes per walk.
/// Transitions follow edge weights over non-self neighbors; a walk stops
/// at a node without neighbors.
WalkCorpus generate_walks(const Graph& g, const BaseEmbedderConfig& cfg, Rng& rng);

/// Skip-gram with negative sampling over the walks; returns input vectors.
Embedding sgns_train(const WalkCorpus& walks, NodeId node_count, const BaseEmbedderConfig& cfg, Rng& rng,
                     std::int64_t* pairs_visited = nullptr);

/// D^{-1/2} A D^{-1/2}; rows and columns of zero-degree nodes are zero.
SparseOperatorT<double> normalized_adjacency(const Graph& g);

struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;  ///< ordered by |value| descending, then value descending
    Eigen::MatrixXd eigenvectors; ///< unit columns, largest-magnitude entry positive
    std::int64_t solved_dim = 0;
};

inline constexpr NodeId kDenseEigenLimit = 2048;

/// Top-d eigenpairs of normalized_adjacency(g) by magnitude. Dense solve up
/// to kDenseEigenLimit nodes, seeded randomized subspace iteration above.
SpectralDecomposition spectral_decompose(const Graph& g, int dim, std::uint64_t seed);

/// Row u = [sqrt(|lambda_k|) * U(u,k)]_k.
Embedding spectral_embed(const Graph& g, int dim, std::uint64_t seed);

Embedding base_embed(const Graph& g, const BaseEmbedderConfig& cfg, BaseEmbedStats* stats = nullptr);

/// `<rows> <dim>` header then `<id> <v1> ... <vd>` rows in ascending id order.
void write_embedding(std::ostream& out, const Embedding& e);
Embedding parse_embedding(std::istream& in);
void write_embedding_file(const std::string& path, const Embedding& e);
Embedding read_embedding_file(const std::string& path);

} // namespace mile
