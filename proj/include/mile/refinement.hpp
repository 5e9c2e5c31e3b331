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

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mile/coarsening.hpp"
#include "mile/embedding.hpp"
#include "mile/errors.hpp"
#include "mile/graph.hpp"
#include "mile/rng.hpp"

namespace mile {

enum class Activation { Tanh };

/// Weights of the l-layer graph convolution refiner. Every layer is d x d
/// and the same instance is applied at every refinement level.
template <typename Scalar>
struct RefinerParamsT {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<Matrix> layers;
    Scalar lambda = Scalar(0.05);
    Activation activation = Activation::Tanh;

    int depth() const { return static_cast<int>(layers.size()); }
    Eigen::Index dim() const { return layers.empty() ? 0 : layers.front().rows(); }

    void validate() const {
        if (layers.empty()) throw ConfigError("refiner needs at least one layer");
        if (!(lambda >= Scalar(0) && lambda <= Scalar(1))) throw ConfigError("lambda must lie in [0, 1]");
        for (const auto& w : layers) {
            if (w.rows() != dim() || w.cols() != dim()) throw DimensionError("refiner layers must be d x d");
            if (!w.allFinite()) throw ConfigError("refiner weights must be finite");
        }
    }
};
using RefinerParams = RefinerParamsT<double>;

/// S = D~^{-1/2} (A + lambda D) D~^{-1/2}, D~ the row sums of A + lambda D.
/// Rows and columns of zero-degree nodes are zero.
template <typename Scalar>
struct PropagationOperatorT {
    SparseOperatorT<Scalar> s;

    Eigen::Index size() const { return s.rows(); }
};
using PropagationOperator = PropagationOperatorT<double>;

template <typename Scalar = double>
PropagationOperatorT<Scalar> build_operator(const Graph& g, Scalar lambda) {
    if (!(lambda >= Scalar(0) && lambda <= Scalar(1))) throw ConfigError("lambda must lie in [0, 1]");
    const NodeId n = g.node_count();
    const auto deg = g.degrees();
    std::vector<Scalar> inv_sqrt(static_cast<std::size_t>(n), Scalar(0));
    for (NodeId u = 0; u < n; ++u) {
        // Row sum of A + lambda D is (1 + lambda) D(u,u).
        const Scalar d = (Scalar(1) + lambda) * static_cast<Scalar>(deg[u]);
        inv_sqrt[u] = d > Scalar(0) ? Scalar(1) / std::sqrt(d) : Scalar(0);
    }
    std::vector<Eigen::Triplet<Scalar, std::int64_t>> trips;
    trips.reserve(g.neighbor_ids().size() + static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) {
        const auto nbrs = g.neighbors(u);
        const auto wts = g.weights(u);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
            trips.emplace_back(u, nbrs[k], static_cast<Scalar>(wts[k]) * (inv_sqrt[u] * inv_sqrt[nbrs[k]]));
        if (deg[u] > 0.0) trips.emplace_back(u, u, lambda * static_cast<Scalar>(deg[u]) * (inv_sqrt[u] * inv_sqrt[u]));
    }
    PropagationOperatorT<Scalar> op;
    op.s.resize(n, n);
    op.s.setFromTriplets(trips.begin(), trips.end());
    return op;
}

/// Copies each super-node row to its fine nodes: M E.
template <typename Scalar>
EmbeddingT<Scalar> project(const MatchingMatrix& matching, const EmbeddingT<Scalar>& coarse) {
    if (coarse.rows() != matching.coarse_count)
        throw DimensionError("coarse embedding has " + std::to_string(coarse.rows()) + " rows, matching expects " +
                             std::to_string(matching.coarse_count));
    EmbeddingT<Scalar> fine(matching.fine_count, coarse.cols());
    for (NodeId u = 0; u < matching.fine_count; ++u) fine.row(u) = coarse.row(matching.assignment[u]);
    return fine;
}

namespace detail {

template <typename Scalar>
void check_shapes(const EmbeddingT<Scalar>& x, const PropagationOperatorT<Scalar>& op,
                  const RefinerParamsT<Scalar>& params) {
    params.validate();
    if (x.rows() != op.size()) throw DimensionError("embedding rows do not match the operator size");
    if (x.cols() != params.dim()) throw DimensionError("embedding dimension does not match the refiner weights");
}

} // namespace detail

/// Activations of a forward pass: hidden[0] = X, hidden[k] = tanh(S hidden[k-1] Theta_k).
/// propagated[k-1] keeps S hidden[k-1] for the backward pass.
template <typename Scalar>
struct ForwardTrace {
    std::vector<EmbeddingT<Scalar>> hidden;
    std::vector<EmbeddingT<Scalar>> propagated;

    const EmbeddingT<Scalar>& output() const { return hidden.back(); }
};

template <typename Scalar>
ForwardTrace<Scalar> gcn_forward_trace(const EmbeddingT<Scalar>& x, const PropagationOperatorT<Scalar>& op,
                                       const RefinerParamsT<Scalar>& params) {
    detail::check_shapes(x, op, params);
    ForwardTrace<Scalar> trace;
    trace.hidden.reserve(params.layers.size() + 1);
    trace.propagated.reserve(params.layers.size());
    trace.hidden.push_back(x);
    for (const auto& theta : params.layers) {
        trace.propagated.push_back(op.s * trace.hidden.back());
        EmbeddingT<Scalar> z = trace.propagated.back() * theta;
        trace.hidden.push_back(z.array().tanh().matrix());
    }
    return trace;
}

/// H^(l)(X, A); the activation is applied at every layer, the last included.
template <typename Scalar>
EmbeddingT<Scalar> gcn_forward(const EmbeddingT<Scalar>& x, const PropagationOperatorT<Scalar>& op,
                               const RefinerParamsT<Scalar>& params) {
    detail::check_shapes(x, op, params);
    EmbeddingT<Scalar> h = x;
    for (const auto& theta : params.layers) {
        const EmbeddingT<Scalar> propagated = op.s * h;
        EmbeddingT<Scalar> z = propagated * theta;
        h = z.array().tanh().matrix();
    }
    return h;
}

/// (1/|V|) ||target - H^(l)(input)||_F^2.
template <typename Scalar>
Scalar reconstruction_loss(const EmbeddingT<Scalar>& input, const EmbeddingT<Scalar>& target,
                           const PropagationOperatorT<Scalar>& op, const RefinerParamsT<Scalar>& params) {
    if (input.rows() != target.rows() || input.cols() != target.cols())
        throw DimensionError("refiner input and target shapes differ");
    if (target.rows() == 0) return Scalar(0);
    return (target - gcn_forward(input, op, params)).squaredNorm() / static_cast<Scalar>(target.rows());
}

/// Self-copy loss: the coarsest embedding must reproduce itself.
template <typename Scalar>
Scalar loss_self(const EmbeddingT<Scalar>& e_m, const PropagationOperatorT<Scalar>& op,
                 const RefinerParamsT<Scalar>& params) {
    return reconstruction_loss(e_m, e_m, op, params);
}

/// Double-base loss: refine the projection of E_{m+1} towards E_m.
template <typename Scalar>
Scalar loss_double_base(const EmbeddingT<Scalar>& e_m, const EmbeddingT<Scalar>& e_m1, const MatchingMatrix& matching,
                        const PropagationOperatorT<Scalar>& op, const RefinerParamsT<Scalar>& params) {
    if (matching.fine_count != e_m.rows()) throw DimensionError("matching does not map onto the level-m embedding");
    return reconstruction_loss(project(matching, e_m1), e_m, op, params);
}

template <typename Scalar>
struct LossAndGradient {
    Scalar loss = Scalar(0);
    std::vector<typename RefinerParamsT<Scalar>::Matrix> gradients;
};

/// Loss and dL/dTheta^(k) for every layer by reverse-mode differentiation.
template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const EmbeddingT<Scalar>& input, const EmbeddingT<Scalar>& target,
                                          const PropagationOperatorT<Scalar>& op,
                                          const RefinerParamsT<Scalar>& params) {
    if (input.rows() != target.rows() || input.cols() != target.cols())
        throw DimensionError("refiner input and target shapes differ");
    const auto trace = gcn_forward_trace(input, op, params);
    const auto n = static_cast<Scalar>(std::max<Eigen::Index>(1, target.rows()));
    const EmbeddingT<Scalar> residual = trace.output() - target;

    LossAndGradient<Scalar> out;
    out.loss = residual.squaredNorm() / n;
    out.gradients.resize(params.layers.size());
    EmbeddingT<Scalar> d_hidden = (Scalar(2) / n) * residual;
    for (auto k = params.layers.size(); k-- > 0;) {
        const auto& h = trace.hidden[k + 1];
        const EmbeddingT<Scalar> d_z = d_hidden.array() * (Scalar(1) - h.array().square());
        out.gradients[k] = trace.propagated[k].transpose() * d_z;
        if (k > 0) d_hidden = op.s.transpose() * (d_z * params.layers[k].transpose());
    }
    return out;
}

template <typename Scalar>
std::vector<typename RefinerParamsT<Scalar>::Matrix> grad_self(const RefinerParamsT<Scalar>& params,
                                                               const EmbeddingT<Scalar>& e_m,
                                                               const PropagationOperatorT<Scalar>& op) {
    return loss_and_gradient(e_m, e_m, op, params).gradients;
}

/// Seeded uniform initialization in [-scale, scale].
RefinerParams init_params(int dim, int layers, double lambda, double scale, std::uint64_t seed);

struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    double init_scale = 0.1;

    void validate() const;
};

struct TrainResult {
    RefinerParams params;
    /// losses[t] is the loss after t optimizer steps; size epochs + 1.
    std::vector<double> losses;

    double initial_loss() const { return losses.front(); }
    double final_loss() const { return losses.back(); }
};

/// Full-batch Adam on reconstruction_loss(input, target), starting from `start`.
TrainResult train_refiner(const Embedding& input, const Embedding& target, const PropagationOperator& op,
                          RefinerParams start, const TrainConfig& cfg);

/// Self-copy training on the coarsest level.
TrainResult train(const Embedding& e_m, const Graph& g_m, const TrainConfig& cfg, double lambda, int layers);

/// Double-base training: the projection of E_{m+1} is refined towards E_m.
TrainResult train_double_base(const Embedding& e_m, const Embedding& e_m1, const MatchingMatrix& matching,
                              const Graph& g_m, const TrainConfig& cfg, double lambda, int layers);

struct RefineMode {
    enum class Kind { Trained, Untrained, ProjectionOnly, NeighborhoodAverage };

    Kind kind = Kind::Trained;
    std::uint64_t seed = 0;        ///< Untrained
    int rounds = 2;                ///< NeighborhoodAverage
    double self_loop_weight = 1.0; ///< NeighborhoodAverage

    static RefineMode trained() { return {}; }
    static RefineMode untrained(std::uint64_t seed) { return {Kind::Untrained, seed}; }
    static RefineMode projection_only() { return {Kind::ProjectionOnly}; }
    static RefineMode neighborhood_average(int rounds = 2, double self_loop_weight = 1.0) {
        return {Kind::NeighborhoodAverage, 0, rounds, self_loop_weight};
    }
};

std::string to_string(RefineMode::Kind kind);

/// Shape of refiners created on the fly (Untrained mode).
struct RefinerShape {
    int layers = 2;
    double lambda = 0.05;
    double init_scale = 0.1;
};

/// Applies one refinement step to projected embeddings on graph g.
/// Trained mode requires `params`; Untrained draws weights from `shape`.
Embedding refine(const Embedding& projected, const Graph& g, const RefineMode& mode,
                 const RefinerParams* params = nullptr, const RefinerShape& shape = {});

/// `rounds` passes of self-loop-augmented, row-normalized neighbor averaging.
Embedding neighborhood_average(const Embedding& x, const Graph& g, int rounds, double self_loop_weight);

/// Text format: `l d lambda`, then each layer as d lines of d values.
void write_params(std::ostream& out, const RefinerParams& params);
RefinerParams parse_params(std::istream& in);
void write_params_file(const std::string& path, const RefinerParams& params);
RefinerParams read_params_file(const std::string& path);

} // namespace mile
