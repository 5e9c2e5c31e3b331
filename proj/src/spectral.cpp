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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "mile/embedding.hpp"
#include "mile/errors.hpp"

namespace mile {
namespace {

constexpr int kPowerIterations = 10;
constexpr int kOversampling = 8;
constexpr double kTieTolerance = 1e-10;

// Orders eigenpairs by |lambda| descending; near-equal magnitudes put the
// positive eigenvalue first.
std::vector<Eigen::Index> magnitude_order(const Eigen::VectorXd& values) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(values[a]) > std::abs(values[b]); });
    for (bool swapped = true; swapped;) {
        swapped = false;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const double a = values[order[i]];
            const double b = values[order[i + 1]];
            if (std::abs(std::abs(a) - std::abs(b)) <= kTieTolerance && a < b) {
                std::swap(order[i], order[i + 1]);
                swapped = true;
            }
        }
    }
    return order;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= peak - 1e-12) {
            if (v[i] < 0) v = -v;
            return;
        }
    }
}

SpectralDecomposition select_top(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors, int dim) {
    const auto order = magnitude_order(values);
    SpectralDecomposition out;
    out.eigenvalues.resize(dim);
    out.eigenvectors.resize(vectors.rows(), dim);
    for (int k = 0; k < dim; ++k) {
        out.eigenvalues[k] = values[order[k]];
        out.eigenvectors.col(k) = vectors.col(order[k]).normalized();
        fix_sign(out.eigenvectors.col(k));
    }
    return out;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

} // namespace

SparseOperatorT<double> normalized_adjacency(const Graph& g) {
    const NodeId n = g.node_count();
    const auto deg = g.degrees();
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n), 0.0);
    for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = deg[u] > 0.0 ? 1.0 / std::sqrt(deg[u]) : 0.0;
    std::vector<Eigen::Triplet<double, std::int64_t>> trips;
    trips.reserve(g.neighbor_ids().size());
    for (NodeId u = 0; u < n; ++u) {
        const auto nbrs = g.neighbors(u);
        const auto wts = g.weights(u);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
            trips.emplace_back(u, nbrs[k], wts[k] * (inv_sqrt[u] * inv_sqrt[nbrs[k]]));
    }
    SparseOperatorT<double> s(n, n);
    s.setFromTriplets(trips.begin(), trips.end());
    return s;
}

SpectralDecomposition spectral_decompose(const Graph& g, int dim, std::uint64_t seed) {
    const NodeId n = g.node_count();
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
    if (dim > n)
        throw DimensionError("spectral embedding dimension " + std::to_string(dim) + " exceeds node count " +
                             std::to_string(n));
    const auto s = normalized_adjacency(g);

    if (n <= kDenseEigenLimit) {
        const Eigen::MatrixXd dense = Eigen::MatrixXd(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
        if (solver.info() != Eigen::Success) throw Error("dense eigendecomposition failed");
        auto out = select_top(solver.eigenvalues(), solver.eigenvectors(), dim);
        out.solved_dim = n;
        return out;
    }

    const int k = std::min<int>(n, dim + kOversampling);
    Rng rng(seed);
    Eigen::MatrixXd omega(n, k);
    for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = uniform(rng, -1.0, 1.0);
    Eigen::MatrixXd q = orthonormal_basis(s * omega);
    for (int it = 0; it < kPowerIterations; ++it) q = orthonormal_basis(s * q);
    const Eigen::MatrixXd sq = s * q;
    Eigen::MatrixXd b = q.transpose() * sq;
    b = 0.5 * (b + b.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (solver.info() != Eigen::Success) throw Error("projected eigendecomposition failed");
    auto out = select_top(solver.eigenvalues(), q * solver.eigenvectors(), dim);
    out.solved_dim = n;
    return out;
}

Embedding spectral_embed(const Graph& g, int dim, std::uint64_t seed) {
    const auto dec = spectral_decompose(g, dim, seed);
    Embedding e(g.node_count(), dim);
    for (int k = 0; k < dim; ++k) e.col(k) = std::sqrt(std::abs(dec.eigenvalues[k])) * dec.eigenvectors.col(k);
    return e;
}

} // namespace mile
