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
#include <atomic>
#include <cmath>
#include <thread>

#include "mile/embedding.hpp"
#include "mile/errors.hpp"

namespace mile {
namespace {

constexpr double kUnigramPower = 0.75;
constexpr double kFinalLrFraction = 0.01;

// Unigram^0.75 noise distribution over nodes seen in the walks.
class NoiseSampler {
public:
    NoiseSampler(const WalkCorpus& walks, NodeId n) : cumulative_(static_cast<std::size_t>(n), 0.0) {
        std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
        for (const auto t : walks.tokens) counts[t] += 1.0;
        double acc = 0.0;
        for (NodeId u = 0; u < n; ++u) {
            acc += std::pow(counts[u], kUnigramPower);
            cumulative_[u] = acc;
        }
    }

    NodeId sample(Rng& rng) const {
        const double r = uniform01(rng) * cumulative_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
        return static_cast<NodeId>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                            static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    }

private:
    std::vector<double> cumulative_;
};

inline double sigmoid(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

std::int64_t count_pairs(std::span<const NodeId> walk, int window) {
    std::int64_t total = 0;
    const auto len = static_cast<std::int64_t>(walk.size());
    for (std::int64_t i = 0; i < len; ++i) {
        const auto lo = std::max<std::int64_t>(0, i - window);
        const auto hi = std::min<std::int64_t>(len - 1, i + window);
        total += hi - lo;
    }
    return total;
}

struct Trainer {
    const BaseEmbedderConfig& cfg;
    const NoiseSampler& noise;
    Embedding& in;
    Embedding& out;
    std::int64_t total_pairs;
    std::atomic<std::int64_t>& progress;

    void train_walk(std::span<const NodeId> walk, Rng& rng, Eigen::VectorXd& grad_in, std::int64_t& local) {
        const auto len = static_cast<std::int64_t>(walk.size());
        const double span = 1.0 - kFinalLrFraction;
        for (std::int64_t i = 0; i < len; ++i) {
            const NodeId center = walk[i];
            const auto lo = std::max<std::int64_t>(0, i - cfg.window);
            const auto hi = std::min<std::int64_t>(len - 1, i + cfg.window);
            for (auto j = lo; j <= hi; ++j) {
                if (j == i) continue;
                const double frac = static_cast<double>(progress.load(std::memory_order_relaxed) + local) /
                                    static_cast<double>(total_pairs);
                const double lr = cfg.initial_lr * (1.0 - span * std::min(1.0, frac));
                grad_in.setZero();
                for (int k = 0; k <= cfg.negatives; ++k) {
                    NodeId target;
                    double label;
                    if (k == 0) {
                        target = walk[j];
                        label = 1.0;
                    } else {
                        target = noise.sample(rng);
                        if (target == walk[j]) continue;
                        label = 0.0;
                    }
                    const double score = in.row(center).dot(out.row(target));
                    const double g = (label - sigmoid(score)) * lr;
                    grad_in.noalias() += g * out.row(target).transpose();
                    out.row(target) += g * in.row(center);
                }
                in.row(center) += grad_in.transpose();
                ++local;
            }
        }
    }
};

} // namespace

Embedding sgns_train(const WalkCorpus& walks, NodeId node_count, const BaseEmbedderConfig& cfg, Rng& rng,
                     std::int64_t* pairs_visited) {
    if (cfg.dim < 1) throw ConfigError("embedding dimension must be >= 1");
    if (cfg.window < 1 || cfg.negatives < 0 || cfg.epochs_sgns < 0 || !(cfg.initial_lr > 0.0))
        throw ConfigError("invalid skip-gram configuration");

    const int d = cfg.dim;
    Embedding in(node_count, d);
    const double half = 0.5 / d;
    for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = uniform(rng, -half, half);
    Embedding out = Embedding::Zero(node_count, d);

    std::int64_t per_epoch = 0;
    for (std::size_t w = 0; w < walks.size(); ++w) per_epoch += count_pairs(walks.walk(w), cfg.window);
    const std::int64_t total = per_epoch * cfg.epochs_sgns;
    if (pairs_visited) *pairs_visited = total;
    if (total == 0 || node_count == 0) return in;

    const NoiseSampler noise(walks, node_count);
    std::atomic<std::int64_t> progress{0};
    Trainer trainer{cfg, noise, in, out, total, progress};
    const int threads = std::max(1, cfg.threads);

    for (int epoch = 0; epoch < cfg.epochs_sgns; ++epoch) {
        if (threads == 1) {
            Eigen::VectorXd grad(d);
            std::int64_t local = 0;
            for (std::size_t w = 0; w < walks.size(); ++w) trainer.train_walk(walks.walk(w), rng, grad, local);
            progress += local;
            continue;
        }
        // Hogwild-style: shards update the shared matrices without locks.
        std::vector<std::uint64_t> seeds(static_cast<std::size_t>(threads));
        for (auto& s : seeds) s = rng();
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                Rng local_rng(seeds[t]);
                Eigen::VectorXd grad(d);
                const auto lo = walks.size() * t / threads;
                const auto hi = walks.size() * (t + 1) / threads;
                for (auto w = lo; w < hi; ++w) {
                    std::int64_t local = 0;
                    trainer.train_walk(walks.walk(w), local_rng, grad, local);
                    progress += local;
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return in;
}

} // namespace mile
