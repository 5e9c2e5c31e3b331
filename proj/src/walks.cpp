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
#include <numeric>
#include <thread>

#include "mile/embedding.hpp"
#include "mile/errors.hpp"

namespace mile {

void WalkCorpus::push(std::span<const NodeId> walk) {
    tokens.insert(tokens.end(), walk.begin(), walk.end());
    offsets.push_back(static_cast<std::int64_t>(tokens.size()));
}

namespace {

// Per-row cumulative transition weights with self-loops removed.
struct TransitionTable {
    std::vector<std::int64_t> offsets;
    std::vector<NodeId> targets;
    std::vector<double> cumulative;

    explicit TransitionTable(const Graph& g) : offsets(static_cast<std::size_t>(g.node_count()) + 1, 0) {
        for (NodeId u = 0; u < g.node_count(); ++u) {
            const auto nbrs = g.neighbors(u);
            const auto wts = g.weights(u);
            double acc = 0.0;
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                if (nbrs[k] == u) continue;
                acc += wts[k];
                targets.push_back(nbrs[k]);
                cumulative.push_back(acc);
            }
            offsets[u + 1] = static_cast<std::int64_t>(targets.size());
        }
    }

    /// -1 when u has no neighbors.
    NodeId step(NodeId u, Rng& rng) const {
        const auto first = offsets[u];
        const auto last = offsets[u + 1];
        if (first == last) return -1;
        const double r = uniform01(rng) * cumulative[last - 1];
        const auto it = std::upper_bound(cumulative.begin() + first, cumulative.begin() + last, r);
        const auto k = std::min<std::int64_t>(it - cumulative.begin(), last - 1);
        return targets[k];
    }
};

void walk_from(const TransitionTable& table, NodeId start, int length, Rng& rng, std::vector<NodeId>& out) {
    out.clear();
    out.push_back(start);
    NodeId cur = start;
    while (static_cast<int>(out.size()) < length) {
        cur = table.step(cur, rng);
        if (cur < 0) break;
        out.push_back(cur);
    }
}

} // namespace

WalkCorpus generate_walks(const Graph& g, const BaseEmbedderConfig& cfg, Rng& rng) {
    if (cfg.walk_length < 1) throw ConfigError("walk_length must be >= 1");
    if (cfg.walks_per_node < 0) throw ConfigError("walks_per_node must be >= 0");
    const TransitionTable table(g);
    const NodeId n = g.node_count();
    const int threads = std::max(1, cfg.threads);

    WalkCorpus corpus;
    std::vector<NodeId> order(static_cast<std::size_t>(n));
    std::vector<NodeId> walk;
    for (int pass = 0; pass < cfg.walks_per_node; ++pass) {
        std::iota(order.begin(), order.end(), 0);
        shuffle(order.begin(), order.end(), rng);
        if (threads == 1 || n < 2 * threads) {
            for (const auto start : order) {
                walk_from(table, start, cfg.walk_length, rng, walk);
                corpus.push(walk);
            }
            continue;
        }
        // Shards of the start permutation, each with its own seeded stream;
        // concatenated in shard order so the corpus layout is stable.
        std::vector<WalkCorpus> shards(static_cast<std::size_t>(threads));
        std::vector<std::uint64_t> seeds(static_cast<std::size_t>(threads));
        for (auto& s : seeds) s = rng();
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                Rng local(seeds[t]);
                std::vector<NodeId> w;
                const auto lo = static_cast<std::size_t>(n) * t / threads;
                const auto hi = static_cast<std::size_t>(n) * (t + 1) / threads;
                for (auto i = lo; i < hi; ++i) {
                    walk_from(table, order[i], cfg.walk_length, local, w);
                    shards[t].push(w);
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& shard : shards)
            for (std::size_t i = 0; i < shard.size(); ++i) corpus.push(shard.walk(i));
    }
    return corpus;
}

} // namespace mile
