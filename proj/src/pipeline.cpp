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

#include "mile/pipeline.hpp"

#include <chrono>

#include <sys/resource.h>

namespace mile {
namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

LevelInfo level_info(const Graph& g) { return {g.node_count(), g.edge_count()}; }

void accumulate(BaseEmbedStats& into, const BaseEmbedStats& s) {
    into.walk_steps += s.walk_steps;
    into.training_pairs += s.training_pairs;
    into.eigensolve_dim += s.eigensolve_dim;
}

Embedding run_base(const Graph& g, const BaseEmbedderConfig& base, RunReport& report) {
    Stopwatch sw;
    BaseEmbedStats stats;
    auto e = base_embed(g, base, &stats);
    accumulate(report.base_stats, stats);
    ++report.base_embed_calls;
    report.base_ms += sw.ms();
    return e;
}

TrainConfig seeded_train_config(const MileConfig& cfg) {
    TrainConfig t = cfg.train;
    t.seed = phase_seed(cfg.seed, Phase::RefinerInit);
    return t;
}

RefineMode seeded_mode(const MileConfig& cfg) {
    RefineMode mode = cfg.refine_mode;
    if (mode.kind == RefineMode::Kind::Untrained) mode.seed = phase_seed(cfg.seed, Phase::Untrained);
    return mode;
}

Embedding refine_down(const CoarseningChain& chain, int from_level, Embedding e, const RefineMode& mode,
                      const RefinerParams* params, const RefinerShape& shape, RunReport& report) {
    Stopwatch sw;
    for (int i = from_level - 1; i >= 0; --i)
        e = refine(project(chain.matchings[i], e), chain.graphs[i], mode, params, shape);
    report.refine_ms += sw.ms();
    return e;
}

template <typename Fn>
TrainResult timed_training(RunReport& report, Fn&& fn) {
    Stopwatch sw;
    try {
        auto result = fn();
        report.train_ms += sw.ms();
        ++report.training_invocations;
        report.initial_loss = result.initial_loss();
        report.final_loss = result.final_loss();
        return result;
    } catch (const DivergenceError& e) {
        report.train_ms += sw.ms();
        report.peak_rss_kb = peak_rss_kb();
        throw RunDivergenceError(e, report);
    }
}

CoarseningChain run_coarsening(const Graph& g, const MileConfig& cfg, RunReport& report) {
    Stopwatch sw;
    auto chain = coarsen(g, cfg.levels, cfg.min_nodes, cfg.matcher, phase_seed(cfg.seed, Phase::Matching));
    report.coarsen_ms += sw.ms();
    report.requested_levels = cfg.levels;
    report.effective_levels = chain.levels();
    for (const auto& level : chain.graphs) report.levels.push_back(level_info(level));
    return chain;
}

} // namespace

void MileConfig::validate() const {
    if (levels < 0) throw ConfigError("levels must be >= 0");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
    if (gcn_layers < 1) throw ConfigError("gcn layers must be >= 1");
    if (min_nodes < 0) throw ConfigError("min_nodes must be >= 0");
    if (refine_mode.kind == RefineMode::Kind::NeighborhoodAverage && refine_mode.rounds < 1)
        throw ConfigError("averaging rounds must be >= 1");
    train.validate();
    effective_base_config(*this).validate();
}

BaseEmbedderConfig effective_base_config(const MileConfig& cfg) {
    BaseEmbedderConfig base = cfg.base;
    base.dim = cfg.dim;
    base.seed = phase_seed(cfg.seed, Phase::Base);
    return base;
}

MileResult mile_embed(const Graph& g, const MileConfig& cfg) {
    cfg.validate();
    if (g.node_count() == 0) throw DimensionError("cannot embed an empty graph");
    MileResult out;
    auto& report = out.report;

    const auto chain = run_coarsening(g, cfg, report);
    const int m = chain.levels();
    Embedding e = run_base(chain.coarsest(), effective_base_config(cfg), report);
    if (m == 0) {
        out.embedding = std::move(e);
        report.peak_rss_kb = peak_rss_kb();
        return out;
    }

    const RefineMode mode = seeded_mode(cfg);
    const RefinerShape shape{cfg.gcn_layers, cfg.lambda, cfg.train.init_scale};
    auto& params = out.params;
    if (mode.kind == RefineMode::Kind::Trained) {
        // Self-copy: M_{m,m+1} = I and G_{m+1} = G_m, so E_{m+1} = E_m.
        auto result = timed_training(report, [&] {
            return train(e, chain.coarsest(), seeded_train_config(cfg), cfg.lambda, cfg.gcn_layers);
        });
        params = std::move(result.params);
    }
    out.embedding = refine_down(chain, m, std::move(e), mode, params ? &*params : nullptr, shape, report);
    report.peak_rss_kb = peak_rss_kb();
    return out;
}

MileResult mile_embed_double_base(const Graph& g, const MileConfig& cfg) {
    cfg.validate();
    if (g.node_count() == 0) throw DimensionError("cannot embed an empty graph");
    MileResult out;
    auto& report = out.report;

    const auto chain = run_coarsening(g, cfg, report);
    const int m = chain.levels();
    Stopwatch sw;
    const auto extra = coarsen_step(chain.coarsest(), cfg.matcher,
                                    derive_seed(phase_seed(cfg.seed, Phase::Matching), static_cast<std::uint64_t>(m)));
    report.coarsen_ms += sw.ms();
    report.extra_level = level_info(extra.coarse);

    const auto base = effective_base_config(cfg);
    Embedding e_m = run_base(chain.coarsest(), base, report);
    const Embedding e_m1 = run_base(extra.coarse, base, report);

    auto result = timed_training(report, [&] {
        return train_double_base(e_m, e_m1, extra.matching, chain.coarsest(), seeded_train_config(cfg), cfg.lambda,
                                 cfg.gcn_layers);
    });
    const RefinerShape shape{cfg.gcn_layers, cfg.lambda, cfg.train.init_scale};
    const auto mode = RefineMode::trained();
    out.params = std::move(result.params);
    if (m == 0) {
        Stopwatch rs;
        out.embedding = refine(project(extra.matching, e_m1), chain.finest(), mode, &*out.params, shape);
        report.refine_ms += rs.ms();
    } else {
        out.embedding = refine_down(chain, m, std::move(e_m), mode, &*out.params, shape, report);
    }
    report.peak_rss_kb = peak_rss_kb();
    return out;
}

nlohmann::json report_to_json(const RunReport& report, const MileConfig& cfg) {
    using nlohmann::json;
    json levels = json::array();
    for (const auto& l : report.levels) levels.push_back({{"nodes", l.nodes}, {"edges", l.edges}});

    std::string base_method = "sgns";
    if (cfg.base.method == BaseMethod::Spectral) base_method = "spectral";
    if (cfg.base.method == BaseMethod::External) base_method = "external";

    json j = {
        {"levels", levels},
        {"requested_levels", report.requested_levels},
        {"effective_levels", report.effective_levels},
        {"timings",
         {{"coarsen_ms", report.coarsen_ms},
          {"base_ms", report.base_ms},
          {"train_ms", report.train_ms},
          {"refine_ms", report.refine_ms}}},
        {"final_loss", report.final_loss ? json(*report.final_loss) : json(nullptr)},
        {"initial_loss", report.initial_loss ? json(*report.initial_loss) : json(nullptr)},
        {"work",
         {{"base_embed_calls", report.base_embed_calls},
          {"training_invocations", report.training_invocations},
          {"walk_steps", report.base_stats.walk_steps},
          {"training_pairs", report.base_stats.training_pairs},
          {"eigensolve_dim", report.base_stats.eigensolve_dim}}},
        {"config",
         {{"levels", cfg.levels},
          {"dim", cfg.dim},
          {"base", base_method},
          {"refine_mode", to_string(cfg.refine_mode.kind)},
          {"lambda", cfg.lambda},
          {"gcn_layers", cfg.gcn_layers},
          {"lr", cfg.train.learning_rate},
          {"epochs", cfg.train.epochs},
          {"min_nodes", cfg.min_nodes},
          {"matcher", cfg.matcher == Matcher::Hybrid ? "hybrid" : "random"},
          {"walk_length", cfg.base.walk_length},
          {"walks", cfg.base.walks_per_node},
          {"window", cfg.base.window},
          {"seed", cfg.seed}}},
    };
    if (report.extra_level) j["extra_level"] = {{"nodes", report.extra_level->nodes}, {"edges", report.extra_level->edges}};
    if (report.peak_rss_kb) j["peak_rss_kb"] = *report.peak_rss_kb;
    return j;
}

std::optional<long> peak_rss_kb() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0) return std::nullopt;
    return usage.ru_maxrss;
}

} // namespace mile
