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

#include <doctest.h>

#include "mile/errors.hpp"
#include "mile/pipeline.hpp"
#include "oracles.hpp"

using namespace mile;

namespace {

Graph path(int n) {
    EdgeList edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
    return Graph::from_edge_list(edges);
}

MileConfig spectral_config(int levels, int dim) {
    MileConfig cfg;
    cfg.levels = levels;
    cfg.dim = dim;
    cfg.base.method = BaseMethod::Spectral;
    cfg.min_nodes = 1;
    cfg.train.epochs = 30;
    cfg.train.learning_rate = 0.01;
    cfg.seed = 7;
    return cfg;
}

Graph random_graph(std::uint64_t seed, int n, double p) {
    std::mt19937_64 rng(seed);
    return Graph::from_edge_list(oracle::random_edges(rng, n, p, 1), n);
}

} // namespace

TEST_CASE("zero levels returns the base embedding") {
    const auto g = random_graph(1, 40, 0.15);
    auto cfg = spectral_config(0, 4);
    const auto r = mile_embed(g, cfg);
    CHECK(r.embedding == base_embed(g, effective_base_config(cfg)));
    CHECK(r.report.effective_levels == 0);
    CHECK(r.report.refine_ms == 0.0);
    CHECK(r.report.training_invocations == 0);
    CHECK_FALSE(r.params.has_value());

    cfg.base = BaseEmbedderConfig{};
    cfg.base.walk_length = 10;
    cfg.base.walks_per_node = 2;
    CHECK(mile_embed(g, cfg).embedding == base_embed(g, effective_base_config(cfg)));
}

TEST_CASE("projection-only output equals composed super-node rows") {
    const auto g = random_graph(2, 60, 0.1);
    for (int m : {1, 2, 3}) {
        auto cfg = spectral_config(m, 3);
        cfg.refine_mode = RefineMode::projection_only();
        const auto r = mile_embed(g, cfg);
        const auto chain = coarsen(g, m, cfg.min_nodes, cfg.matcher, phase_seed(cfg.seed, Phase::Matching));
        const auto base = base_embed(chain.coarsest(), effective_base_config(cfg));
        const auto assignment = chain.compose_assignment(chain.levels());
        REQUIRE(r.embedding.rows() == 60);
        for (NodeId u = 0; u < 60; ++u) CHECK(r.embedding.row(u) == base.row(assignment[u]));
        CHECK(r.report.training_invocations == 0);
    }
}

TEST_CASE("refinement breaks ties between matched nodes on a path") {
    const auto g = path(8);
    const auto cfg = spectral_config(2, 2);
    const auto r = mile_embed(g, cfg);
    CHECK(r.embedding.rows() == 8);
    CHECK(r.embedding.cols() == 2);
    CHECK(r.report.effective_levels == 2);
    CHECK(r.report.levels.size() == 3);
    CHECK(r.report.levels[1].nodes == 4);
    CHECK(r.report.levels[2].nodes == 2);

    const auto chain = coarsen(g, 2, 1, cfg.matcher, phase_seed(cfg.seed, Phase::Matching));
    const auto& a = chain.matchings[0].assignment;
    int pairs = 0;
    for (NodeId u = 0; u < 8; ++u)
        for (NodeId v = u + 1; v < 8; ++v)
            if (a[u] == a[v]) {
                ++pairs;
                CHECK((r.embedding.row(u) - r.embedding.row(v)).cwiseAbs().maxCoeff() > 1e-9);
            }
    CHECK(pairs == 4);
}

TEST_CASE("runs are deterministic and train exactly once") {
    const auto g = random_graph(3, 80, 0.08);
    const auto cfg = spectral_config(2, 4);
    const auto a = mile_embed(g, cfg);
    const auto b = mile_embed(g, cfg);
    CHECK(a.embedding == b.embedding);
    CHECK(a.report.training_invocations == 1);
    CHECK(a.report.base_embed_calls == 1);
    REQUIRE(a.params.has_value());
    CHECK(a.params->layers == b.params->layers);
    REQUIRE(a.report.final_loss.has_value());
    CHECK(*a.report.final_loss <= *a.report.initial_loss);

    // Params from the report reproduce the output by manual refinement.
    const auto chain = coarsen(g, 2, 1, cfg.matcher, phase_seed(cfg.seed, Phase::Matching));
    Embedding e = base_embed(chain.coarsest(), effective_base_config(cfg));
    for (int i = chain.levels() - 1; i >= 0; --i)
        e = refine(project(chain.matchings[i], e), chain.graphs[i], RefineMode::trained(), &*a.params);
    CHECK(e == a.embedding);

    auto other = cfg;
    other.seed = 8;
    CHECK(mile_embed(g, other).embedding != a.embedding);
}

TEST_CASE("output rows always match the input graph") {
    const auto g = random_graph(4, 30, 0.1);
    for (int m : {0, 1, 4, 10}) {
        for (auto mode : {RefineMode::trained(), RefineMode::untrained(0), RefineMode::projection_only(),
                          RefineMode::neighborhood_average()}) {
            auto cfg = spectral_config(m, 3);
            cfg.refine_mode = mode;
            cfg.min_nodes = 3;
            const auto r = mile_embed(g, cfg);
            CHECK(r.embedding.rows() == 30);
            CHECK(r.report.effective_levels <= m);
            CHECK(r.report.levels.size() == static_cast<std::size_t>(r.report.effective_levels + 1));
        }
    }
    // A coarsest graph smaller than the spectral dimension is an error.
    auto tiny = spectral_config(10, 3);
    CHECK_THROWS_AS(mile_embed(path(8), tiny), DimensionError);
}

TEST_CASE("early stopping records requested and effective levels") {
    const auto g = random_graph(5, 200, 0.03);
    auto cfg = spectral_config(10, 4);
    cfg.min_nodes = 50;
    const auto r = mile_embed(g, cfg);
    CHECK(r.report.requested_levels == 10);
    CHECK(r.report.effective_levels < 10);
    CHECK(r.report.levels.back().nodes >= 50);
    CHECK(r.embedding.rows() == 200);
}

TEST_CASE("untrained mode uses the derived seed") {
    const auto g = random_graph(6, 40, 0.1);
    auto cfg = spectral_config(1, 3);
    cfg.refine_mode = RefineMode::untrained(123);
    const auto r = mile_embed(g, cfg);
    const auto chain = coarsen(g, 1, 1, cfg.matcher, phase_seed(cfg.seed, Phase::Matching));
    const auto base = base_embed(chain.coarsest(), effective_base_config(cfg));
    const auto expected = refine(project(chain.matchings[0], base), g,
                                 RefineMode::untrained(phase_seed(cfg.seed, Phase::Untrained)), nullptr,
                                 RefinerShape{cfg.gcn_layers, cfg.lambda, cfg.train.init_scale});
    CHECK(r.embedding == expected);
}

TEST_CASE("double base structure") {
    const auto g = random_graph(7, 50, 0.1);
    const auto cfg = spectral_config(0, 3);
    const auto r = mile_embed_double_base(g, cfg);
    CHECK(r.embedding.rows() == 50);
    CHECK(r.report.base_embed_calls == 2);
    CHECK(r.report.training_invocations == 1);
    REQUIRE(r.report.extra_level.has_value());
    CHECK(r.report.extra_level->nodes < 50);

    const auto extra = coarsen_step(g, cfg.matcher,
                                    derive_seed(phase_seed(cfg.seed, Phase::Matching), 0));
    CHECK(extra.coarse.node_count() == r.report.extra_level->nodes);
    const auto base = effective_base_config(cfg);
    const auto e1 = base_embed(extra.coarse, base);
    CHECK(r.embedding == refine(project(extra.matching, e1), g, RefineMode::trained(), &*r.params));

    const auto deeper = mile_embed_double_base(g, spectral_config(2, 3));
    CHECK(deeper.embedding.rows() == 50);
    CHECK(deeper.report.effective_levels == 2);
}

TEST_CASE("double base on an edgeless graph trains like the self-copy path") {
    const auto g = Graph::from_edge_list(EdgeList{}, 6);
    const auto cfg = spectral_config(1, 2);
    const auto db = mile_embed_double_base(g, cfg);
    CHECK(db.report.extra_level->nodes == 6);
    const auto e = base_embed(g, effective_base_config(cfg));
    auto tcfg = cfg.train;
    tcfg.seed = phase_seed(cfg.seed, Phase::RefinerInit);
    const auto self = train(e, g, tcfg, cfg.lambda, cfg.gcn_layers);
    CHECK(db.params->layers == self.params.layers);
    CHECK(*db.report.final_loss == self.final_loss());
}

TEST_CASE("double base costs more than self-copy") {
    const auto g = random_graph(8, 2000, 0.004);
    auto cfg = spectral_config(1, 16);
    cfg.train.epochs = 5;
    const auto single = mile_embed(g, cfg);
    const auto doubled = mile_embed_double_base(g, cfg);
    const auto total = [](const RunReport& r) { return r.coarsen_ms + r.base_ms + r.train_ms + r.refine_ms; };
    CHECK(doubled.report.base_embed_calls == single.report.base_embed_calls + 1);
    CHECK(doubled.report.base_stats.eigensolve_dim > single.report.base_stats.eigensolve_dim);
    CHECK(total(doubled.report) > total(single.report));
}

TEST_CASE("report json") {
    const auto g = path(8);
    const auto cfg = spectral_config(2, 2);
    const auto r = mile_embed(g, cfg);
    const auto j = report_to_json(r.report, cfg);
    CHECK(j["levels"].size() == 3);
    CHECK(j["levels"][0]["nodes"] == 8);
    CHECK(j["levels"][0]["edges"] == 7);
    CHECK(j["effective_levels"] == 2);
    for (const char* key : {"coarsen_ms", "base_ms", "train_ms", "refine_ms"}) {
        REQUIRE(j["timings"].contains(key));
        CHECK(j["timings"][key].get<double>() >= 0.0);
    }
    CHECK(j["final_loss"].is_number());
    CHECK(j["config"]["base"] == "spectral");
    CHECK(j["config"]["refine_mode"] == "trained");
    CHECK(j["work"]["training_invocations"] == 1);
    CHECK_FALSE(j.contains("extra_level"));
}

TEST_CASE("configuration errors") {
    const auto g = path(4);
    auto cfg = spectral_config(-1, 2);
    CHECK_THROWS_AS(mile_embed(g, cfg), ConfigError);
    cfg = spectral_config(1, 0);
    CHECK_THROWS_AS(mile_embed(g, cfg), ConfigError);
    cfg = spectral_config(1, 2);
    cfg.lambda = 2.0;
    CHECK_THROWS_AS(mile_embed(g, cfg), ConfigError);
    CHECK_THROWS_AS(mile_embed(Graph::from_edge_list(EdgeList{}, 0), spectral_config(0, 1)), DimensionError);
}

TEST_CASE("divergence carries the partial report") {
    const auto g = path(6);
    auto cfg = spectral_config(1, 2);
    cfg.base.method = BaseMethod::External;
    const auto path_file = std::string("/tmp/mile_pipeline_div.emb");
    write_embedding_file(path_file, Embedding::Constant(3, 2, 1e200));
    cfg.base.external_path = path_file;
    try {
        mile_embed(g, cfg);
        FAIL("expected divergence");
    } catch (const RunDivergenceError& err) {
        CHECK(err.report().effective_levels == 1);
        CHECK(err.report().base_embed_calls == 1);
    }
}
