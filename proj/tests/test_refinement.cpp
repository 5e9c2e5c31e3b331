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

#include <cmath>
#include <sstream>

#include "mile/coarsening.hpp"
#include "mile/errors.hpp"
#include "mile/refinement.hpp"
#include "oracles.hpp"

using namespace mile;

namespace {

Embedding random_embedding(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Embedding e(n, d);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = dist(rng);
    return e;
}

RefinerParams random_params(std::mt19937_64& rng, int d, int layers, double lambda, double scale) {
    RefinerParams p;
    p.lambda = lambda;
    for (int k = 0; k < layers; ++k) p.layers.push_back(random_embedding(rng, d, d, scale));
    return p;
}

double max_rel_error(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (Eigen::Index i = 0; i < a[k].size(); ++i) {
            const double x = a[k].data()[i], y = b[k].data()[i];
            worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
        }
    return worst;
}

Graph path(int n) {
    EdgeList edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
    return Graph::from_edge_list(edges);
}

} // namespace

TEST_CASE("project copies super-node rows") {
    Embedding e(3, 2);
    e << 1, 2, 3, 4, 5, 6;
    CHECK(project(MatchingMatrix::identity(3), e) == e);

    const auto m = MatchingMatrix::from_assignment({0, 0, 1, 2, 1});
    const auto p = project(m, e);
    CHECK(p.rows() == 5);
    CHECK(p.row(0) == e.row(0));
    CHECK(p.row(1) == e.row(0));
    CHECK(p.row(2) == e.row(1));
    CHECK(p.row(3) == e.row(2));
    CHECK(p.row(4) == e.row(1));

    // Oracle: explicit M E.
    std::mt19937_64 rng(2);
    const auto big = random_embedding(rng, 3, 4);
    const auto prod = oracle::matmul(oracle::from_eigen(Eigen::MatrixXd(m.to_sparse())), oracle::from_eigen(big));
    const auto got = project(m, big);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) CHECK(got(i, j) == prod[i][j]);

    CHECK_THROWS_AS(project(m, Embedding(4, 2)), DimensionError);
}

TEST_CASE("propagation operator examples") {
    const auto edge = Graph::from_edge_list(EdgeList{{0, 1, 1.0}});
    const auto op = build_operator(edge, 0.05);
    const Eigen::MatrixXd s(op.s);
    CHECK(s(0, 0) == doctest::Approx(0.05 / 1.05).epsilon(1e-14));
    CHECK(s(0, 1) == doctest::Approx(1.0 / 1.05).epsilon(1e-14));
    CHECK(s(1, 0) == s(0, 1));

    const Eigen::MatrixXd s0(build_operator(edge, 0.0).s);
    CHECK(s0(0, 0) == 0.0);
    CHECK(s0(0, 1) == doctest::Approx(1.0));

    const auto iso = Graph::from_edge_list(EdgeList{{0, 1, 2.0}}, 3);
    const Eigen::MatrixXd si(build_operator(iso, 0.5).s);
    CHECK(si.row(2).isZero());
    CHECK(si.col(2).isZero());

    CHECK_THROWS_AS(build_operator(edge, -0.1), ConfigError);
    CHECK_THROWS_AS(build_operator(edge, 1.5), ConfigError);
}

TEST_CASE("propagation operator matches the dense formula") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 20);
        const auto g = Graph::from_edge_list(oracle::random_edges(rng, n, 0.3, 4, true), n);
        const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto expected = oracle::dense_operator(oracle::dense_from_graph(g), lambda);
        const Eigen::MatrixXd s(build_operator(g, lambda).s);
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) CHECK(s(u, v) == doctest::Approx(expected[u][v]).epsilon(1e-13));
        CHECK(s == s.transpose());
    }
}

TEST_CASE("forward pass fixed cases") {
    const auto edge = Graph::from_edge_list(EdgeList{{0, 1, 1.0}});
    const auto op = build_operator(edge, 0.05);
    RefinerParams zero;
    zero.layers = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    Embedding x(2, 2);
    x << 1, 2, 3, 4;
    CHECK(gcn_forward(x, op, zero).isZero());

    // Single node with a self-loop: S = [1], so H = tanh(x theta).
    const auto loop = Graph::from_edge_list(EdgeList{{0, 0, 2.0}});
    RefinerParams one;
    one.layers = {Eigen::MatrixXd::Constant(1, 1, 0.7)};
    Embedding x1(1, 1);
    x1 << 1.3;
    CHECK(gcn_forward(x1, build_operator(loop, 0.05), one)(0, 0) == doctest::Approx(std::tanh(0.91)));

    CHECK_THROWS_AS(gcn_forward(Embedding(3, 2), op, zero), DimensionError);
    CHECK_THROWS_AS(gcn_forward(Embedding(2, 3), op, zero), DimensionError);
    RefinerParams empty;
    CHECK_THROWS_AS(gcn_forward(x, op, empty), ConfigError);
}

TEST_CASE("forward pass matches the dense oracle") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 15);
        const int d = 1 + static_cast<int>(rng() % 6);
        const int l = 1 + static_cast<int>(rng() % 3);
        const auto g = Graph::from_edge_list(oracle::random_edges(rng, n, 0.3, 3), n);
        const auto params = random_params(rng, d, l, 0.1, 0.8);
        const auto x = random_embedding(rng, n, d);
        const auto got = gcn_forward(x, build_operator(g, params.lambda), params);
        std::vector<oracle::Dense> thetas;
        for (const auto& t : params.layers) thetas.push_back(oracle::from_eigen(t));
        const auto expected =
            oracle::dense_forward(oracle::dense_operator(oracle::dense_from_graph(g), 0.1), oracle::from_eigen(x), thetas);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) CHECK(std::abs(got(i, j) - expected[i][j]) < 1e-12);
        const auto trace = gcn_forward_trace(x, build_operator(g, params.lambda), params);
        CHECK(trace.output() == got);
        CHECK(trace.hidden.size() == static_cast<std::size_t>(l + 1));
    }
}

TEST_CASE("loss functions") {
    const auto edge = Graph::from_edge_list(EdgeList{{0, 1, 1.0}});
    const auto op = build_operator(edge, 0.05);
    RefinerParams zero;
    zero.layers = {Eigen::MatrixXd::Zero(2, 2)};
    Embedding e(2, 2);
    e << 1, 2, 3, 4;
    // H = 0, loss = (1 + 4 + 9 + 16) / 2.
    CHECK(loss_self(e, op, zero) == doctest::Approx(15.0));

    // Double base: fine graph of 2 nodes, coarse embedding of 1 row.
    Embedding coarse(1, 2);
    coarse << 0.5, -0.5;
    const auto m = MatchingMatrix::from_assignment({0, 0});
    CHECK(loss_double_base(e, coarse, m, op, zero) == doctest::Approx(15.0));
    CHECK_THROWS_AS(loss_double_base(Embedding(3, 2), coarse, m, op, zero), DimensionError);

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 10), d = 1 + static_cast<int>(rng() % 5);
        const auto g = Graph::from_edge_list(oracle::random_edges(rng, n, 0.4, 2), n);
        const auto params = random_params(rng, d, 2, 0.05, 0.5);
        const auto x = random_embedding(rng, n, d);
        const auto o = build_operator(g, 0.05);
        CHECK(loss_self(x, o, params) ==
              doctest::Approx(oracle::scalar_loss(oracle::from_eigen(x), oracle::from_eigen(gcn_forward(x, o, params))))
                  .epsilon(1e-13));
    }
}

TEST_CASE("gradients match finite differences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 15);
        const int d = 1 + static_cast<int>(rng() % 8);
        const int l = 1 + static_cast<int>(rng() % 3);
        const auto g = Graph::from_edge_list(oracle::random_edges(rng, n, 0.4, 3), n);
        const auto params = random_params(rng, d, l, 0.05, 0.6);
        const auto x = random_embedding(rng, n, d);
        const auto t = random_embedding(rng, n, d);
        const auto op = build_operator(g, 0.05);
        const auto analytic = loss_and_gradient(x, t, op, params).gradients;
        const auto numeric = oracle::finite_difference(
            params, [&](const RefinerParams& p) { return reconstruction_loss(x, t, op, p); }, 1e-5);
        CHECK(max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("zero weights are a stationary point of the self loss") {
    std::mt19937_64 rng(9);
    const auto g = path(6);
    const auto x = random_embedding(rng, 6, 3);
    RefinerParams zero;
    zero.layers = {Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)};
    // With two layers both partial derivatives vanish at Theta = 0.
    for (const auto& gr : grad_self(zero, x, build_operator(g, 0.05))) CHECK(gr.isZero());
}

TEST_CASE("training") {
    std::mt19937_64 rng(10);
    const auto g = Graph::from_edge_list(oracle::random_edges(rng, 30, 0.2, 1), 30);
    const auto e = random_embedding(rng, 30, 4, 0.5);

    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 3;
    const auto none = train(e, g, cfg, 0.05, 2);
    CHECK(none.losses.size() == 1);
    const auto init = init_params(4, 2, 0.05, cfg.init_scale, cfg.seed);
    CHECK(none.params.layers == init.layers);
    for (const auto& w : init.layers) CHECK((w.array().abs() <= cfg.init_scale).all());

    cfg.epochs = 100;
    cfg.learning_rate = 0.01;
    const auto r = train(e, g, cfg, 0.05, 2);
    CHECK(r.losses.size() == 101);
    CHECK(r.final_loss() <= r.initial_loss());
    CHECK(r.final_loss() < r.initial_loss());
    const auto again = train(e, g, cfg, 0.05, 2);
    CHECK(again.params.layers == r.params.layers);
    CHECK(again.losses == r.losses);

    cfg.epochs = -1;
    CHECK_THROWS_AS(train(e, g, cfg, 0.05, 2), ConfigError);
}

TEST_CASE("double-base training reduces its loss") {
    const auto g = path(8);
    const auto step = coarsen_step(g);
    std::mt19937_64 rng(11);
    const auto e_m = random_embedding(rng, 8, 3, 0.5);
    const auto e_m1 = random_embedding(rng, step.matching.coarse_count, 3, 0.5);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 0.01;
    const auto r = train_double_base(e_m, e_m1, step.matching, g, cfg, 0.05, 2);
    CHECK(r.final_loss() < r.initial_loss());
    CHECK(r.initial_loss() == doctest::Approx(loss_double_base(e_m, e_m1, step.matching, build_operator(g, 0.05),
                                                                init_params(3, 2, 0.05, cfg.init_scale, cfg.seed))));
}

TEST_CASE("overflowing loss raises a divergence error") {
    const auto g = path(3);
    Embedding huge = Embedding::Constant(3, 2, 1e200);
    TrainConfig cfg;
    cfg.epochs = 3;
    try {
        train(huge, g, cfg, 0.05, 1);
        FAIL("expected divergence");
    } catch (const DivergenceError& err) {
        CHECK(err.epoch() == 0);
    }
}

TEST_CASE("refine modes") {
    const auto g = path(4);
    Embedding x(4, 2);
    x << 1, 0, 0, 1, 1, 1, 2, 0;
    CHECK(refine(x, g, RefineMode::projection_only()) == x);
    CHECK_THROWS_AS(refine(x, g, RefineMode::trained()), ConfigError);

    RefinerParams zero;
    zero.layers = {Eigen::MatrixXd::Zero(2, 2)};
    CHECK(refine(x, g, RefineMode::trained(), &zero).isZero());

    const auto u1 = refine(x, g, RefineMode::untrained(5));
    CHECK(u1 == refine(x, g, RefineMode::untrained(5)));
    CHECK(u1 != refine(x, g, RefineMode::untrained(6)));
    CHECK(u1 == gcn_forward(x, build_operator(g, 0.05), init_params(2, 2, 0.05, 0.1, 5)));

    // One round, self weight 1 on a path: node 0 averages itself with node 1.
    const auto avg = refine(x, g, RefineMode::neighborhood_average(1, 1.0));
    CHECK(avg(0, 0) == doctest::Approx(0.5));
    CHECK(avg(0, 1) == doctest::Approx(0.5));
    CHECK(avg(1, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(avg(1, 1) == doctest::Approx(2.0 / 3.0));
    const auto avg2 = refine(x, g, RefineMode::neighborhood_average(2, 1.0));
    CHECK(avg2.isApprox(neighborhood_average(neighborhood_average(x, g, 1, 1.0), g, 1, 1.0)));

    CHECK(to_string(RefineMode::Kind::Trained) == "trained");
    CHECK(to_string(RefineMode::Kind::NeighborhoodAverage) == "avg");
    CHECK_THROWS_AS(refine(Embedding(3, 2), g, RefineMode::projection_only()), DimensionError);
}

TEST_CASE("single precision instantiation") {
    const auto g = path(5);
    const auto op = build_operator<float>(g, 0.05f);
    RefinerParamsT<float> p;
    p.lambda = 0.05f;
    p.layers = {Eigen::MatrixXf::Identity(3, 3)};
    EmbeddingT<float> x = EmbeddingT<float>::Ones(5, 3);
    const auto h = gcn_forward(x, op, p);
    CHECK(h.rows() == 5);
    CHECK((h.array() > 0.0f).all());
    CHECK(loss_and_gradient(x, x, op, p).gradients.size() == 1);
}

TEST_CASE("parameter file format") {
    std::mt19937_64 rng(12);
    const auto p = random_params(rng, 3, 2, 0.07, 1.0);
    std::stringstream ss;
    write_params(ss, p);
    const auto back = parse_params(ss);
    CHECK(back.layers == p.layers);
    CHECK(back.lambda == p.lambda);

    std::istringstream truncated("1 2 0.05\n1 2\n");
    CHECK_THROWS_AS(parse_params(truncated), FormatError);
    std::istringstream bad_header("x 2 0.05\n");
    CHECK_THROWS_AS(parse_params(bad_header), FormatError);
}
